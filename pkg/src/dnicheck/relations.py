"""Approximate lifting, unwinding families and the covering check."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .closure import closure
from .matching import BipartiteGraph, hopcroft_karp_perfect_matching
from .model import BOTTOM, ActionId, ActionKind, Automaton, Plts, StateId, SubDistribution

Pair = tuple[StateId, StateId]


class Relation(frozenset):
    """A set of state pairs; :data:`BOTTOM` may appear on either side."""

    def inverse(self) -> "Relation":
        return Relation((b, a) for a, b in self)


@dataclass(frozen=True)
class RelationFamily:
    """Levels ``0..t`` of relations plus the per-step ratio budget."""

    levels: tuple[Relation, ...]
    step_rho: Fraction
    t: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(Relation(level) for level in self.levels))
        object.__setattr__(self, "step_rho", Fraction(self.step_rho))
        if self.step_rho < 1:
            raise ValueError("ratio bound must be at least 1")


def _within(a: Fraction, b: Fraction, rho: Fraction) -> bool:
    return a <= rho * b and b <= rho * a


def lifting_graph(rel: Iterable[Pair], rho, nu1: SubDistribution,
                  nu2: SubDistribution) -> BipartiteGraph:
    rho = Fraction(rho)
    rel = rel if isinstance(rel, (set, frozenset)) else set(rel)
    left = sorted(nu1)
    right = sorted(nu2)
    edges = [
        (("L", x), ("R", y))
        for x in left for y in right
        if (x, y) in rel and _within(nu1[x], nu2[y], rho)
    ]
    return BipartiteGraph([("L", x) for x in left], [("R", y) for y in right], edges)


def lifting_bijection(rel, rho, nu1, nu2) -> dict | None:
    """A support bijection witnessing the lifting, or None."""
    ok, matching = hopcroft_karp_perfect_matching(lifting_graph(rel, rho, nu1, nu2))
    if not ok:
        return None
    return {x: y for (_, x), (_, y) in matching.items()}


def is_in_lifted_relation(rel, rho, nu1, nu2) -> bool:
    """Whether ``nu1`` and ``nu2`` are related by the ``rho``-approximate lifting of ``rel``."""
    if len(nu1) != len(nu2):
        return False
    return lifting_bijection(rel, rho, nu1, nu2) is not None


@dataclass(frozen=True)
class CheckFailure:
    reason: str
    level: int | None = None
    pair: Pair | None = None
    action: ActionId | None = None
    state: StateId | None = None
    nu1: SubDistribution | None = None
    nu2: SubDistribution | None = None
    detail: str = ""


@dataclass(frozen=True)
class CheckReport:
    ok: bool
    failure: CheckFailure | None = None
    certified_rho: Fraction | None = None
    details: dict = field(default_factory=dict)


def _enabled(plts: Plts, state: StateId, action: ActionId) -> bool:
    if state == BOTTOM:
        return False
    return action in plts.outgoing(state)


def is_unwind_fam(plts: Plts, fam: RelationFamily) -> CheckReport:
    """Check that ``fam`` is closed under extended transitions.

    For each level, related pair and visible action, both states must agree on
    enablement, and when enabled their closures must be related by the exact
    lifting of the same level or, above level 0, by the ``step_rho`` lifting
    of the level below. The first failure in sorted order is reported.
    """
    if len(fam.levels) != fam.t + 1:
        return CheckReport(False, CheckFailure(
            "family-length", detail=f"{len(fam.levels)} levels for t={fam.t}"))
    visible = plts.actions_of(ActionKind.DATA, ActionKind.QUERY, ActionKind.RESPONSE)
    for i, level in enumerate(fam.levels):
        for pair in sorted(level):
            for member in pair:
                if member == BOTTOM:
                    continue
                if member not in plts.states:
                    return CheckReport(False, CheckFailure("unknown-state", i, pair, state=member))
                if plts.hidden_step(member) is not None:
                    return CheckReport(False, CheckFailure("h-enabled-member", i, pair, state=member))
            x1, x2 = pair
            for action in visible:
                on1, on2 = _enabled(plts, x1, action), _enabled(plts, x2, action)
                if on1 != on2:
                    return CheckReport(False, CheckFailure("action-mismatch", i, pair, action))
                if not on1:
                    continue
                nu1, nu2 = closure(plts, x1, action), closure(plts, x2, action)
                if is_in_lifted_relation(level, 1, nu1, nu2):
                    continue
                if i > 0 and is_in_lifted_relation(fam.levels[i - 1], fam.step_rho, nu1, nu2):
                    continue
                return CheckReport(False, CheckFailure("lifting-failed", i, pair, action,
                                                       nu1=nu1, nu2=nu2))
    return CheckReport(True)


def reachable_states(aut: Automaton) -> set[StateId]:
    plts = aut.plts
    seen = {aut.initial}
    stack = [aut.initial]
    while stack:
        for dist in plts.outgoing(stack.pop()).values():
            for target in dist:
                if target not in seen:
                    seen.add(target)
                    stack.append(target)
    return seen


def is_all_covered(aut: Automaton, rels: Mapping[tuple[StateId, ActionId], RelationFamily],
                   step_rho, t: int) -> CheckReport:
    """Check that every reachable data-point step is covered by a valid family.

    On success the report certifies the ratio bound ``step_rho ** t``.
    """
    step_rho = Fraction(step_rho)
    plts = aut.plts
    # families are often shared between (state, data) keys; check each once
    checked: dict[int, tuple[RelationFamily, CheckReport]] = {}
    for state in sorted(reachable_states(aut)):
        for data in plts.data_actions:
            nu = closure(plts, state, data)
            if nu is None:
                continue
            fam = rels.get((state, data))
            if fam is None:
                return CheckReport(False, CheckFailure("missing-family", state=state, action=data))
            if nu.bottom != 0:
                return CheckReport(False, CheckFailure("nontermination", state=state, action=data,
                                                       nu1=nu))
            if len(fam.levels) != t + 1:
                return CheckReport(False, CheckFailure(
                    "family-length", state=state, action=data,
                    detail=f"{len(fam.levels)} levels for t={t}"))
            top = fam.levels[t]
            for successor in sorted(nu.states()):
                if (state, successor) not in top:
                    return CheckReport(False, CheckFailure(
                        "cover-missing", t, (state, successor), data, state=state))
            if id(fam) not in checked:
                checked[id(fam)] = (fam, is_unwind_fam(plts, replace(fam, step_rho=step_rho, t=t)))
            report = checked[id(fam)][1]
            if not report.ok:
                return CheckReport(False, report.failure, details={
                    "family_state": state, "family_data": data})
    return CheckReport(True, certified_rho=step_rho ** t)
