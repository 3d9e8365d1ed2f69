"""Replacing one hidden transition by a subroutine automaton."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .closure import hidden_closure
from .model import ActionId, ActionKind, Automaton, Distribution, Plts, StateId


@dataclass(frozen=True)
class ReplacementSpec:
    """Swap the ``host_action`` step of ``host_state`` for ``subroutine``.

    ``iota`` sends each successor of the replaced step to the subroutine
    terminal state that stands for it.
    """

    host_state: StateId
    host_action: ActionId
    subroutine: Automaton
    iota: Mapping[StateId, StateId]
    prefix: str | None = None
    hidden_action: ActionId | None = None

    @property
    def namespace(self) -> str:
        return self.prefix if self.prefix is not None else f"sub[{self.host_state}]"

    @property
    def return_action(self) -> ActionId:
        return self.hidden_action if self.hidden_action is not None else f"hdd[{self.host_state}]"


@dataclass(frozen=True)
class ImplementsReport:
    ok: bool
    problems: tuple[str, ...] = field(default_factory=tuple)


def implements_check(spec: ReplacementSpec, mu_dagger: Mapping[StateId, Fraction]) -> ImplementsReport:
    """Does the subroutine's terminal distribution equal ``mu_dagger`` moved through ``iota``?

    Structural problems with the replacement are listed individually.
    """
    problems: list[str] = []
    sub = spec.subroutine.plts
    images = list(spec.iota.values())
    if len(set(images)) != len(images):
        problems.append("iota is not injective")
    if set(spec.iota) != set(mu_dagger):
        problems.append("iota domain differs from the replaced distribution's support")
    if spec.host_state in mu_dagger:
        problems.append("host state lies in the support of its own replaced step")
    for source, image in sorted(spec.iota.items()):
        if image not in sub.states:
            problems.append(f"iota({source}) = {image} is not a subroutine state")
        elif sub.outgoing(image):
            problems.append(f"iota({source}) = {image} has outgoing transitions")
    for action, kind in sorted(sub.actions.items()):
        if kind is not ActionKind.HIDDEN:
            problems.append(f"subroutine action {action} is not hidden")
    if not sub.outgoing(spec.subroutine.initial):
        problems.append("subroutine takes no step from its initial state")
    if problems:
        return ImplementsReport(False, tuple(problems))
    nu = hidden_closure(sub, {spec.subroutine.initial: Fraction(1)})
    expected = {spec.iota[s]: Fraction(p) for s, p in mu_dagger.items()}
    if nu.bottom != 0:
        problems.append(f"subroutine fails to terminate with probability {nu.bottom}")
    elif nu.states() != expected:
        problems.append("terminal distribution differs from the replaced step")
    return ImplementsReport(not problems, tuple(problems))


def replace_transition(m1: Automaton, spec: ReplacementSpec, *, check: bool = True) -> Automaton:
    """Build the automaton in which ``spec.host_state`` runs the subroutine.

    Subroutine states and actions are namespaced. The host state steps to the
    subroutine entry on a fresh hidden action, and each ``iota`` image steps
    back to the host-side state it stands for on the same action.

    Raises:
        ValueError: on precondition violations, or a failed
            :func:`implements_check` when ``check`` is true.
    """
    host = m1.plts
    if host.kind(spec.host_action) is not ActionKind.HIDDEN:
        raise ValueError(f"{spec.host_action} is not a hidden action")
    enabling = [s for (s, a) in host.transitions if a == spec.host_action]
    if enabling != [spec.host_state]:
        raise ValueError(f"{spec.host_state} must be the unique state enabling {spec.host_action}")
    mu_dagger = host.transitions[(spec.host_state, spec.host_action)]
    if check:
        report = implements_check(spec, mu_dagger)
        if not report.ok:
            raise ValueError("subroutine does not implement the transition: "
                             + "; ".join(report.problems))
    ns = spec.namespace

    def tag(name: str) -> str:
        return f"{ns}/{name}"

    sub = spec.subroutine.plts
    fresh = spec.return_action
    new_states = {tag(s) for s in sub.states}
    new_actions = {tag(a): kind for a, kind in sub.actions.items()}
    clashes = (new_states & host.states) | (set(new_actions) & set(host.actions))
    if fresh in host.actions or fresh in new_actions:
        clashes.add(fresh)
    if clashes:
        raise ValueError(f"name clash after namespacing: {sorted(clashes)}")

    transitions: dict[tuple[StateId, ActionId], Distribution] = {
        key: dist for key, dist in host.transitions.items()
        if key != (spec.host_state, spec.host_action)
    }
    for (state, action), dist in sub.transitions.items():
        transitions[(tag(state), tag(action))] = Distribution({tag(t): p for t, p in dist.items()})
    transitions[(spec.host_state, fresh)] = Distribution.dirac(tag(spec.subroutine.initial))
    for target, image in spec.iota.items():
        transitions[(tag(image), fresh)] = Distribution.dirac(target)
    actions = dict(host.actions)
    actions.update(new_actions)
    actions[fresh] = ActionKind.HIDDEN
    plts = Plts(host.states | new_states, actions, transitions)
    return Automaton(plts, m1.initial)
