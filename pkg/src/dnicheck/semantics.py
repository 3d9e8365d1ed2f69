"""Exact trace semantics and the brute-force noninterference oracle."""

from __future__ import annotations

import itertools
import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .closure import state_closure
from .errors import EnumerationLimitExceeded, UnknownActionError
from .model import ActionId, ActionKind, Automaton, Plts, StateId

CAP_ENV_VAR = "DNICHECK_MAX_EVALUATIONS"
DEFAULT_EVALUATION_CAP = 10**6


def default_evaluation_cap() -> int:
    raw = os.environ.get(CAP_ENV_VAR)
    return int(raw) if raw else DEFAULT_EVALUATION_CAP


def _check_ids(plts: Plts, actions: Iterable[ActionId]) -> None:
    for action in actions:
        if action not in plts.actions:
            raise UnknownActionError(action)


def trace_prefix_prob(aut: Automaton, inputs: Sequence[ActionId],
                      trace: Sequence[ActionId]) -> Fraction:
    """Probability of running ``trace`` (hidden steps included) on ``inputs``.

    Summed over the end states. Input steps must consume the head of
    ``inputs``; output steps must be taken by the state itself.
    """
    plts = aut.plts
    _check_ids(plts, inputs)
    _check_ids(plts, trace)
    for action in inputs:
        if not plts.kind(action).is_input:
            raise ValueError(f"{action!r} is not an input action")
    current: dict[StateId, Fraction] = {aut.initial: Fraction(1)}
    consumed = 0
    for action in trace:
        is_input = plts.kind(action).is_input
        if is_input:
            if consumed >= len(inputs) or inputs[consumed] != action:
                return Fraction(0)
            consumed += 1
        nxt: dict[StateId, Fraction] = {}
        for state, mass in current.items():
            dist = plts.step(state, action)
            if dist is None:
                continue
            for target, prob in dist.items():
                nxt[target] = nxt.get(target, Fraction(0)) + mass * prob
        current = nxt
        if not current:
            return Fraction(0)
    return sum(current.values(), Fraction(0))


Config = tuple[StateId, int]


class PrefixEvaluator:
    """Observable-prefix probabilities of one automaton on one input sequence.

    A configuration ``(state, k)`` is a hidden-disabled state with ``k``
    inputs consumed. :meth:`settle` pushes mass through hidden closures and
    unobservable data inputs until each configuration is about to emit an
    observable action; :meth:`advance` then matches one observable action.
    """

    def __init__(self, aut: Automaton, inputs: Sequence[ActionId]):
        self.plts = aut.plts
        self.aut = aut
        self.inputs = tuple(inputs)
        _check_ids(self.plts, self.inputs)
        self._settled: dict[Config, dict[Config, Fraction]] = {}

    def _settle_one(self, state: StateId, k: int) -> dict[Config, Fraction]:
        key = (state, k)
        cached = self._settled.get(key)
        if cached is not None:
            return cached
        plts = self.plts
        result: dict[Config, Fraction] = {}
        if plts.hidden_step(state) is not None:
            # nontermination mass emits nothing and is dropped
            for target, prob in state_closure(plts, state).states().items():
                _accumulate(result, self._settle_one(target, k), prob)
        elif plts.output_step(state) is not None:
            result[key] = Fraction(1)
        elif plts.outgoing(state) and k < len(self.inputs):
            action = self.inputs[k]
            if plts.kind(action) is ActionKind.QUERY:
                result[key] = Fraction(1)
            else:
                dist = plts.step(state, action)
                if dist is not None:
                    for target, prob in dist.items():
                        _accumulate(result, self._settle_one(target, k + 1), prob)
        self._settled[key] = result
        return result

    def settle(self, configs: dict[Config, Fraction]) -> dict[Config, Fraction]:
        out: dict[Config, Fraction] = {}
        for (state, k), mass in configs.items():
            _accumulate(out, self._settle_one(state, k), mass)
        return out

    def start(self) -> dict[Config, Fraction]:
        return self.settle({(self.aut.initial, 0): Fraction(1)})

    def advance(self, ready: dict[Config, Fraction], action: ActionId) -> dict[Config, Fraction]:
        """Mass that emits ``action`` next; the result is not yet settled."""
        plts = self.plts
        out: dict[Config, Fraction] = {}
        for (state, k), mass in ready.items():
            out_step = plts.output_step(state)
            if out_step is not None:
                emitted, dist = out_step
                if emitted != action:
                    continue
                nxt_k = k
            else:
                if self.inputs[k] != action:
                    continue
                dist = plts.step(state, action)
                nxt_k = k + 1
            for target, prob in dist.items():
                cfg = (target, nxt_k)
                out[cfg] = out.get(cfg, Fraction(0)) + mass * prob
        return out

    def prob(self, obs: Sequence[ActionId]) -> Fraction:
        configs = {(self.aut.initial, 0): Fraction(1)}
        for action in obs:
            configs = self.advance(self.settle(configs), action)
            if not configs:
                return Fraction(0)
        return sum(configs.values(), Fraction(0))


def _accumulate(target: dict, source: dict, scale: Fraction) -> None:
    for key, val in source.items():
        target[key] = target.get(key, Fraction(0)) + scale * val


def observable_prefix_prob(aut: Automaton, inputs: Sequence[ActionId],
                           obs: Sequence[ActionId]) -> Fraction:
    """Probability that the query/response projection of a run starts with ``obs``."""
    plts = aut.plts
    _check_ids(plts, obs)
    for action in obs:
        if not plts.kind(action).is_observable:
            raise ValueError(f"{action!r} is not observable")
    return PrefixEvaluator(aut, inputs).prob(obs)


def neighbors_one(inputs: Sequence[ActionId], domain: Iterable[ActionId]) -> set[tuple]:
    """Every sequence obtained by inserting one data point from ``domain``."""
    base = tuple(inputs)
    out = set()
    for d in domain:
        for pos in range(len(base) + 1):
            out.add(base[:pos] + (d,) + base[pos:])
    return out


def neighbors(inputs: Sequence[ActionId], domain: Iterable[ActionId], count: int) -> set[tuple]:
    """Sequences reachable by exactly ``count`` data-point insertions."""
    domain = list(domain)
    layer = {tuple(inputs)}
    for _ in range(count):
        layer = set().union(*(neighbors_one(seq, domain) for seq in layer))
    return layer


@dataclass(frozen=True)
class DniWitness:
    inputs_a: tuple[ActionId, ...]
    inputs_b: tuple[ActionId, ...]
    obs: tuple[ActionId, ...]
    prob_a: Fraction
    prob_b: Fraction


@dataclass(frozen=True)
class DniReport:
    passed: bool
    max_ratio: Fraction | float
    witness: DniWitness | None
    evaluations: int


def _ratio(a: Fraction, b: Fraction) -> Fraction | float:
    if a == b:
        return Fraction(1)
    if a == 0 or b == 0:
        return math.inf
    return max(a / b, b / a)


def compare_input_pairs(aut: Automaton, pairs: Iterable[tuple[Sequence, Sequence]],
                        max_obs_len: int, max_evaluations: int | None = None):
    """Largest prefix-probability ratio over the given input pairs.

    Observable prefixes up to ``max_obs_len`` are enumerated as a tree; a
    branch is cut once both probabilities hit zero, which is safe because
    prefix probabilities only shrink as the prefix grows.

    Returns:
        ``(max_ratio, witness, evaluations)``; the witness is the first
        prefix (in sorted enumeration order) attaining the maximum.
    """
    cap = default_evaluation_cap() if max_evaluations is None else max_evaluations
    observables = aut.plts.observable_actions
    evaluators: dict[tuple, PrefixEvaluator] = {}

    def evaluator(seq: tuple) -> PrefixEvaluator:
        if seq not in evaluators:
            evaluators[seq] = PrefixEvaluator(aut, seq)
        return evaluators[seq]

    best: Fraction | float = Fraction(1)
    witness = None
    evaluations = 0
    for seq_a, seq_b in pairs:
        seq_a, seq_b = tuple(seq_a), tuple(seq_b)
        ev_a, ev_b = evaluator(seq_a), evaluator(seq_b)
        stack = [((), {(aut.initial, 0): Fraction(1)}, {(aut.initial, 0): Fraction(1)})]
        while stack:
            prefix, conf_a, conf_b = stack.pop()
            if prefix:
                evaluations += 1
                if evaluations > cap:
                    raise EnumerationLimitExceeded(
                        f"more than {cap} (pair, prefix) evaluations; raise {CAP_ENV_VAR}")
                prob_a = sum(conf_a.values(), Fraction(0))
                prob_b = sum(conf_b.values(), Fraction(0))
                if prob_a == 0 and prob_b == 0:
                    continue
                ratio = _ratio(prob_a, prob_b)
                if ratio > best or witness is None and ratio == best:
                    best = ratio
                    witness = DniWitness(seq_a, seq_b, prefix, prob_a, prob_b)
            if len(prefix) >= max_obs_len:
                continue
            ready_a, ready_b = ev_a.settle(conf_a), ev_b.settle(conf_b)
            for action in reversed(observables):
                stack.append((prefix + (action,), ev_a.advance(ready_a, action),
                              ev_b.advance(ready_b, action)))
    return best, witness, evaluations


def dni_check_bruteforce(aut: Automaton, rho, max_input_len: int, max_obs_len: int,
                         max_evaluations: int | None = None) -> DniReport:
    """Check the two-sided ``rho`` bound on every one-insertion input pair.

    Input sequences range over all data and query actions with length at most
    ``max_input_len`` (the longer side of each pair included).

    Raises:
        EnumerationLimitExceeded: when the pair/prefix count passes the cap.
    """
    rho = Fraction(rho)
    plts = aut.plts
    alphabet = plts.input_actions
    domain = plts.data_actions

    def pairs():
        for length in range(max_input_len):
            for base in itertools.product(alphabet, repeat=length):
                for other in sorted(neighbors_one(base, domain)):
                    yield base, other

    best, witness, evaluations = compare_input_pairs(aut, pairs(), max_obs_len, max_evaluations)
    return DniReport(best <= rho, best, witness, evaluations)
