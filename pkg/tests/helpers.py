"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from dnicheck.closure import state_closure
from dnicheck.model import ActionKind, Automaton, Distribution, Plts

F = Fraction

DATA = ("d0", "d1")
QUERIES = ("q",)
RESPONSES = ("r0", "r1")
HIDDEN = ("h0", "h1")
KINDS = {
    **{a: ActionKind.DATA for a in DATA},
    **{a: ActionKind.QUERY for a in QUERIES},
    **{a: ActionKind.RESPONSE for a in RESPONSES},
    **{a: ActionKind.HIDDEN for a in HIDDEN},
}


def hidden_plts(edges: dict[str, dict[str, Fraction]]) -> Plts:
    """Every listed edge set becomes one ``tau`` transition."""
    states = set(edges)
    for targets in edges.values():
        states.update(targets)
    transitions = {(s, "tau"): Distribution(t) for s, t in edges.items()}
    return Plts(states, {"tau": ActionKind.HIDDEN}, transitions)


def automaton(kinds: dict[str, ActionKind], initial: str,
              transitions: dict[tuple[str, str], dict[str, Fraction]]) -> Automaton:
    states = {initial}
    for (s, _), targets in transitions.items():
        states.add(s)
        states.update(targets)
    plts = Plts(states, kinds, {k: Distribution(v) for k, v in transitions.items()})
    return Automaton(plts, initial)


_PROBS = [F(1, 2), F(1, 3), F(1, 4), F(2, 3), F(3, 4), F(1, 5)]


def _random_dist(rng: random.Random, states: list[str]) -> dict[str, Fraction]:
    size = rng.choice([1, 1, 2, 3])
    targets = rng.sample(states, min(size, len(states)))
    if len(targets) == 1:
        return {targets[0]: F(1)}
    weights = [rng.randint(1, 4) for _ in targets]
    total = sum(weights)
    return {t: F(w, total) for t, w in zip(targets, weights)}


def random_automaton(rng: random.Random, n_states: int = 5, hidden_bias: float = 0.25) -> Automaton:
    """A random PLTS satisfying all three axioms by construction."""
    states = [f"s{i}" for i in range(n_states)]
    transitions = {}
    for s in states:
        roll = rng.random()
        if roll < 0.45:
            for a in DATA + QUERIES:
                transitions[(s, a)] = _random_dist(rng, states)
        elif roll < 0.45 + hidden_bias:
            transitions[(s, rng.choice(HIDDEN))] = _random_dist(rng, states)
        elif roll < 0.95:
            transitions[(s, rng.choice(RESPONSES))] = _random_dist(rng, states)
    plts = Plts(states, KINDS, {k: Distribution(v) for k, v in transitions.items()})
    return Automaton(plts, states[0])


def recursive_prefix_prob(aut: Automaton, inputs, obs) -> Fraction:
    """Observable-prefix probability by direct recursion over (state, inputs used, obs matched).

    Written independently of the forward evaluator used by the library.
    """
    plts = aut.plts
    inputs, obs = tuple(inputs), tuple(obs)
    memo = {}

    def prob(state, k, j):
        if j == len(obs):
            return F(1)
        key = (state, k, j)
        if key in memo:
            return memo[key]
        hidden = plts.hidden_step(state)
        if hidden is not None:
            nu = state_closure(plts, state)
            value = sum((p * prob(x, k, j) for x, p in nu.states().items()), F(0))
        elif plts.output_step(state) is not None:
            action, dist = plts.output_step(state)
            value = F(0)
            if action == obs[j]:
                value = sum((p * prob(x, k, j + 1) for x, p in dist.items()), F(0))
        elif not plts.outgoing(state) or k == len(inputs):
            value = F(0)
        else:
            action = inputs[k]
            dist = plts.step(state, action)
            if plts.kind(action) is ActionKind.DATA:
                value = sum((p * prob(x, k + 1, j) for x, p in dist.items()), F(0))
            elif action != obs[j]:
                value = F(0)
            else:
                value = sum((p * prob(x, k + 1, j + 1) for x, p in dist.items()), F(0))
        memo[key] = value
        return value

    return prob(aut.initial, 0, 0)


def brute_force_lifting(rel, rho, nu1, nu2) -> bool:
    """Try every bijection between the supports."""
    left, right = sorted(nu1), sorted(nu2)
    if len(left) != len(right):
        return False
    rho = F(rho)
    for perm in itertools.permutations(right):
        if all((x, y) in rel and nu1[x] <= rho * nu2[y] and nu2[y] <= rho * nu1[x]
               for x, y in zip(left, perm)):
            return True
    return False


def all_sequences(alphabet, max_len):
    for length in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=length)
