import random
from fractions import Fraction as F

import pytest
from helpers import all_sequences, automaton, random_automaton, recursive_prefix_prob
from hypothesis import given, settings
from hypothesis import strategies as st

from dnicheck.errors import EnumerationLimitExceeded, UnknownActionError
from dnicheck.mechanisms import count_function, tg_pmf
from dnicheck.model import ActionKind
from dnicheck.pinq import Ex1Params, build_mex1
from dnicheck.semantics import (
    CAP_ENV_VAR,
    compare_input_pairs,
    dni_check_bruteforce,
    neighbors,
    neighbors_one,
    observable_prefix_prob,
    trace_prefix_prob,
)

D, Q, R, H = ActionKind.DATA, ActionKind.QUERY, ActionKind.RESPONSE, ActionKind.HIDDEN


def _tau_fork():
    return automaton({"tau": H, "r": R}, "s0", {
        ("s0", "tau"): {"s1": F(1, 2), "s2": F(1, 2)},
        ("s1", "r"): {"s3": 1},
    })


def _echo():
    """Answers every query with the last data point seen (or r0 before any)."""
    kinds = {"d0": D, "d1": D, "q": Q, "r0": R, "r1": R}
    return automaton(kinds, "w0", {
        ("w0", "d0"): {"w0": 1}, ("w0", "d1"): {"w1": 1}, ("w0", "q"): {"o0": 1},
        ("w1", "d0"): {"w0": 1}, ("w1", "d1"): {"w1": 1}, ("w1", "q"): {"o1": 1},
        ("o0", "r0"): {"w0": 1}, ("o1", "r1"): {"w1": 1},
    })


def _ignorer():
    kinds = {"d0": D, "d1": D, "q": Q, "r0": R, "r1": R}
    return automaton(kinds, "w", {
        ("w", "d0"): {"w": 1}, ("w", "d1"): {"w": 1},
        ("w", "q"): {"o0": F(1, 3), "o1": F(2, 3)},
        ("o0", "r0"): {"w": 1}, ("o1", "r1"): {"w": 1},
    })


def _ex1(t=1, v=1, cap=1, p=F(1, 2)):
    return Ex1Params(t, v, (1,), {"count": count_function(cap, p)})


class TestTracePrefixProb:
    def test_empty_trace(self):
        assert trace_prefix_prob(_tau_fork(), [], []) == 1

    def test_dirac_data(self):
        aut = automaton({"d": D}, "s0", {("s0", "d"): {"s1": 1}})
        assert trace_prefix_prob(aut, ["d"], ["d"]) == 1

    def test_hidden_then_response(self):
        assert trace_prefix_prob(_tau_fork(), [], ["tau", "r"]) == F(1, 2)

    def test_input_must_match_head(self):
        assert trace_prefix_prob(_echo(), ["d0"], ["d1"]) == 0
        assert trace_prefix_prob(_echo(), ["d1", "q"], ["d1", "q", "r0"]) == 0
        assert trace_prefix_prob(_echo(), ["d1", "q"], ["d1", "q", "r1"]) == 1

    def test_unknown_action(self):
        with pytest.raises(UnknownActionError):
            trace_prefix_prob(_echo(), ["zz"], [])


class TestObservablePrefixProb:
    def test_empty(self):
        assert observable_prefix_prob(_echo(), ["d1"], []) == 1

    def test_echo(self):
        assert observable_prefix_prob(_echo(), ["q"], ["q", "r0"]) == 1
        assert observable_prefix_prob(_echo(), ["d1", "q"], ["q", "r1"]) == 1
        assert observable_prefix_prob(_echo(), ["d1", "q"], ["q", "r0"]) == 0

    def test_data_not_observable(self):
        with pytest.raises(ValueError):
            observable_prefix_prob(_echo(), ["d1"], ["d1"])

    def test_ex1_matches_count_pmf(self):
        params = _ex1()
        aut = build_mex1(params)
        mech = params.mechanisms["count"]
        for r in range(0, 3):
            expected = tg_pmf(mech.params((1,)), r - 1)
            assert observable_prefix_prob(aut, ["d:1", "q:count"], ["q:count", f"r:{r}"]) == expected

    def test_leading_hidden_segment(self):
        assert observable_prefix_prob(_tau_fork(), [], ["r"]) == F(1, 2)


class TestNeighbors:
    def test_one_query(self):
        assert neighbors_one(["q"], {"d"}) == {("d", "q"), ("q", "d")}

    def test_empty(self):
        assert neighbors_one([], {"d1", "d2"}) == {("d1",), ("d2",)}

    def test_three_slots(self):
        assert neighbors_one(["d1", "q1"], {"d2"}) == {
            ("d2", "d1", "q1"), ("d1", "d2", "q1"), ("d1", "q1", "d2")}

    def test_duplicate_insertions_collapse(self):
        assert neighbors_one(["d"], {"d"}) == {("d", "d")}

    def test_two_insertions(self):
        assert neighbors([], {"d"}, 2) == {("d", "d")}


class TestDniBruteforce:
    def test_ignorer_passes_at_one(self):
        report = dni_check_bruteforce(_ignorer(), 1, 3, 4)
        assert report.passed and report.max_ratio == 1

    def test_echo_fails_everywhere(self):
        report = dni_check_bruteforce(_echo(), 2**40, 2, 2)
        assert not report.passed and report.max_ratio == float("inf")
        w = report.witness
        assert {w.prob_a, w.prob_b} == {0, 1}
        assert w.obs[0] == "q" and len(w.obs) == 2

    def test_ex1_passes_at_square(self):
        params = _ex1()
        aut = build_mex1(params)
        report = dni_check_bruteforce(aut, params.rho_q ** 2, 3, 4)
        assert report.passed and report.max_ratio <= 4

    def test_cap(self, monkeypatch):
        monkeypatch.setenv(CAP_ENV_VAR, "5")
        with pytest.raises(EnumerationLimitExceeded):
            dni_check_bruteforce(_ignorer(), 1, 3, 4)
        with pytest.raises(EnumerationLimitExceeded):
            dni_check_bruteforce(_ignorer(), 1, 3, 4, max_evaluations=3)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_agrees_with_recursive_oracle(seed):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 6))
    inputs = [rng.choice(["d0", "d1", "q"]) for _ in range(rng.randint(0, 3))]
    for obs in all_sequences(["q", "r0", "r1"], 3):
        assert observable_prefix_prob(aut, inputs, obs) == recursive_prefix_prob(aut, inputs, obs)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_bounds_and_antitone(seed):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 6))
    inputs = [rng.choice(["d0", "d1", "q"]) for _ in range(rng.randint(0, 3))]
    for obs in all_sequences(["q", "r0", "r1"], 3):
        prob = observable_prefix_prob(aut, inputs, obs)
        assert 0 <= prob <= 1
        if obs:
            assert observable_prefix_prob(aut, inputs, obs[:-1]) >= prob


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 3))
def test_exact_length_partition_at_most_one(seed, k):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 6))
    inputs = [rng.choice(["d0", "d1", "q"]) for _ in range(3)]
    total = sum(observable_prefix_prob(aut, inputs, obs)
                for obs in all_sequences(["q", "r0", "r1"], k) if len(obs) == k)
    assert total <= 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_trace_prob_in_unit_interval(seed):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 5))
    inputs = [rng.choice(["d0", "d1", "q"]) for _ in range(2)]
    actions = ["d0", "d1", "q", "r0", "r1", "h0", "h1"]
    for trace in all_sequences(actions, 3):
        assert 0 <= trace_prefix_prob(aut, inputs, trace) <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_mismatched_input_gives_zero(seed):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 5))
    assert trace_prefix_prob(aut, ["d0"], ["d1"]) == 0
    assert trace_prefix_prob(aut, [], ["q"]) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_rho_one_iff_identical(seed):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 5))
    report = dni_check_bruteforce(aut, 1, 2, 3)
    identical = True
    for length in range(2):
        for base in all_sequences(["d0", "d1", "q"], length):
            if len(base) != length:
                continue
            for other in neighbors_one(base, ["d0", "d1"]):
                for obs in all_sequences(["q", "r0", "r1"], 3):
                    if observable_prefix_prob(aut, base, obs) != observable_prefix_prob(aut, other, obs):
                        identical = False
    assert report.passed == identical


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_n_fold_composition(seed):
    rng = random.Random(seed)
    aut = random_automaton(rng, rng.randint(2, 5))
    # bases up to length 2 cover both steps of every two-insertion pair below
    one = dni_check_bruteforce(aut, 1, 3, 3)
    if one.max_ratio == float("inf"):
        return
    pairs = [(base, other) for base in all_sequences(["d0", "d1", "q"], 1)
             for other in neighbors(base, ["d0", "d1"], 2)]
    two, _, _ = compare_input_pairs(aut, pairs, 3)
    assert two <= one.max_ratio ** 2
