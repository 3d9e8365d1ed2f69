"""Truncated geometric noise, the COUNT/SUM sanitizers and function-level DP checks."""

from __future__ import annotations

import functools
import math
import random
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .closure import hidden_closure
from .model import ActionKind, Automaton, Distribution, Plts, as_fraction


@dataclass(frozen=True)
class TruncatedGeomParams:
    """Noise with magnitude bound ``m``, true value ``center`` and decay ``p``."""

    m: int
    center: int
    p: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        if self.m < 1:
            raise ValueError("m must be positive")
        if not -self.m <= self.center <= self.m:
            raise ValueError(f"center {self.center} outside [-{self.m}, {self.m}]")
        if not 0 <= self.p < 1:
            raise ValueError("p must lie in [0, 1)")

    @property
    def noise_range(self) -> range:
        return range(-self.m - self.center, self.m - self.center + 1)


def tg_pmf(params: TruncatedGeomParams, n: int) -> Fraction:
    """Probability that the noise equals ``n``.

    The two endpoints of the output range carry weight ``p^|n| / (1+p)``;
    interior outputs carry ``p^|n| (1-p) / (1+p)``.
    """
    m, t, p = params.m, params.center, params.p
    out = t + n
    # Fraction(0) ** 0 == 1, as the formula needs at n == 0
    if abs(out) == m:
        return p ** abs(n) / (1 + p)
    if -m < out < m:
        return p ** abs(n) * (1 - p) / (1 + p)
    return Fraction(0)


def tg_distribution(params: TruncatedGeomParams) -> dict[int, Fraction]:
    out = {}
    for n in params.noise_range:
        prob = tg_pmf(params, n)
        if prob:
            out[n] = prob
    return out


class CoinSource:
    """Seeded source of exact-rational Bernoulli draws.

    ``flip(num, den)`` is true with probability exactly ``num/den``.
    """

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed)

    def flip(self, num: int, den: int) -> bool:
        return self._rng.randrange(den) < num

    def flip_fraction(self, prob: Fraction) -> bool:
        return self.flip(prob.numerator, prob.denominator)

    def split(self) -> "CoinSource":
        """An independent child stream, deterministic given this stream's state."""
        return CoinSource(self._rng.getrandbits(64))


@dataclass(frozen=True)
class SamplingPlan:
    """Every coin bias the geometric walk can use, for one parameter set.

    ``mirror`` marks the ``center == -m`` case, which is sampled as the
    negation of ``center == m``; ``degenerate`` marks ``p == 0``.
    """

    negative_branch: Fraction
    negative_boundary: Fraction
    negative_loop: tuple[Fraction, ...]
    positive_boundary: Fraction
    positive_loop: tuple[Fraction, ...]
    m: int
    center: int
    mirror: bool = False
    degenerate: bool = False


def _loop_biases(first: Fraction, p: Fraction, length: int) -> tuple[Fraction, ...]:
    biases = []
    q = first
    for _ in range(length):
        if not 0 <= q <= 1:
            raise ArithmeticError(f"loop bias {q} is not a probability")
        biases.append(q)
        if q == 1:
            break
        q = p * q / (1 - q)
    return tuple(biases)


def listing_negative_first_bias(m: int, center: int, p: Fraction) -> Fraction:
    """The first negative-branch bias exactly as the published listing writes it.

    Kept for regression tests: it overshoots the correct value by ``1/p``.
    """
    return (p - 1) / (p ** (m + center) - p)


@functools.lru_cache(maxsize=256)
def sampling_plan(params: TruncatedGeomParams) -> SamplingPlan:
    m, t, p = params.m, params.center, params.p
    if p == 0:
        return SamplingPlan(Fraction(0), Fraction(1), (), Fraction(1), (), m, t, degenerate=True)
    if t == -m:
        mirrored = sampling_plan(TruncatedGeomParams(m, m, p))
        return SamplingPlan(**{**mirrored.__dict__, "center": t, "mirror": True})
    neg_boundary = p ** (m + t - 1)
    neg_loop_len = max(m + t - 2, 0)  # n = -1 down to -m-t+2
    neg_first = (1 - p) / (1 - neg_boundary) if neg_boundary != 1 else Fraction(0)
    pos_boundary = p ** (m - t)
    pos_loop_len = max(m - t - 1, 0)  # n = 0 up to m-t-2
    pos_first = (p - 1) * p ** t / (p ** m - p ** t) if pos_boundary != 1 else Fraction(0)
    return SamplingPlan(
        negative_branch=p / (1 + p),
        negative_boundary=neg_boundary,
        negative_loop=_loop_biases(neg_first, p, neg_loop_len),
        positive_boundary=pos_boundary,
        positive_loop=_loop_biases(pos_first, p, pos_loop_len),
        m=m,
        center=t,
    )


def _walk(plan: SamplingPlan, coins: CoinSource) -> tuple[int, int]:
    m, t = plan.m, plan.center
    if plan.mirror:
        t = -t
    flips = 1
    if coins.flip_fraction(plan.negative_branch):
        flips += 1
        if coins.flip_fraction(plan.negative_boundary):
            n = -m - t
        else:
            n = -m - t + 1
            for step, q in enumerate(plan.negative_loop):
                flips += 1
                if coins.flip_fraction(q):
                    n = -1 - step
                    break
    else:
        flips += 1
        if coins.flip_fraction(plan.positive_boundary):
            n = m - t
        else:
            n = m - t - 1
            for step, q in enumerate(plan.positive_loop):
                flips += 1
                if coins.flip_fraction(q):
                    n = step
                    break
    return (-n if plan.mirror else n), flips


def tg_sample_counted(params: TruncatedGeomParams, coins: CoinSource) -> tuple[int, int]:
    """One noise draw plus the number of coin flips it consumed."""
    plan = sampling_plan(params)
    if plan.degenerate:
        return 0, 0
    return _walk(plan, coins)


def tg_sample(params: TruncatedGeomParams, coins: CoinSource) -> int:
    return tg_sample_counted(params, coins)[0]


def tg_automaton(params: TruncatedGeomParams, offset: int = 0) -> Automaton:
    """The sampler's coin-flip walk as a hidden-step automaton.

    Terminal states are ``ret:<offset + n>`` for each reachable noise value
    ``n``; their hidden closure from ``start`` is the noise distribution.
    """
    plan = sampling_plan(params)
    sign = -1 if plan.mirror else 1
    m, t = plan.m, -plan.center if plan.mirror else plan.center

    def ret(n: int) -> str:
        return f"ret:{offset + sign * n}"

    edges: dict[str, dict[str, Fraction]] = {}
    if plan.degenerate:
        edges["start"] = {ret(0): Fraction(1)}
    else:
        edges["start"] = {"neg": plan.negative_branch, "pos": 1 - plan.negative_branch}
        for side, boundary, loop, exit_value, boundary_value, value_of in (
            ("neg", plan.negative_boundary, plan.negative_loop, -m - t + 1, -m - t,
             lambda step: -1 - step),
            ("pos", plan.positive_boundary, plan.positive_loop, m - t - 1, m - t,
             lambda step: step),
        ):
            def loop_state(step: int) -> str:
                return f"{side}@{step}" if step < len(loop) else ret(exit_value)

            edges[side] = {ret(boundary_value): boundary, loop_state(0): 1 - boundary}
            for step, q in enumerate(loop):
                edges[f"{side}@{step}"] = {ret(value_of(step)): q, loop_state(step + 1): 1 - q}
    states = set(edges)
    for targets in edges.values():
        states.update(s for s, prob in targets.items() if prob)
    transitions = {(s, "flip"): Distribution(targets) for s, targets in edges.items()
                   if any(targets.values())}
    plts = Plts(states, {"flip": ActionKind.HIDDEN}, transitions)
    return Automaton(plts, "start")


@dataclass(frozen=True)
class DpReport:
    ok: bool
    worst_ratio: Fraction | float
    rho: Fraction
    witness: tuple | None = None


def _ratio(a: Fraction, b: Fraction) -> Fraction | float:
    if a == b:
        return Fraction(1)
    if a == 0 or b == 0:
        return math.inf
    return max(a / b, b / a)


def tg_dp_check(m: int, p, sensitivity: int, rho=None) -> DpReport:
    """Exhaustive ratio scan over centers at distance at most ``sensitivity``.

    ``rho`` defaults to ``p ** -sensitivity``. The witness is
    ``(center1, center2, output)`` at the worst ratio.
    """
    p = as_fraction(p)
    if rho is None:
        if p == 0 and sensitivity > 0:
            raise ValueError("p = 0 gives no finite ratio bound for positive sensitivity")
        rho = p ** -sensitivity if sensitivity else Fraction(1)
    rho = as_fraction(rho)
    worst: Fraction | float = Fraction(1)
    witness = None
    for t1 in range(-m, m + 1):
        pmf1 = TruncatedGeomParams(m, t1, p)
        for t2 in range(max(-m, t1 - sensitivity), min(m, t1 + sensitivity) + 1):
            pmf2 = TruncatedGeomParams(m, t2, p)
            for r in range(-m, m + 1):
                ratio = _ratio(tg_pmf(pmf1, r - t1), tg_pmf(pmf2, r - t2))
                if ratio > worst:
                    worst, witness = ratio, (t1, t2, r)
    return DpReport(worst <= rho, worst, rho, witness)


@dataclass(frozen=True)
class TailReport:
    tail_mass: Fraction
    bound: Fraction
    ok: bool


def tg_tail_check(params: TruncatedGeomParams, b: int) -> TailReport:
    """Exact ``Pr[|noise| >= b]`` against the bound ``2 p^b / (1+p)``."""
    if b < 1:
        raise ValueError("b must be positive")
    tail = sum((tg_pmf(params, n) for n in params.noise_range if abs(n) >= b), Fraction(0))
    bound = 2 * params.p ** b / (1 + params.p)
    return TailReport(tail, bound, tail <= bound)


Database = Sequence


@dataclass(frozen=True)
class SanitizationFunction:
    """A statistic released through truncated geometric noise.

    The response is ``statistic(db) + noise`` with noise drawn around the
    center ``statistic(db) - shift``, so responses lie in
    ``[shift - m, shift + m]``.
    """

    name: str
    statistic: Callable[[Database], int]
    sensitivity: int
    m: int
    p: Fraction
    shift: int = 0
    validate: Callable[[Database], None] | None = None

    def params(self, db: Database) -> TruncatedGeomParams:
        if self.validate is not None:
            self.validate(db)
        return TruncatedGeomParams(self.m, self.statistic(db) - self.shift, self.p)

    def distribution(self, db: Database) -> dict[int, Fraction]:
        value = self.statistic(db)
        return {value + n: prob for n, prob in tg_distribution(self.params(db)).items()}

    @property
    def rho(self) -> Fraction:
        if self.p == 0:
            raise ValueError("p = 0 gives no finite ratio bound")
        return Fraction(1) / self.p ** self.sensitivity

    def subroutine(self, db: Database) -> Automaton:
        return tg_automaton(self.params(db), offset=self.statistic(db))


@dataclass(frozen=True)
class TableFunction:
    """An arbitrary finite mechanism; used for negative controls."""

    name: str
    table: Callable[[Database], Mapping[int, Fraction]]
    rho: Fraction

    def distribution(self, db: Database) -> dict[int, Fraction]:
        return {r: as_fraction(v) for r, v in self.table(db).items() if v}

    def subroutine(self, db: Database) -> Automaton:
        return function_to_automaton(self.distribution, db, terminal="ret")


def _capacity_guard(capacity: int):
    def check(db):
        if len(db) > capacity:
            raise ValueError(f"database of size {len(db)} exceeds capacity {capacity}")
    return check


def count_function(capacity: int, p, name: str = "count") -> SanitizationFunction:
    shift = (capacity + 1) // 2
    return SanitizationFunction(name, len, 1, shift, as_fraction(p), shift,
                                _capacity_guard(capacity))


def sum_function(capacity: int, p, name: str = "sum") -> SanitizationFunction:
    guard = _capacity_guard(capacity)

    def check(db):
        guard(db)
        for x in db:
            if not -100 <= x <= 100:
                raise ValueError(f"data point {x} outside [-100, 100]")

    return SanitizationFunction(name, sum, 100, 100 * capacity, as_fraction(p), 0, check)


def count_mechanism(db: Database, capacity: int, p) -> dict[int, Fraction]:
    """Response distribution of noisy COUNT, supported on ``[0, 2*ceil(capacity/2)]``."""
    return count_function(capacity, p).distribution(db)


def sum_mechanism(db: Database, capacity: int, p) -> dict[int, Fraction]:
    """Response distribution of noisy SUM over data points in ``[-100, 100]``."""
    return sum_function(capacity, p).distribution(db)


def function_to_automaton(mech: Callable[[Database], Mapping], db: Database,
                          terminal: str = "xi") -> Automaton:
    """One hidden step from ``init`` to a terminal ``<terminal>:<r>`` per output."""
    dist = {f"{terminal}:{r}": as_fraction(prob) for r, prob in mech(db).items() if prob}
    plts = Plts({"init", *dist}, {"compute": ActionKind.HIDDEN},
                {("init", "compute"): Distribution(dist)})
    return Automaton(plts, "init")


def output_distribution(mech, db: Database) -> dict[str, Fraction]:
    """Closure of ``function_to_automaton`` keyed by output label."""
    aut = function_to_automaton(mech, db)
    nu = hidden_closure(aut.plts, {aut.initial: Fraction(1)})
    if nu.bottom:
        raise ArithmeticError("mechanism automaton does not terminate")
    return {state.split(":", 1)[1]: prob for state, prob in nu.states().items()}


def check_function_dp(mech, databases: Iterable[Database],
                      neighbor_pairs: Iterable[tuple[Database, Database]], rho) -> DpReport:
    """Two-sided ratio check of output closures over each neighbouring pair.

    The witness is ``(db1, db2, output, prob1, prob2)`` at the worst ratio.
    """
    rho = as_fraction(rho)
    cache: dict = {}
    for db in databases:
        cache[tuple(db)] = output_distribution(mech, db)
    worst: Fraction | float = Fraction(1)
    witness = None
    for db1, db2 in neighbor_pairs:
        for key in (tuple(db1), tuple(db2)):
            if key not in cache:
                cache[key] = output_distribution(mech, key)
        nu1, nu2 = cache[tuple(db1)], cache[tuple(db2)]
        for r in sorted(set(nu1) | set(nu2)):
            a, b = nu1.get(r, Fraction(0)), nu2.get(r, Fraction(0))
            ratio = _ratio(a, b)
            if ratio > worst:
                worst, witness = ratio, (tuple(db1), tuple(db2), r, a, b)
    return DpReport(worst <= rho, worst, rho, witness)


def multisets(domain: Sequence, max_size: int) -> list[tuple]:
    """All sorted multisets over ``domain`` with at most ``max_size`` elements."""
    from itertools import combinations_with_replacement

    out = []
    for size in range(max_size + 1):
        out.extend(combinations_with_replacement(sorted(domain), size))
    return out


def insertion_pairs(databases: Iterable[tuple], domain: Sequence) -> list[tuple[tuple, tuple]]:
    """Pairs ``(B, B + {x})`` with both sides in ``databases``."""
    known = {tuple(sorted(db)) for db in databases}
    pairs = []
    for db in sorted(known):
        for x in sorted(set(domain)):
            bigger = tuple(sorted(db + (x,)))
            if bigger in known:
                pairs.append((db, bigger))
    return pairs


def _exp_bounds(x: Fraction, tolerance: Fraction) -> tuple[Fraction, Fraction]:
    """Rational ``lo <= e^x <= hi`` for ``x >= 0`` with ``hi - lo <= tolerance``."""
    term = Fraction(1)
    total = Fraction(1)
    k = 0
    growth = 3 ** math.ceil(x)  # e^x <= 3^ceil(x) bounds the Taylor remainder
    while True:
        k += 1
        term = term * x / k
        total += term
        remainder = term * x / (k + 1) * growth
        if remainder <= tolerance and k > x:
            return total, total + remainder


def ratio_from_epsilon(epsilon, denominator: int = 10**6) -> Fraction:
    """Largest ``j/denominator`` not exceeding ``e^epsilon``; rounding makes the check stricter."""
    eps = Fraction(str(epsilon)) if not isinstance(epsilon, Fraction) else epsilon
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    lo, _ = _exp_bounds(eps, Fraction(1, 100 * denominator))
    return max(Fraction(math.floor(lo * denominator), denominator), Fraction(1))


def noise_p_from_epsilon(epsilon, sensitivity: int = 1, denominator: int = 10**6) -> Fraction:
    """Largest ``j/denominator`` not exceeding ``e^(-epsilon/sensitivity)``: more noise, never less."""
    eps = Fraction(str(epsilon)) if not isinstance(epsilon, Fraction) else epsilon
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    _, hi = _exp_bounds(eps / sensitivity, Fraction(1, 100 * denominator))
    return Fraction(math.floor(denominator / hi), denominator)
