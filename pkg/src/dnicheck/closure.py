"""Extended transitions: hidden-step closure via absorbing Markov chains."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .errors import SingularSystemError
from .model import BOTTOM, ActionId, Plts, StateId, SubDistribution

Matrix = list[list[Fraction]]


@dataclass(frozen=True)
class AbsorbingChain:
    """Canonical-form chain: transient rows of ``[q | r]`` each sum to one."""

    transient: Sequence[StateId]
    absorbing: Sequence[StateId]
    q: Matrix
    r: Matrix

    def __post_init__(self):
        n, k = len(self.transient), len(self.absorbing)
        if len(self.q) != n or len(self.r) != n:
            raise ValueError("row count must match the transient states")
        for i in range(n):
            if len(self.q[i]) != n or len(self.r[i]) != k:
                raise ValueError(f"row {i} has the wrong width")
            if sum(self.q[i]) + sum(self.r[i]) != 1:
                raise ValueError(f"row {i} of the chain does not sum to 1")


def _strong_components(n: int, succ: list[list[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Components come out sinks first."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                component = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    component.append(w)
                    if w == v:
                        break
                components.append(sorted(component))
    return components


def _solve_block(block: list[int], q_rows, rhs: dict[int, dict[int, Fraction]]):
    """Solve the (I - Q) X = B subsystem restricted to one strong component.

    ``rhs`` already folds in the contributions of components solved earlier.
    Plain Gauss-Jordan over rationals on dense rows of the block.
    """
    pos = {v: i for i, v in enumerate(block)}
    size = len(block)
    columns = sorted({c for v in block for c in rhs[v]})
    col_pos = {c: j for j, c in enumerate(columns)}
    width = size + len(columns)
    rows = []
    for v in block:
        row = [Fraction(0)] * width
        row[pos[v]] = Fraction(1)
        for w, prob in q_rows[v].items():
            if w in pos:
                row[pos[w]] -= prob
        for c, val in rhs[v].items():
            row[size + col_pos[c]] = val
        rows.append(row)
    for col in range(size):
        pivot = next((i for i in range(col, size) if rows[i][col] != 0), None)
        if pivot is None:
            raise SingularSystemError("I - Q is singular; a transient state never absorbs")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        lead = rows[col][col]
        if lead != 1:
            rows[col] = [x / lead for x in rows[col]]
        for i in range(size):
            factor = rows[i][col]
            if i != col and factor != 0:
                pivot_row = rows[col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], pivot_row)]
    solution = {}
    for v in block:
        row = rows[pos[v]]
        solution[v] = {c: row[size + col_pos[c]] for c in columns if row[size + col_pos[c]] != 0}
    return solution


def _absorb_sparse(n: int, q_rows: list[dict[int, Fraction]],
                   r_rows: list[dict[int, Fraction]]) -> list[dict[int, Fraction]]:
    succ = [sorted(row) for row in q_rows]
    solved: list[dict[int, Fraction] | None] = [None] * n
    for block in _strong_components(n, succ):
        members = set(block)
        rhs: dict[int, dict[int, Fraction]] = {}
        for v in block:
            acc = dict(r_rows[v])
            for w, prob in q_rows[v].items():
                if w in members:
                    continue
                for c, val in solved[w].items():
                    acc[c] = acc.get(c, Fraction(0)) + prob * val
            rhs[v] = acc
        if len(block) == 1 and block[0] not in q_rows[block[0]]:
            solved[block[0]] = {c: v for c, v in rhs[block[0]].items() if v != 0}
            continue
        for v, row in _solve_block(block, q_rows, rhs).items():
            solved[v] = row
    return solved  # type: ignore[return-value]


def absorption_probabilities(chain: AbsorbingChain) -> Matrix:
    """Return ``A = (I - Q)^-1 R`` exactly, one row per transient state.

    Raises:
        SingularSystemError: if some transient state cannot reach absorption.
    """
    n, k = len(chain.transient), len(chain.absorbing)
    q_rows = [{j: v for j, v in enumerate(row) if v != 0} for row in chain.q]
    r_rows = [{j: v for j, v in enumerate(row) if v != 0} for row in chain.r]
    sparse = _absorb_sparse(n, q_rows, r_rows)
    return [[sparse[i].get(j, Fraction(0)) for j in range(k)] for i in range(n)]


def _hidden_fragment(plts: Plts, roots):
    """DFS over hidden edges from ``roots``; returns (enabled, disabled) sets."""
    enabled: set[StateId] = set()
    disabled: set[StateId] = set()
    stack = list(roots)
    seen = set(stack)
    while stack:
        state = stack.pop()
        hidden = plts.hidden_step(state)
        if hidden is None:
            disabled.add(state)
            continue
        enabled.add(state)
        for target in hidden[1]:
            if target not in seen:
                seen.add(target)
                stack.append(target)
    return enabled, disabled


def build_chain(plts: Plts, roots) -> AbsorbingChain:
    """Absorbing chain for the hidden fragment reachable from ``roots``.

    Hidden-enabled states that cannot reach any hidden-disabled state are
    merged into the synthetic absorbing state :data:`BOTTOM`.
    """
    enabled, disabled = _hidden_fragment(plts, roots)
    preds: dict[StateId, list[StateId]] = {}
    for state in enabled:
        for target in plts.hidden_step(state)[1]:
            preds.setdefault(target, []).append(state)
    live = set(disabled)
    stack = list(disabled)
    while stack:
        for prev in preds.get(stack.pop(), ()):
            if prev not in live:
                live.add(prev)
                stack.append(prev)
    transient = sorted(enabled & live)
    doomed = enabled - live
    absorbing = sorted(disabled) + ([BOTTOM] if doomed else [])
    t_pos = {s: i for i, s in enumerate(transient)}
    a_pos = {s: j for j, s in enumerate(absorbing)}
    q = [[Fraction(0)] * len(transient) for _ in transient]
    r = [[Fraction(0)] * len(absorbing) for _ in transient]
    for state in transient:
        i = t_pos[state]
        for target, prob in plts.hidden_step(state)[1].items():
            if target in t_pos:
                q[i][t_pos[target]] += prob
            elif target in doomed:
                r[i][a_pos[BOTTOM]] += prob
            else:
                r[i][a_pos[target]] += prob
    return AbsorbingChain(transient, absorbing, q, r)


def hidden_closure(plts: Plts, start: Mapping[StateId, Fraction]) -> SubDistribution:
    """Distribution over the first hidden-disabled states reached from ``start``.

    Mass that never leaves the hidden fragment lands on :data:`BOTTOM`.
    """
    roots = sorted(s for s, p in start.items() if p != 0)
    enabled, disabled = _hidden_fragment(plts, roots)
    if not enabled:
        return SubDistribution({s: start[s] for s in roots})
    chain = build_chain(plts, roots)
    # Solve sparsely; only the rows reachable from the roots are built anyway.
    n = len(chain.transient)
    q_rows = [{j: v for j, v in enumerate(row) if v != 0} for row in chain.q]
    r_rows = [{j: v for j, v in enumerate(row) if v != 0} for row in chain.r]
    absorbed = _absorb_sparse(n, q_rows, r_rows)
    t_pos = {s: i for i, s in enumerate(chain.transient)}
    out: dict[StateId, Fraction] = {}
    bottom = Fraction(0)
    for state in roots:
        mass = start[state]
        if state in disabled:
            out[state] = out.get(state, Fraction(0)) + mass
        elif state in t_pos:
            for j, val in absorbed[t_pos[state]].items():
                target = chain.absorbing[j]
                if target == BOTTOM:
                    bottom += mass * val
                else:
                    out[target] = out.get(target, Fraction(0)) + mass * val
        else:
            bottom += mass
    return SubDistribution(out, bottom)


def closure(plts: Plts, state: StateId, action: ActionId) -> SubDistribution | None:
    """Extended transition: one ``action`` step, then hidden closure.

    Returns None when ``state`` has no ``action`` transition. Results are
    memoised on the (immutable) transition system.
    """
    key = ("closure", state, action)
    memo = plts._memo
    if key in memo:
        return memo[key]
    step = plts.step(state, action)
    result = None if step is None else hidden_closure(plts, step)
    memo[key] = result
    return result


def state_closure(plts: Plts, state: StateId) -> SubDistribution:
    """Hidden closure of the point mass at ``state`` (memoised)."""
    key = ("state", state)
    memo = plts._memo
    if key not in memo:
        memo[key] = hidden_closure(plts, {state: Fraction(1)})
    return memo[key]
