"""A windowed private-query server: automaton builders and unwinding families.

The server keeps ``t`` slots of at most ``v`` data points each. Data points go
into the current slot (dropped when it is full); a query is answered by a
noisy mechanism over the union of all slots; after each response the current
slot index advances and the slot it lands on is cleared.

Only three program points are materialised: ``08`` waits for input, ``15``
is about to compute a response (one hidden step), and ``16`` is about to
emit the response.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Hashable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .composition import ReplacementSpec, replace_transition
from .errors import StateLimitExceeded
from .model import ActionKind, Automaton, Distribution, Plts, StateId
from .relations import CheckReport, RelationFamily, is_all_covered

WAIT, COMPUTE, RESPOND = 8, 15, 16


def _ordered(values) -> tuple:
    return tuple(sorted(values, key=lambda x: (type(x).__name__, x)))


@dataclass(frozen=True)
class Ex1Params:
    t: int
    v: int
    domain: tuple
    mechanisms: Mapping[str, object]
    max_states: int = 200_000

    def __post_init__(self):
        object.__setattr__(self, "domain", _ordered(set(self.domain)))
        if self.t < 1 or self.v < 1:
            raise ValueError("slot count and slot size must be positive")
        if not self.domain:
            raise ValueError("data domain must be nonempty")
        if not self.mechanisms:
            raise ValueError("at least one query mechanism is required")

    @property
    def rho_q(self) -> Fraction:
        """Per-query ratio bound: the loosest among the mechanisms."""
        return max(Fraction(mech.rho) for mech in self.mechanisms.values())


@dataclass(frozen=True, order=True)
class WindowState:
    pc: int
    slots: tuple
    cur: int
    query: str | None = None
    response: int | None = None

    @property
    def id(self) -> StateId:
        slots = ",".join("[" + ",".join(str(x) for x in slot) + "]" for slot in self.slots)
        parts = [f"{self.pc:02d}", f"B={slots}", f"c={self.cur}"]
        if self.query is not None:
            parts.append(f"q={self.query}")
        if self.response is not None:
            parts.append(f"r={self.response}")
        return "|".join(parts)

    def database(self) -> tuple:
        return _ordered(x for slot in self.slots for x in slot)


def data_action(value: Hashable) -> str:
    return f"d:{value}"


def query_action(name: str) -> str:
    return f"q:{name}"


def response_action(value: int) -> str:
    return f"r:{value}"


def compute_action(state: WindowState) -> str:
    return f"tau[{state.id}]"


def add(state: WindowState, slot: int, value, v: int) -> WindowState:
    """``state`` with ``value`` inserted into ``slot``; unchanged if the slot is full."""
    if len(state.slots[slot]) >= v:
        return state
    slots = list(state.slots)
    slots[slot] = _ordered(slots[slot] + (value,))
    return WindowState(state.pc, tuple(slots), state.cur, state.query, state.response)


def swap(state: WindowState, slot: int, value, old) -> WindowState:
    """``state`` with one copy of ``old`` in ``slot`` replaced by ``value``."""
    items = list(state.slots[slot])
    items.remove(old)
    slots = list(state.slots)
    slots[slot] = _ordered(items + [value])
    return WindowState(state.pc, tuple(slots), state.cur, state.query, state.response)


@dataclass
class PinqModel:
    params: Ex1Params
    automaton: Automaton
    states: dict[StateId, WindowState]
    value_of_action: dict[str, Hashable] = field(default_factory=dict)

    def state(self, state_id: StateId) -> WindowState:
        return self.states[state_id]

    @property
    def declared_state_count(self) -> int:
        return len(self.states)


def initial_state(params: Ex1Params) -> WindowState:
    return WindowState(WAIT, ((),) * params.t, 0)


def successors(params: Ex1Params, state: WindowState):
    """Yield ``(action, {successor: probability})`` for every transition of ``state``."""
    if state.pc == WAIT:
        for value in params.domain:
            yield data_action(value), {add(state, state.cur, value, params.v): Fraction(1)}
        for name in sorted(params.mechanisms):
            yield query_action(name), {WindowState(COMPUTE, state.slots, state.cur, name): Fraction(1)}
    elif state.pc == COMPUTE:
        mech = params.mechanisms[state.query]
        dist = mech.distribution(state.database())
        yield compute_action(state), {
            WindowState(RESPOND, state.slots, state.cur, state.query, r): Fraction(prob)
            for r, prob in sorted(dist.items()) if prob
        }
    else:
        nxt = (state.cur + 1) % params.t
        slots = list(state.slots)
        slots[nxt] = ()
        yield response_action(state.response), {WindowState(WAIT, tuple(slots), nxt): Fraction(1)}


def build_mex1_model(params: Ex1Params) -> PinqModel:
    """Enumerate every state reachable from the empty server.

    Raises:
        StateLimitExceeded: past ``params.max_states`` states.
    """
    start = initial_state(params)
    seen = {start}
    queue = deque([start])
    transitions: dict[tuple[StateId, str], Distribution] = {}
    actions: dict[str, ActionKind] = {}
    for value in params.domain:
        actions[data_action(value)] = ActionKind.DATA
    for name in params.mechanisms:
        actions[query_action(name)] = ActionKind.QUERY
    while queue:
        state = queue.popleft()
        for action, dist in successors(params, state):
            if action not in actions:
                actions[action] = (ActionKind.HIDDEN if action.startswith("tau[")
                                   else ActionKind.RESPONSE)
            for target in dist:
                if target not in seen:
                    seen.add(target)
                    if len(seen) > params.max_states:
                        raise StateLimitExceeded(f"more than {params.max_states} states")
                    queue.append(target)
            transitions[(state.id, action)] = Distribution({t.id: p for t, p in dist.items()})
    states = {s.id: s for s in seen}
    plts = Plts(set(states), actions, transitions)
    values = {data_action(v): v for v in params.domain}
    return PinqModel(params, Automaton(plts, start.id), states, values)


def build_mex1(params: Ex1Params) -> Automaton:
    return build_mex1_model(params).automaton


def _query_layers(params: Ex1Params, origin: WindowState) -> dict[int, set[WindowState]]:
    """Hidden-disabled states reachable from ``origin``, bucketed by queries used.

    A response state counts the query it answers. Bucket ``t + 1`` collects
    everything reached with more than ``t`` queries.
    """
    cap = params.t + 1
    seen = {(origin, 0)}
    queue = deque(seen)
    while queue:
        state, used = queue.popleft()
        for action, dist in successors(params, state):
            step = 1 if action.startswith("q:") else 0
            for target in dist:
                if target.pc == COMPUTE:
                    for _, inner in successors(params, target):
                        for final in inner:
                            node = (final, min(used + step, cap))
                            if node not in seen:
                                seen.add(node)
                                queue.append(node)
                    continue
                node = (target, min(used + step, cap))
                if node not in seen:
                    seen.add(node)
                    queue.append(node)
    layers: dict[int, set[WindowState]] = {k: set() for k in range(cap + 1)}
    for state, used in seen:
        layers[used].add(state)
    return layers


def _neighbours(state: WindowState, slot: int, value, v: int):
    yield add(state, slot, value, v)
    for old in set(state.slots[slot]):
        yield swap(state, slot, value, old)


def build_unwinding_families(model: PinqModel, state_id: StateId, data: str) -> RelationFamily:
    """Relation family relating each state to what it would have been had ``data``
    been inserted at ``state_id``.

    Level ``j >= 1`` pairs every state reached with ``t - j`` queries with its
    insertion and swap variants in the slot that was current at
    ``state_id``. Level 0 holds the identity on states reached with at least
    ``t`` queries (the inserted point has been cleared by then), plus the
    variants of response states reached with exactly ``t`` queries. Pairs
    whose variant is unreachable are left out.

    Raises:
        ValueError: if ``state_id`` is not a waiting state of ``model``.
    """
    params = model.params
    origin = model.states.get(state_id)
    if origin is None or origin.pc != WAIT:
        raise ValueError(f"{state_id!r} is not a reachable waiting state")
    if data not in model.value_of_action:
        raise ValueError(f"{data!r} is not a data action")
    value = model.value_of_action[data]
    slot, t = origin.cur, params.t
    layers = _query_layers(params, origin)
    levels = []
    for j in range(t + 1):
        pairs = set()
        if j == 0:
            for state in layers[t] | layers[t + 1]:
                pairs.add((state.id, state.id))
            for state in layers[t]:
                if state.pc == RESPOND:
                    pairs.update((state.id, other.id)
                                 for other in _neighbours(state, slot, value, params.v))
        else:
            for state in layers[t - j]:
                pairs.update((state.id, other.id)
                             for other in _neighbours(state, slot, value, params.v))
        # variants the builder never reached are not states of the automaton
        levels.append({pair for pair in pairs if pair[1] in model.states})
    return RelationFamily(levels, params.rho_q ** 2, t)


@dataclass(frozen=True)
class Certificate:
    ok: bool
    claimed_rho: Fraction
    report: CheckReport
    state_count: int
    family_count: int


def build_all_families(model: PinqModel) -> dict[tuple[StateId, str], RelationFamily]:
    plts = model.automaton.plts
    families = {}
    for state_id in sorted(model.states):
        if model.states[state_id].pc != WAIT:
            continue
        for data in plts.data_actions:
            families[(state_id, data)] = build_unwinding_families(model, state_id, data)
    return families


def verify_mex1(params: Ex1Params, report_sink=None) -> Certificate:
    """Build the server, generate its families and run the covering check.

    ``report_sink``, when given, is called with ``(key, value)`` progress
    entries.
    """
    sink = report_sink or (lambda key, value: None)
    model = build_mex1_model(params)
    sink("states", model.declared_state_count)
    families = build_all_families(model)
    sink("families", len(families))
    step = params.rho_q ** 2
    report = is_all_covered(model.automaton, families, step, params.t)
    sink("ok", report.ok)
    return Certificate(report.ok, step ** params.t, report, model.declared_state_count,
                       len(families))


def build_mex2(params: Ex1Params, model: PinqModel | None = None) -> Automaton:
    """Replace every compute step with the mechanism's sampler automaton.

    Raises:
        ValueError: naming the state, mechanism and database when a sampler
            does not reproduce the idealised response distribution.
    """
    model = model or build_mex1_model(params)
    aut = model.automaton
    for state_id in sorted(model.states):
        state = model.states[state_id]
        if state.pc != COMPUTE:
            continue
        mech = params.mechanisms[state.query]
        db = state.database()
        iota = {
            WindowState(RESPOND, state.slots, state.cur, state.query, r).id: f"ret:{r}"
            for r in mech.distribution(db)
        }
        spec = ReplacementSpec(state_id, compute_action(state), mech.subroutine(db), iota)
        try:
            aut = replace_transition(aut, spec)
        except ValueError as exc:
            raise ValueError(f"state {state_id}, mechanism {state.query}, database {list(db)}: "
                             f"{exc}") from exc
    return aut


def window_pairs(model: PinqModel, level: set) -> list[tuple[WindowState, WindowState]]:
    """Decode a level's id pairs back to structured states (for inspection)."""
    return [(model.states[a], model.states[b]) for a, b in sorted(level)]

