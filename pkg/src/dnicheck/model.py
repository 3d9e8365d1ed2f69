"""Probabilistic labeled transition systems and their structural checks."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType

from .errors import UnknownActionError, UnknownStateError

#: Reserved identifier for the nontermination outcome of a hidden closure.
BOTTOM = "_bot_"

StateId = str
ActionId = str


class ActionKind(enum.Enum):
    DATA = "data"
    QUERY = "query"
    RESPONSE = "response"
    HIDDEN = "hidden"

    @property
    def is_input(self) -> bool:
        return self in (ActionKind.DATA, ActionKind.QUERY)

    @property
    def is_output(self) -> bool:
        return not self.is_input

    @property
    def is_observable(self) -> bool:
        return self in (ActionKind.QUERY, ActionKind.RESPONSE)


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and "num/den" strings; refuse floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "." in text or "e" in text.lower():
            raise ValueError(f"decimal value {value!r} is not an exact rational")
        return Fraction(text)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


class _ProbabilityMap(Mapping):
    """Immutable state -> positive rational map; zero entries are dropped."""

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping[StateId, object] | Iterable[tuple[StateId, object]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        cleaned: dict[StateId, Fraction] = {}
        for state, prob in items:
            prob = as_fraction(prob)
            if prob < 0:
                raise ValueError(f"negative probability {prob} for {state!r}")
            if prob == 0:
                continue
            cleaned[state] = cleaned.get(state, Fraction(0)) + prob
        self._entries = dict(sorted(cleaned.items()))
        self._hash = None

    def __getitem__(self, state):
        return self._entries[state]

    def __iter__(self) -> Iterator[StateId]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, _ProbabilityMap):
            return type(self) is type(other) and self._entries == other._entries
        return NotImplemented

    def total(self) -> Fraction:
        return sum(self._entries.values(), Fraction(0))

    def support(self) -> frozenset:
        return frozenset(self._entries)


class Distribution(_ProbabilityMap):
    """A finite discrete probability measure over state ids.

    Construction checks that the mass sums to exactly one unless ``check`` is
    false, which file loaders use so that a bad row surfaces as a validation
    violation rather than an exception.
    """

    __slots__ = ()

    def __init__(self, entries=(), *, check: bool = True):
        super().__init__(entries)
        if check and self.total() != 1:
            raise ValueError(f"distribution mass is {self.total()}, expected 1")

    @classmethod
    def dirac(cls, state: StateId) -> "Distribution":
        return cls({state: Fraction(1)})

    def __repr__(self) -> str:
        body = ", ".join(f"{s!r}: {p}" for s, p in self.items())
        return f"Distribution({{{body}}})"


class SubDistribution(_ProbabilityMap):
    """Mass over states plus a distinguished nontermination element.

    Indexing with :data:`BOTTOM` returns the nontermination mass, and
    :meth:`support` includes it whenever that mass is positive, so lifting
    checks can treat it as an ordinary outcome.
    """

    __slots__ = ("bottom",)

    def __init__(self, entries=(), bottom=Fraction(0)):
        super().__init__(entries)
        if BOTTOM in self._entries:
            extra = self._entries.pop(BOTTOM)
            bottom = as_fraction(bottom) + extra
        self.bottom = as_fraction(bottom)
        if self.bottom < 0 or self.total() + self.bottom != 1:
            raise ValueError("sub-distribution mass plus bottom must equal 1")

    @classmethod
    def dirac(cls, state: StateId) -> "SubDistribution":
        if state == BOTTOM:
            return cls({}, Fraction(1))
        return cls({state: Fraction(1)})

    def __getitem__(self, state):
        if state == BOTTOM:
            if self.bottom == 0:
                raise KeyError(BOTTOM)
            return self.bottom
        return self._entries[state]

    def __contains__(self, state) -> bool:
        if state == BOTTOM:
            return self.bottom > 0
        return state in self._entries

    def __iter__(self):
        yield from self._entries
        if self.bottom > 0:
            yield BOTTOM

    def __len__(self) -> int:
        return len(self._entries) + (1 if self.bottom > 0 else 0)

    def __eq__(self, other):
        if isinstance(other, SubDistribution):
            return self._entries == other._entries and self.bottom == other.bottom
        return NotImplemented

    def __hash__(self):
        return hash((frozenset(self._entries.items()), self.bottom))

    def states(self) -> dict[StateId, Fraction]:
        """Mass on proper states only."""
        return dict(self._entries)

    def support(self) -> frozenset:
        return frozenset(self)

    def __repr__(self) -> str:
        body = ", ".join(f"{s!r}: {p}" for s, p in self._entries.items())
        return f"SubDistribution({{{body}}}, bottom={self.bottom})"


@dataclass(frozen=True)
class Plts:
    """States, kinded actions and a deterministic transition map.

    ``transitions`` maps ``(state, action)`` to the successor distribution, so
    transition determinism holds by construction. The other two axioms are
    reported by :func:`validate_plts`.
    """

    states: frozenset
    actions: Mapping[ActionId, ActionKind]
    transitions: Mapping[tuple[StateId, ActionId], Distribution]
    _outgoing: Mapping = field(init=False, repr=False, compare=False)
    _memo: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "actions", MappingProxyType(dict(self.actions)))
        object.__setattr__(self, "transitions", MappingProxyType(dict(self.transitions)))
        if BOTTOM in self.states:
            raise ValueError(f"{BOTTOM!r} is reserved and cannot name a state")
        outgoing: dict[StateId, dict[ActionId, Distribution]] = {s: {} for s in self.states}
        for (state, action), dist in self.transitions.items():
            if state not in self.states:
                raise UnknownStateError(state)
            if action not in self.actions:
                raise UnknownActionError(action)
            for target in dist:
                if target not in self.states:
                    raise UnknownStateError(target)
            outgoing[state][action] = dist
        frozen = {s: MappingProxyType(dict(sorted(a.items()))) for s, a in outgoing.items()}
        object.__setattr__(self, "_outgoing", MappingProxyType(frozen))
        # Cache of derived, deterministic results (closures); safe to share
        # because every entry is a pure function of this immutable object.
        object.__setattr__(self, "_memo", {})

    def kind(self, action: ActionId) -> ActionKind:
        try:
            return self.actions[action]
        except KeyError:
            raise UnknownActionError(action) from None

    def actions_of(self, *kinds: ActionKind) -> list[ActionId]:
        return sorted(a for a, k in self.actions.items() if k in kinds)

    @property
    def data_actions(self) -> list[ActionId]:
        return self.actions_of(ActionKind.DATA)

    @property
    def input_actions(self) -> list[ActionId]:
        return self.actions_of(ActionKind.DATA, ActionKind.QUERY)

    @property
    def observable_actions(self) -> list[ActionId]:
        return self.actions_of(ActionKind.QUERY, ActionKind.RESPONSE)

    def outgoing(self, state: StateId) -> Mapping[ActionId, Distribution]:
        try:
            return self._outgoing[state]
        except KeyError:
            raise UnknownStateError(state) from None

    def step(self, state: StateId, action: ActionId) -> Distribution | None:
        if action not in self.actions:
            raise UnknownActionError(action)
        return self.outgoing(state).get(action)

    def hidden_step(self, state: StateId) -> tuple[ActionId, Distribution] | None:
        for action, dist in self.outgoing(state).items():
            if self.actions[action] is ActionKind.HIDDEN:
                return action, dist
        return None

    def output_step(self, state: StateId) -> tuple[ActionId, Distribution] | None:
        for action, dist in self.outgoing(state).items():
            if self.actions[action].is_output:
                return action, dist
        return None


@dataclass(frozen=True)
class Automaton:
    plts: Plts
    initial: StateId

    def __post_init__(self):
        if self.initial not in self.plts.states:
            raise UnknownStateError(self.initial)


@dataclass(frozen=True)
class Violation:
    axiom: str
    state: StateId
    actions: tuple[ActionId, ...]
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_plts(plts: Plts) -> ValidationReport:
    """Report every breach of output determinism, quasi-input enabling and
    distribution normalisation, each with the offending state and actions."""
    violations: list[Violation] = []
    inputs = plts.input_actions
    for state in sorted(plts.states):
        out = plts.outgoing(state)
        outputs = [a for a in out if plts.actions[a].is_output]
        if outputs and len(out) > 1:
            violations.append(Violation("output-determinism", state, tuple(sorted(out)),
                                        "state with an output has more than one transition"))
        enabled_inputs = [a for a in inputs if a in out]
        if enabled_inputs and len(enabled_inputs) != len(inputs):
            missing = tuple(a for a in inputs if a not in out)
            violations.append(Violation("quasi-input-enabling", state, missing,
                                        "inputs enabled only partially"))
        for action, dist in out.items():
            if dist.total() != 1:
                violations.append(Violation("distribution", state, (action,),
                                            f"mass {dist.total()}"))
    return ValidationReport(tuple(violations))


def is_h_disabled(plts: Plts, state: StateId) -> bool:
    return plts.hidden_step(state) is None
