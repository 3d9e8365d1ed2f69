"""Line-oriented text formats for automata, relation families and lifting queries.

Every format is a sequence of directive lines, one record per line, with
whitespace-separated tokens. ``#`` starts a comment. Identifiers may not
contain whitespace or ``#``. Probabilities and ratios are exact rationals
written ``num/den`` or as integers; decimals are rejected.

Automaton::

    action d:0 data
    action tau hidden
    state s0
    state s1
    initial s0
    trans s0 tau -> s1 1/2 s0 1/2

Relation family (``t + 1`` levels, ``_bot_`` for nontermination)::

    t 1
    step_rho 4
    level 0
    pair s0 s0
    level 1
    pair s0 s1

Family set for the covering check: ``t`` and ``step_rho`` once, then for each
covered step a ``family <state> <data-action>`` line followed by its levels.

Lifting query: ``rho``, ``pair`` lines, and ``nu1``/``nu2`` entry lines.
"""

from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import dataclass
from fractions import Fraction

from .model import BOTTOM, ActionKind, Automaton, Distribution, Plts, SubDistribution
from .relations import RelationFamily

_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")


class FormatError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1, source: str = "<input>"):
        super().__init__(f"{source}:{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


def _lines(text: str) -> Iterator[list[Token]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [Token(m.group(), number, m.start() + 1) for m in re.finditer(r"\S+", body)]
        if tokens:
            yield tokens


class _Reader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.rows = list(_lines(text))

    def error(self, message: str, token: Token | None = None, line: int = 1):
        if token is None:
            raise FormatError(message, line, 1, self.source)
        raise FormatError(message, token.line, token.column, self.source)

    def rational(self, token: Token) -> Fraction:
        if not _RATIONAL.match(token.text):
            self.error(f"expected an exact rational like 1/3, got {token.text!r}", token)
        try:
            return Fraction(token.text)
        except ZeroDivisionError:
            self.error("zero denominator", token)

    def integer(self, token: Token) -> int:
        if not re.fullmatch(r"\d+", token.text):
            self.error(f"expected a non-negative integer, got {token.text!r}", token)
        return int(token.text)

    def arity(self, row: list[Token], count: int):
        if len(row) != count:
            self.error(f"{row[0].text!r} takes {count - 1} argument(s)", row[0])

    def state_id(self, token: Token, allow_bottom: bool = False) -> str:
        if token.text == BOTTOM and not allow_bottom:
            self.error(f"{BOTTOM!r} is reserved and cannot name a state", token)
        return token.text


_KINDS = {kind.value: kind for kind in ActionKind}


def parse_automaton(text: str, source: str = "<input>") -> Automaton:
    """Parse an automaton file.

    Distributions are not required to sum to one here; call
    :func:`~dnicheck.model.validate_plts` to report that.

    Raises:
        FormatError: with line and column of the offending token.
    """
    reader = _Reader(text, source)
    actions: dict[str, ActionKind] = {}
    states: dict[str, Token] = {}
    initial: Token | None = None
    pending = []
    for row in reader.rows:
        head = row[0]
        if head.text == "action":
            reader.arity(row, 3)
            name, kind = row[1], row[2]
            if kind.text not in _KINDS:
                reader.error(f"unknown action kind {kind.text!r}; use one of "
                             + ", ".join(_KINDS), kind)
            if name.text in actions:
                reader.error(f"duplicate action {name.text!r}", name)
            actions[name.text] = _KINDS[kind.text]
        elif head.text == "state":
            if len(row) < 2:
                reader.error("'state' needs at least one id", head)
            for tok in row[1:]:
                reader.state_id(tok)
                if tok.text in states:
                    reader.error(f"duplicate state {tok.text!r}", tok)
                states[tok.text] = tok
        elif head.text == "initial":
            reader.arity(row, 2)
            if initial is not None:
                reader.error("initial state given twice", head)
            initial = row[1]
        elif head.text == "trans":
            pending.append(row)
        else:
            reader.error(f"unknown directive {head.text!r}", head)
    if initial is None:
        reader.error("missing 'initial' line", line=max(1, len(text.splitlines())))
    if initial.text not in states:
        reader.error(f"initial state {initial.text!r} is not declared", initial)
    transitions = {}
    for row in pending:
        if len(row) < 6 or row[3].text != "->" or (len(row) - 4) % 2:
            reader.error("expected: trans <state> <action> -> <target> <prob> ...", row[0])
        src, act = row[1], row[2]
        if src.text not in states:
            reader.error(f"undeclared state {src.text!r}", src)
        if act.text not in actions:
            reader.error(f"undeclared action {act.text!r}", act)
        if (src.text, act.text) in transitions:
            reader.error(f"second transition for ({src.text}, {act.text})", src)
        entries = {}
        for tgt, prob in zip(row[4::2], row[5::2]):
            if tgt.text not in states:
                reader.state_id(tgt)
                reader.error(f"undeclared state {tgt.text!r}", tgt)
            value = reader.rational(prob)
            if not 0 < value <= 1:
                reader.error(f"probability {prob.text} outside (0, 1]", prob)
            if tgt.text in entries:
                reader.error(f"target {tgt.text!r} listed twice", tgt)
            entries[tgt.text] = value
        transitions[(src.text, act.text)] = Distribution(entries, check=False)
    return Automaton(Plts(set(states), actions, transitions), initial.text)


def emit_automaton(aut: Automaton) -> str:
    plts = aut.plts
    lines = [f"action {name} {kind.value}" for name, kind in sorted(plts.actions.items())]
    lines += [f"state {s}" for s in sorted(plts.states)]
    lines.append(f"initial {aut.initial}")
    for (state, action), dist in sorted(plts.transitions.items()):
        targets = " ".join(f"{t} {p}" for t, p in sorted(dist.items()))
        lines.append(f"trans {state} {action} -> {targets}")
    return "\n".join(lines) + "\n"


def _parse_levels(reader: _Reader, rows, t: int, anchor: Token) -> list[set]:
    levels: list[set] = []
    for row in rows:
        head = row[0]
        if head.text == "level":
            reader.arity(row, 2)
            index = reader.integer(row[1])
            if index != len(levels):
                reader.error(f"expected level {len(levels)}, got {index}", row[1])
            levels.append(set())
        elif head.text == "pair":
            reader.arity(row, 3)
            if not levels:
                reader.error("'pair' before any 'level'", head)
            levels[-1].add((row[1].text, row[2].text))
        else:
            reader.error(f"unknown directive {head.text!r}", head)
    if len(levels) != t + 1:
        reader.error(f"family has {len(levels)} levels, expected t+1 = {t + 1}", anchor)
    return levels


def _header(reader: _Reader, rows, names: tuple[str, ...]):
    found = {}
    rest = []
    for row in rows:
        if row[0].text in names and row[0].text not in found and not rest:
            reader.arity(row, 2)
            found[row[0].text] = row
        else:
            rest.append(row)
    for name in names:
        if name not in found:
            reader.error(f"missing '{name}' line", rows[0][0] if rows else None)
    return found, rest


def parse_relation_family(text: str, source: str = "<input>") -> RelationFamily:
    reader = _Reader(text, source)
    found, rest = _header(reader, reader.rows, ("t", "step_rho"))
    t = reader.integer(found["t"][1])
    step = reader.rational(found["step_rho"][1])
    if step < 1:
        reader.error("step_rho must be at least 1", found["step_rho"][1])
    levels = _parse_levels(reader, rest, t, found["t"][0])
    return RelationFamily(levels, step, t)


def _emit_levels(levels) -> list[str]:
    lines = []
    for i, level in enumerate(levels):
        lines.append(f"level {i}")
        lines += [f"pair {a} {b}" for a, b in sorted(level)]
    return lines


def emit_relation_family(fam: RelationFamily) -> str:
    lines = [f"t {fam.t}", f"step_rho {fam.step_rho}"] + _emit_levels(fam.levels)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FamilySet:
    t: int
    step_rho: Fraction
    families: dict


def parse_family_set(text: str, source: str = "<input>") -> FamilySet:
    reader = _Reader(text, source)
    found, rest = _header(reader, reader.rows, ("t", "step_rho"))
    t = reader.integer(found["t"][1])
    step = reader.rational(found["step_rho"][1])
    families = {}
    groups: list[tuple[list[Token], list]] = []
    for row in rest:
        if row[0].text == "family":
            reader.arity(row, 3)
            groups.append((row, []))
        elif not groups:
            reader.error("level data before any 'family' line", row[0])
        else:
            groups[-1][1].append(row)
    for head, rows in groups:
        key = (reader.state_id(head[1]), head[2].text)
        if key in families:
            reader.error(f"duplicate family for {key}", head[1])
        families[key] = RelationFamily(_parse_levels(reader, rows, t, head[0]), step, t)
    return FamilySet(t, step, families)


def emit_family_set(family_set: FamilySet) -> str:
    lines = [f"t {family_set.t}", f"step_rho {family_set.step_rho}"]
    for (state, data), fam in sorted(family_set.families.items()):
        lines.append(f"family {state} {data}")
        lines += _emit_levels(fam.levels)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LiftQuery:
    rho: Fraction
    relation: frozenset
    nu1: SubDistribution
    nu2: SubDistribution


def parse_lift_query(text: str, source: str = "<input>") -> LiftQuery:
    reader = _Reader(text, source)
    found, rest = _header(reader, reader.rows, ("rho",))
    rho = reader.rational(found["rho"][1])
    if rho < 1:
        reader.error("rho must be at least 1", found["rho"][1])
    pairs = set()
    entries: dict[str, dict[str, Fraction]] = {"nu1": {}, "nu2": {}}
    anchors: dict[str, Token] = {}
    for row in rest:
        head = row[0]
        if head.text == "pair":
            reader.arity(row, 3)
            pairs.add((row[1].text, row[2].text))
        elif head.text in entries:
            reader.arity(row, 3)
            anchors.setdefault(head.text, head)
            value = reader.rational(row[2])
            if not 0 < value <= 1:
                reader.error(f"probability {row[2].text} outside (0, 1]", row[2])
            if row[1].text in entries[head.text]:
                reader.error(f"{row[1].text!r} listed twice", row[1])
            entries[head.text][row[1].text] = value
        else:
            reader.error(f"unknown directive {head.text!r}", head)
    dists = {}
    for name in ("nu1", "nu2"):
        mass = entries[name]
        if sum(mass.values(), Fraction(0)) != 1:
            reader.error(f"{name} sums to {sum(mass.values(), Fraction(0))}, expected 1",
                         anchors.get(name, found["rho"][0]))
        bottom = mass.pop(BOTTOM, Fraction(0))
        dists[name] = SubDistribution(mass, bottom)
    return LiftQuery(rho, frozenset(pairs), dists["nu1"], dists["nu2"])


def emit_lift_query(query: LiftQuery) -> str:
    lines = [f"rho {query.rho}"]
    lines += [f"pair {a} {b}" for a, b in sorted(query.relation)]
    for name, nu in (("nu1", query.nu1), ("nu2", query.nu2)):
        lines += [f"{name} {s} {nu[s]}" for s in sorted(nu)]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReplacementFile:
    host_state: str
    host_action: str
    iota: dict
    prefix: str | None = None


def parse_replacement(text: str, source: str = "<input>") -> ReplacementFile:
    """``host_state``, ``host_action``, optional ``prefix`` and ``iota <host-side> <terminal>`` lines."""
    reader = _Reader(text, source)
    found, rest = _header(reader, reader.rows, ("host_state", "host_action"))
    prefix = None
    iota = {}
    for row in rest:
        head = row[0]
        if head.text == "prefix":
            reader.arity(row, 2)
            prefix = row[1].text
        elif head.text == "iota":
            reader.arity(row, 3)
            if row[1].text in iota:
                reader.error(f"iota given twice for {row[1].text!r}", row[1])
            iota[row[1].text] = row[2].text
        else:
            reader.error(f"unknown directive {head.text!r}", head)
    return ReplacementFile(found["host_state"][1].text, found["host_action"][1].text, iota, prefix)
