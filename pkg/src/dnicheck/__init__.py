"""Exact checking of differential noninterference for probabilistic I/O automata."""

from .closure import AbsorbingChain, absorption_probabilities, closure, hidden_closure
from .composition import ReplacementSpec, implements_check, replace_transition
from .model import (
    BOTTOM,
    ActionKind,
    Automaton,
    Distribution,
    Plts,
    SubDistribution,
    is_h_disabled,
    validate_plts,
)
from .relations import (
    Relation,
    RelationFamily,
    is_all_covered,
    is_in_lifted_relation,
    is_unwind_fam,
    reachable_states,
)
from .semantics import (
    dni_check_bruteforce,
    neighbors_one,
    observable_prefix_prob,
    trace_prefix_prob,
)

__all__ = [
    "AbsorbingChain",
    "ActionKind",
    "Automaton",
    "BOTTOM",
    "Distribution",
    "Plts",
    "Relation",
    "RelationFamily",
    "ReplacementSpec",
    "SubDistribution",
    "absorption_probabilities",
    "closure",
    "dni_check_bruteforce",
    "hidden_closure",
    "implements_check",
    "is_all_covered",
    "is_h_disabled",
    "is_in_lifted_relation",
    "is_unwind_fam",
    "neighbors_one",
    "observable_prefix_prob",
    "reachable_states",
    "replace_transition",
    "trace_prefix_prob",
    "validate_plts",
]
