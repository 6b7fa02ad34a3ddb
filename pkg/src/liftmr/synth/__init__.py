"""Candidate enumeration, bounded checking and CEGIS synthesis."""

from .candidates import (
    Candidate,
    CounterExp,
    Emit,
    Fold,
    candidate_cost,
    candidate_in_grammar,
    eval_candidate,
)
from .checker import (
    Counterexample,
    Verdict,
    check_bounded,
    recheck_counterexample,
    sequential_trace,
)
from .domain import BoundedDomain, Context, contexts
from .engine import (
    GiveUp,
    Summary,
    SynthConfig,
    check_commutative_associative,
    synthesize,
)

__all__ = [
    "BoundedDomain",
    "Candidate",
    "Context",
    "CounterExp",
    "Counterexample",
    "Emit",
    "Fold",
    "GiveUp",
    "Summary",
    "SynthConfig",
    "Verdict",
    "candidate_cost",
    "candidate_in_grammar",
    "check_bounded",
    "check_commutative_associative",
    "contexts",
    "eval_candidate",
    "recheck_counterexample",
    "sequential_trace",
    "synthesize",
]
