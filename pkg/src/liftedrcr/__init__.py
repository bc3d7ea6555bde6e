"""Lifted relax, compensate and recover inference for Markov logic networks."""

from .compensation import CompensationParams, Mode, Schedule, run_compensation
from .errors import (
    CapacityError,
    EquivalenceStateError,
    InconsistentModelError,
    MLNError,
    ModelError,
    NotCountNormalizedError,
    ParseError,
)
from .exact import brute_force, factor_graph, ve_marginals
from .generators import generate_model
from .grounding import ground
from .parser import parse_mln, print_mln, read_mln
from .recovery import RecoveryPolicy, rcr
from .relaxation import clone_all, ground_split, recover, relax
from .shattering import partition_model, shatter_atom

__all__ = [
    "CapacityError", "CompensationParams", "EquivalenceStateError", "InconsistentModelError",
    "MLNError", "Mode", "ModelError", "NotCountNormalizedError", "ParseError", "RecoveryPolicy",
    "Schedule", "brute_force", "clone_all", "factor_graph", "generate_model", "ground",
    "ground_split", "parse_mln", "partition_model", "print_mln", "rcr", "read_mln", "recover",
    "relax", "run_compensation", "shatter_atom", "ve_marginals",
]
