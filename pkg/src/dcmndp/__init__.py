"""Lagrangian lower bounds for discrete cost multicommodity network design."""

from .engine import SolverConfig, SolverReport, compute_upper_bound, run
from .instance import (
    GeneratorParams,
    Instance,
    generate_random,
    parse_instance,
    read_instance,
    serialize_instance,
    terminal_set,
    tri3,
    validate,
)
from .lagrangian import evaluate_dual

__all__ = [
    "GeneratorParams", "Instance", "SolverConfig", "SolverReport",
    "compute_upper_bound", "evaluate_dual", "generate_random", "parse_instance",
    "read_instance", "run", "serialize_instance", "terminal_set", "tri3", "validate",
]
