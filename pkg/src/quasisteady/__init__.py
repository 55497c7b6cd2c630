"""Solvability checks and a half-space solver for quasi-steady elliptic
problems with dynamic boundary conditions."""
from .config import ConfigError, load_problem_spec, parse_problem_spec, serialize_problem_spec
from .reports import VerificationReport
from .symbols import (
    BoundaryOperator,
    FunctionSpaceSpec,
    InvariantError,
    ProblemSpec,
    check_ellipticity,
    evaluate_interior_symbol,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryOperator",
    "ConfigError",
    "FunctionSpaceSpec",
    "InvariantError",
    "ProblemSpec",
    "VerificationReport",
    "check_ellipticity",
    "evaluate_interior_symbol",
    "load_problem_spec",
    "parse_problem_spec",
    "serialize_problem_spec",
]
