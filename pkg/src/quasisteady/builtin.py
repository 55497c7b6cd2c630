"""Built-in example problems shipped as configuration files."""
from __future__ import annotations

from importlib import resources

from .config import parse_problem_spec
from .symbols import ProblemSpec

__all__ = ["BUILTIN_IDS", "builtin_text", "builtin_spec"]

_FILES = {
    "1": "example1.cfg",
    "2": "example2.cfg",
    "3": "example3.cfg",
    "1-broken": "example1_broken.cfg",
}
BUILTIN_IDS = tuple(_FILES)


def builtin_text(ident) -> str:
    key = str(ident)
    if key not in _FILES:
        raise KeyError(f"unknown builtin example {ident!r}; choose from {', '.join(BUILTIN_IDS)}")
    return resources.files("quasisteady").joinpath("data", _FILES[key]).read_text()


def builtin_spec(ident, eta: float | None = None) -> ProblemSpec:
    spec = parse_problem_spec(builtin_text(ident))
    return spec if eta is None else spec.with_eta(eta)
