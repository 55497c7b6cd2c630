"""Verification report records shared by the condition checkers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["CONDITIONS", "VerificationReport", "jsonable"]

CONDITIONS = ("E", "LS", "ALS_i", "ALS_ii", "ALS_iii")


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        if z.imag == 0:
            return jsonable(z.real)
        return {"re": jsonable(z.real), "im": jsonable(z.imag)}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a grid scan for one solvability condition.

    The verdict is derived, never supplied: it is ``True`` exactly when
    ``min_singular_value >= threshold``.
    """

    condition: str
    grid: dict
    min_singular_value: float
    witness: dict
    threshold: float
    refinement_ratio: float | None = None
    extra: dict = field(default_factory=dict)
    verdict: bool = field(init=False)

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        object.__setattr__(self, "min_singular_value", float(self.min_singular_value))
        object.__setattr__(self, "verdict", bool(self.min_singular_value >= self.threshold))

    def to_dict(self) -> dict:
        out = {
            "condition": self.condition,
            "grid": self.grid,
            "min_singular_value": self.min_singular_value,
            "witness": self.witness,
            "verdict": "pass" if self.verdict else "fail",
            "threshold": self.threshold,
            "refinement_ratio": self.refinement_ratio,
        }
        out.update(self.extra)
        return jsonable(out)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)
