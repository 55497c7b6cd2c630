"""Plain-text problem descriptions.

Grammar (one statement per line, ``#`` starts a comment)::

    [problem]
    dimE = 1            # dim E
    dimF = 1            # dim F
    n = 2               # spatial dimension
    m = 1               # half order of the interior operator
    eta = 1.0
    p = 2               # optional, default 2
    q = 2               # optional, default 2

    [interior]
    alpha = (2, 0) : 1          # a_alpha, one line per multi-index
    alpha = (0, 2) : 1

    [boundary.0]                # j = 0 .. m, each exactly once
    order = 1
    beta = (0, 1) : -1i         # b_{j beta}
    tangential_order = none     # an integer, or none when C_j = 0
    gamma = (2) : 1             # c_{j gamma}, (n - 1) components

Matrix literals are either a scalar, meaning a multiple of the identity
for square blocks, or a nested bracket list such as ``[[1, 0], [0, 2+1i]]``.
Complex numbers are written ``a+bi``; a bare ``i`` is the imaginary unit.
Unknown sections and keys are rejected, as are repeated multi-indices.
"""
from __future__ import annotations

import ast
import re
from pathlib import Path

import numpy as np

from .symbols import BoundaryOperator, InvariantError, ProblemSpec

__all__ = [
    "ConfigError",
    "parse_problem_spec",
    "load_problem_spec",
    "serialize_problem_spec",
    "parse_complex_matrix",
    "format_complex",
]

_PROBLEM_KEYS = {"dimE": int, "dimF": int, "n": int, "m": int, "eta": float, "p": float, "q": float}
_REQUIRED = ("dimE", "dimF", "n", "m", "eta")
_SECTION = re.compile(r"^\[\s*([A-Za-z]+)(?:\.(\d+))?\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_]+)\s*=\s*(.*)$")
_INDEXED = re.compile(r"^\(([^)]*)\)\s*:\s*(.+)$")
_BARE_I = re.compile(r"(?<![\w.])i\b")
_UNIT = re.compile(r"(?<=[\d.])i\b")


class ConfigError(ValueError):
    """Malformed configuration text; ``line`` and ``field`` locate the problem."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def _check_numeric(node):
    if isinstance(node, list):
        if not node:
            raise ValueError("empty list")
        for v in node:
            _check_numeric(v)
    elif isinstance(node, bool) or not isinstance(node, (int, float, complex)):
        raise ValueError(f"not a number: {node!r}")


def parse_complex_matrix(text: str) -> np.ndarray:
    """Parse a scalar or nested-list complex literal into an array."""
    src = _BARE_I.sub("1j", text.strip())
    src = _UNIT.sub("j", src)
    try:
        value = ast.literal_eval(src)
        _check_numeric(value)
        arr = np.array(value, dtype=complex)
    except (ValueError, SyntaxError, TypeError) as exc:
        raise ValueError(f"bad complex matrix literal {text.strip()!r}") from exc
    if arr.dtype == object or arr.ndim > 2:
        raise ValueError(f"matrix literal must be a scalar or 2-d list: {text.strip()!r}")
    if arr.ndim < 2:
        arr = arr.reshape(1, -1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def _parse_index(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty multi-index")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"multi-index entries must be integers: ({text})") from exc


def _parse_indexed(value: str, field: str, lineno: int, store: dict):
    match = _INDEXED.match(value)
    if not match:
        raise ConfigError("expected '(i1, ..., ik) : <matrix>'", lineno, field)
    try:
        key = _parse_index(match.group(1))
        mat = parse_complex_matrix(match.group(2))
    except ValueError as exc:
        raise ConfigError(str(exc), lineno, field) from None
    if key in store:
        raise ConfigError(f"repeated multi-index {key}", lineno, field)
    store[key] = mat


def _shape_coeffs(coeffs: dict, shape: tuple[int, int], field: str, lines: dict):
    out = {}
    for key, mat in coeffs.items():
        if mat.shape == (1, 1) and shape[0] == shape[1]:
            out[key] = mat[0, 0] * np.eye(shape[0], dtype=complex)
        elif mat.shape == (1, 1) and shape == (1, 1):
            out[key] = mat
        elif mat.shape != shape:
            raise ConfigError(f"coefficient for {key} has shape {mat.shape}, expected {shape}", lines[key], field)
        else:
            out[key] = mat
    return out


def parse_problem_spec(text: str) -> ProblemSpec:
    """Parse configuration text into a validated :class:`ProblemSpec`.

    Raises
    ------
    ConfigError
        Syntax errors, unknown keys, missing sections or badly shaped
        matrices, located by line and field.
    InvariantError
        The description parses but violates a structural invariant.
    """
    problem: dict = {}
    interior: dict = {}
    interior_lines: dict = {}
    boundary: dict[int, dict] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sec = _SECTION.match(line)
        if sec:
            name, idx = sec.group(1), sec.group(2)
            if name in ("problem", "interior") and idx is None:
                section = (name, None)
            elif name == "boundary" and idx is not None:
                j = int(idx)
                if j in boundary:
                    raise ConfigError(f"repeated section [boundary.{j}]", lineno)
                boundary[j] = {"coeffs": {}, "tcoeffs": {}, "lines": {}, "tlines": {}, "line": lineno}
                section = (name, j)
            else:
                raise ConfigError(f"unknown section {line}", lineno)
            continue
        entry = _ENTRY.match(line)
        if not entry:
            raise ConfigError(f"cannot parse {line!r}", lineno)
        key, value = entry.group(1), entry.group(2).strip()
        if section is None:
            raise ConfigError("entry outside of any section", lineno, key)
        name, j = section
        if name == "problem":
            if key not in _PROBLEM_KEYS:
                raise ConfigError("unknown key in [problem]", lineno, key)
            if key in problem:
                raise ConfigError("repeated key", lineno, key)
            try:
                num = _PROBLEM_KEYS[key](value)
            except ValueError:
                raise ConfigError(f"expected {_PROBLEM_KEYS[key].__name__}, got {value!r}", lineno, key) from None
            problem[key] = num
        elif name == "interior":
            if key != "alpha":
                raise ConfigError("unknown key in [interior]", lineno, key)
            before = set(interior)
            _parse_indexed(value, key, lineno, interior)
            interior_lines.update({k: lineno for k in set(interior) - before})
        else:
            sec_data = boundary[j]
            if key == "order":
                if "order" in sec_data:
                    raise ConfigError("repeated key", lineno, key)
                try:
                    sec_data["order"] = int(value)
                except ValueError:
                    raise ConfigError(f"expected int, got {value!r}", lineno, key) from None
            elif key == "tangential_order":
                if "korder" in sec_data:
                    raise ConfigError("repeated key", lineno, key)
                if value.lower() == "none":
                    sec_data["korder"] = None
                else:
                    try:
                        sec_data["korder"] = int(value)
                    except ValueError:
                        raise ConfigError(f"expected int or none, got {value!r}", lineno, key) from None
            elif key == "beta":
                before = set(sec_data["coeffs"])
                _parse_indexed(value, key, lineno, sec_data["coeffs"])
                sec_data["lines"].update({k: lineno for k in set(sec_data["coeffs"]) - before})
            elif key == "gamma":
                before = set(sec_data["tcoeffs"])
                _parse_indexed(value, key, lineno, sec_data["tcoeffs"])
                sec_data["tlines"].update({k: lineno for k in set(sec_data["tcoeffs"]) - before})
            else:
                raise ConfigError(f"unknown key in [boundary.{j}]", lineno, key)

    for key in _REQUIRED:
        if key not in problem:
            raise ConfigError("missing required key in [problem]", None, key)
    dimE, dimF, m = problem["dimE"], problem["dimF"], problem["m"]
    if dimE < 1 or dimF < 1:
        raise InvariantError("dimE, dimF positive", f"{dimE}, {dimF}")
    expected = set(range(m + 1))
    if set(boundary) != expected:
        missing = sorted(expected - set(boundary))
        extra = sorted(set(boundary) - expected)
        raise ConfigError(f"boundary sections must be j = 0..{m}; missing {missing}, unexpected {extra}")
    ops = []
    for j in range(m + 1):
        data = boundary[j]
        if "order" not in data:
            raise ConfigError(f"[boundary.{j}] lacks 'order'", data["line"], "order")
        korder = data.get("korder")
        if "korder" not in data and data["tcoeffs"]:
            raise ConfigError(f"[boundary.{j}] has gamma entries but no tangential_order", data["line"], "tangential_order")
        rows = dimF if j == 0 else dimE
        coeffs = _shape_coeffs(data["coeffs"], (rows, dimE), "beta", data["lines"])
        tcoeffs = _shape_coeffs(data["tcoeffs"], (rows, dimF), "gamma", data["tlines"])
        ops.append(BoundaryOperator(data["order"], coeffs, korder, tcoeffs))
    interior = _shape_coeffs(interior, (dimE, dimE), "alpha", interior_lines)
    return ProblemSpec(
        dimE=dimE,
        dimF=dimF,
        n=problem["n"],
        m=m,
        eta=problem["eta"],
        interior=interior,
        boundary=tuple(ops),
        p=problem.get("p", 2.0),
        q=problem.get("q", 2.0),
    )


def load_problem_spec(path) -> ProblemSpec:
    return parse_problem_spec(Path(path).read_text())


def format_complex(z: complex) -> str:
    """Shortest round-tripping ``a+bi`` rendering of ``z``."""
    z = complex(z)
    re_, im = z.real, z.imag
    if im == 0:
        return repr(re_)
    if re_ == 0:
        return f"{im!r}i"
    sign = "+" if im >= 0 else ""
    return f"{re_!r}{sign}{im!r}i"


def _format_matrix(mat: np.ndarray) -> str:
    return "[" + ", ".join("[" + ", ".join(format_complex(v) for v in row) + "]" for row in mat) + "]"


def _format_index(idx) -> str:
    return "(" + ", ".join(str(i) for i in idx) + ")"


def serialize_problem_spec(spec: ProblemSpec) -> str:
    """Render ``spec`` in the configuration grammar; parsing it back is exact."""
    out = [
        "[problem]",
        f"dimE = {spec.dimE}",
        f"dimF = {spec.dimF}",
        f"n = {spec.n}",
        f"m = {spec.m}",
        f"eta = {spec.eta!r}",
        f"p = {spec.p!r}",
        f"q = {spec.q!r}",
        "",
        "[interior]",
    ]
    out += [f"alpha = {_format_index(a)} : {_format_matrix(c)}" for a, c in spec.interior.items()]
    for j, op in enumerate(spec.boundary):
        out += ["", f"[boundary.{j}]", f"order = {op.order}"]
        out += [f"beta = {_format_index(b)} : {_format_matrix(c)}" for b, c in op.coeffs.items()]
        korder = "none" if op.tangential_order is None else str(op.tangential_order)
        out.append(f"tangential_order = {korder}")
        out += [f"gamma = {_format_index(g)} : {_format_matrix(c)}" for g, c in op.tangential_coeffs.items()]
    return "\n".join(out) + "\n"
