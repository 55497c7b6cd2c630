"""Constant-coefficient operator triples and their symbols.

A problem is described by an interior operator ``A(D)`` of order ``2m``
acting on ``E = C^dimE``, boundary operators ``B_j(D)`` of order ``m_j``
and tangential operators ``C_j(D_Gamma)`` of order ``k_j`` for
``j = 0, ..., m``.  The half-space is ``{x = (x', y) : y > 0}`` and
``D = -i grad``; the last component of every interior or boundary
multi-index is the normal (``y``) direction.

A tangential order ``k_j`` is ``None`` when ``C_j = 0`` (the order is
minus infinity in that case).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .reports import VerificationReport

__all__ = [
    "InvariantError",
    "BoundaryOperator",
    "ProblemSpec",
    "FunctionSpaceSpec",
    "monomial",
    "evaluate_interior_symbol",
    "interior_symbol",
    "normal_coefficients",
    "boundary_normal_coefficients",
    "tangential_symbol",
    "sphere_points",
    "check_ellipticity",
]


class InvariantError(ValueError):
    """A problem description violates one of its structural invariants."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        msg = f"invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def _freeze_coeffs(coeffs: Mapping, shape: tuple[int, int], width: int, what: str):
    frozen = {}
    for key, mat in coeffs.items():
        key = tuple(int(k) for k in key)
        if len(key) != width or any(k < 0 for k in key):
            raise InvariantError(f"{what} multi-index has {width} nonnegative components", str(key))
        arr = np.array(mat, dtype=complex)
        if arr.ndim == 0:
            if shape[0] != shape[1]:
                raise InvariantError(f"{what} coefficient shape {shape}", f"scalar given for {key}")
            arr = arr * np.eye(shape[0], dtype=complex)
        if arr.shape != shape:
            raise InvariantError(f"{what} coefficient shape {shape}", f"got {arr.shape} for {key}")
        if not np.all(np.isfinite(arr)):
            raise InvariantError(f"{what} coefficients are finite", str(key))
        arr.setflags(write=False)
        frozen[key] = arr
    return MappingProxyType(dict(sorted(frozen.items())))


def _coeffs_equal(a: Mapping, b: Mapping) -> bool:
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """One boundary row ``B_j(D) u + C_j(D_Gamma) rho``.

    ``coeffs`` maps ``beta`` (n components) to ``b_{j beta}``;
    ``tangential_coeffs`` maps ``gamma`` (n - 1 components) to
    ``c_{j gamma}``.  ``tangential_order`` is ``None`` exactly when
    ``tangential_coeffs`` is empty.
    """

    order: int
    coeffs: Mapping[tuple[int, ...], np.ndarray]
    tangential_order: int | None = None
    tangential_coeffs: Mapping[tuple[int, ...], np.ndarray] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, BoundaryOperator):
            return NotImplemented
        return (
            self.order == other.order
            and self.tangential_order == other.tangential_order
            and _coeffs_equal(self.coeffs, other.coeffs)
            and _coeffs_equal(self.tangential_coeffs, other.tangential_coeffs)
        )

    __hash__ = None


@dataclass(frozen=True)
class FunctionSpaceSpec:
    """Integrability exponents and the derived trace exponents ``kappa_j``."""

    p: float
    q: float
    kappa: tuple[float, ...]
    l: int

    def __post_init__(self):
        if not all(0.0 < k < 1.0 for k in self.kappa):
            raise InvariantError("kappa_j in (0, 1)", str(self.kappa))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Validated constant-coefficient problem ``(A, {B_j}, {C_j})``.

    Construction runs every structural check; an instance is immutable.
    Lower-order interior and boundary terms are allowed; the solvability
    checks only look at principal parts.
    """

    dimE: int
    dimF: int
    n: int
    m: int
    eta: float
    interior: Mapping[tuple[int, ...], np.ndarray]
    boundary: tuple[BoundaryOperator, ...]
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        if self.dimE < 1 or self.dimF < 1:
            raise InvariantError("dimE, dimF positive", f"{self.dimE}, {self.dimF}")
        if self.n < 2:
            raise InvariantError("spatial dimension n >= 2", str(self.n))
        if self.m < 1:
            raise InvariantError("m positive", str(self.m))
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise InvariantError("eta > 0", str(self.eta))
        for name, val in (("p", self.p), ("q", self.q)):
            if not (1.0 < val < math.inf):
                raise InvariantError(f"{name} in (1, inf)", str(val))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))

        interior = _freeze_coeffs(self.interior, (self.dimE, self.dimE), self.n, "interior")
        for alpha in interior:
            if sum(alpha) > 2 * self.m:
                raise InvariantError("interior multi-indices satisfy |alpha| <= 2m", str(alpha))
        object.__setattr__(self, "interior", interior)
        if not any(sum(a) == 2 * self.m and np.any(c) for a, c in interior.items()):
            raise InvariantError("principal interior part present")
        a0 = self.leading_coefficient
        if a0 is None:
            raise InvariantError("pure-normal coefficient a_0 present")
        if np.linalg.cond(a0) > 1e12:
            raise InvariantError("pure-normal coefficient a_0 invertible")

        boundary = tuple(self.boundary)
        if len(boundary) != self.m + 1:
            raise InvariantError("boundary rows j = 0..m", f"got {len(boundary)} rows for m = {self.m}")
        frozen = []
        for j, op in enumerate(boundary):
            rows = self.dimF if j == 0 else self.dimE
            tshape = (self.dimF, self.dimF) if j == 0 else (self.dimE, self.dimF)
            if not (0 <= op.order < 2 * self.m):
                raise InvariantError("boundary order m_j in [0, 2m)", f"j = {j}, m_j = {op.order}")
            coeffs = _freeze_coeffs(op.coeffs, (rows, self.dimE), self.n, f"boundary {j}")
            for beta in coeffs:
                if sum(beta) > op.order:
                    raise InvariantError("boundary multi-indices satisfy |beta| <= m_j", f"j = {j}, {beta}")
            if not any(sum(b) == op.order and np.any(c) for b, c in coeffs.items()):
                raise InvariantError("all B_j nontrivial", f"j = {j} has no principal part")
            tcoeffs = _freeze_coeffs(op.tangential_coeffs, tshape, self.n - 1, f"tangential {j}")
            korder = op.tangential_order
            if (korder is None) != (len(tcoeffs) == 0):
                raise InvariantError("k_j absent exactly when C_j is empty", f"j = {j}")
            if korder is not None:
                if korder < 0:
                    raise InvariantError("k_j nonnegative or absent", f"j = {j}")
                for gamma in tcoeffs:
                    if sum(gamma) > korder:
                        raise InvariantError("tangential multi-indices satisfy |gamma| <= k_j", f"j = {j}, {gamma}")
                if not any(sum(g) == korder and np.any(c) for g, c in tcoeffs.items()):
                    raise InvariantError("C_j principal part nonzero", f"j = {j}")
            frozen.append(BoundaryOperator(op.order, coeffs, korder, tcoeffs))
        object.__setattr__(self, "boundary", tuple(frozen))
        if all(op.tangential_order is None for op in self.boundary):
            raise InvariantError("at least one C_j nontrivial")
        if self.l < 0:
            raise InvariantError("l >= 0", f"l = {self.l}")
        self.function_spaces()

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return (
            (self.dimE, self.dimF, self.n, self.m, self.eta, self.p, self.q)
            == (other.dimE, other.dimF, other.n, other.m, other.eta, other.p, other.q)
            and _coeffs_equal(self.interior, other.interior)
            and self.boundary == other.boundary
        )

    __hash__ = None

    @property
    def leading_coefficient(self) -> np.ndarray | None:
        """The coefficient ``a_0`` of ``D_y^{2m}``."""
        return self.interior.get((0,) * (self.n - 1) + (2 * self.m,))

    @property
    def boundary_orders(self) -> tuple[int, ...]:
        return tuple(op.order for op in self.boundary)

    @property
    def tangential_orders(self) -> tuple[int | None, ...]:
        return tuple(op.tangential_order for op in self.boundary)

    @property
    def l_orders(self) -> tuple[int | None, ...]:
        """``l_j = k_j - m_j + m_0``; ``None`` where ``C_j = 0``."""
        m0 = self.boundary[0].order
        return tuple(
            None if op.tangential_order is None else op.tangential_order - op.order + m0
            for op in self.boundary
        )

    @property
    def l(self) -> int:
        return max(lj for lj in self.l_orders if lj is not None)

    @property
    def kappa(self) -> tuple[float, ...]:
        two_m = 2 * self.m
        return tuple(1.0 - mj / two_m - 1.0 / (two_m * self.q) for mj in self.boundary_orders)

    @property
    def stable_rank(self) -> int:
        return self.m * self.dimE

    @property
    def boundary_rows(self) -> int:
        """Number of scalar boundary equations, ``dimF + m dimE``."""
        return self.dimF + self.m * self.dimE

    def row_slices(self) -> list[slice]:
        """Row ranges of the boundary blocks ``j = 0..m`` in stacked systems."""
        out = [slice(0, self.dimF)]
        for j in range(1, self.m + 1):
            start = self.dimF + (j - 1) * self.dimE
            out.append(slice(start, start + self.dimE))
        return out

    def function_spaces(self) -> FunctionSpaceSpec:
        return FunctionSpaceSpec(self.p, self.q, self.kappa, self.l)

    def with_eta(self, eta: float) -> "ProblemSpec":
        return replace(self, eta=eta)


def monomial(x: np.ndarray, alpha: Sequence[int]):
    """``x^alpha`` with ``0^0 = 1``; ``x`` may carry leading batch axes."""
    x = np.asarray(x)
    out = np.ones(x.shape[:-1], dtype=np.result_type(x, float))
    for i, a in enumerate(alpha):
        if a:
            out = out * x[..., i] ** a
    return out


def interior_symbol(spec: ProblemSpec, xi, principal: bool = True) -> np.ndarray:
    """``sum_alpha a_alpha xi^alpha``, summed over ``|alpha| = 2m`` when ``principal``."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1] + (spec.dimE, spec.dimE), dtype=complex)
    for alpha, coeff in spec.interior.items():
        if principal and sum(alpha) != 2 * spec.m:
            continue
        out = out + monomial(xi, alpha)[..., None, None] * coeff
    return out


def evaluate_interior_symbol(spec: ProblemSpec, xi) -> np.ndarray:
    """Principal interior symbol ``A_#(xi) = sum_{|alpha|=2m} a_alpha xi^alpha``."""
    return interior_symbol(spec, xi, principal=True)


def normal_coefficients(spec: ProblemSpec, xi_prime, principal: bool = True) -> list[np.ndarray]:
    """Coefficients ``p_k`` of ``A(xi', D_y) = sum_k p_k D_y^k`` for ``k = 0..2m``.

    With ``principal=True`` the entry ``p_{2m-k}`` is the degree-``k``
    homogeneous polynomial ``a_k(xi')`` of the companion construction.
    """
    xi_prime = np.asarray(xi_prime, dtype=float)
    out = [np.zeros((spec.dimE, spec.dimE), dtype=complex) for _ in range(2 * spec.m + 1)]
    for alpha, coeff in spec.interior.items():
        if principal and sum(alpha) != 2 * spec.m:
            continue
        out[alpha[-1]] = out[alpha[-1]] + monomial(xi_prime, alpha[:-1]) * coeff
    return out


def boundary_normal_coefficients(spec: ProblemSpec, j: int, xi_prime, principal: bool = True) -> list[np.ndarray]:
    """Coefficients of ``B_j(xi', D_y) = sum_k q_k D_y^k`` for ``k = 0..m_j``."""
    op = spec.boundary[j]
    xi_prime = np.asarray(xi_prime, dtype=float)
    rows = spec.dimF if j == 0 else spec.dimE
    out = [np.zeros((rows, spec.dimE), dtype=complex) for _ in range(op.order + 1)]
    for beta, coeff in op.coeffs.items():
        if principal and sum(beta) != op.order:
            continue
        out[beta[-1]] = out[beta[-1]] + monomial(xi_prime, beta[:-1]) * coeff
    return out


def tangential_symbol(spec: ProblemSpec, j: int, xi_prime, principal: bool = True) -> np.ndarray:
    """``C_j(xi') = sum_gamma c_{j gamma} xi'^gamma``; zero when ``C_j`` is absent.

    ``xi_prime`` may carry leading batch axes.
    """
    op = spec.boundary[j]
    xi_prime = np.asarray(xi_prime, dtype=float)
    rows = spec.dimF if j == 0 else spec.dimE
    out = np.zeros(xi_prime.shape[:-1] + (rows, spec.dimF), dtype=complex)
    for gamma, coeff in op.tangential_coeffs.items():
        if principal and sum(gamma) != op.tangential_order:
            continue
        out = out + monomial(xi_prime, gamma)[..., None, None] * coeff
    return out


_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def sphere_points(dim: int, count: int) -> np.ndarray:
    """Deterministic, roughly uniform points on the unit sphere in ``R^dim``.

    Circle: equally spaced angles.  ``S^2``: Fibonacci lattice.  Higher
    dimensions: an unscrambled Halton sequence pushed through the normal
    quantile function and normalised.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if dim == 1:
        pts = np.array([[1.0], [-1.0]])
        return pts[: max(1, min(count, 2))] if count < 2 else pts
    if dim == 2:
        ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    if dim == 3:
        i = np.arange(count)
        z = 1.0 - (2.0 * i + 1.0) / count
        r = np.sqrt(1.0 - z * z)
        phi = i * _GOLDEN_ANGLE
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    from scipy.stats import norm, qmc

    u = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def check_ellipticity(spec: ProblemSpec, sphere_samples: int = 256, margin: float = 1e-8) -> VerificationReport:
    """Normal ellipticity of the principal interior symbol on sampled unit vectors.

    Every eigenvalue ``z`` of ``A_#(xi)``, ``|xi| = 1``, must satisfy
    ``Re z > 0`` and ``|arg z| < pi/2 - margin``.  The scanned quantity
    stored as ``min_singular_value`` is the angular gap
    ``min (pi/2 - |arg z|)``; the verdict passes iff it is at least ``margin``.
    """
    if sphere_samples < 1:
        raise ValueError("sphere_samples must be >= 1")
    xi = sphere_points(spec.n, sphere_samples)
    eig = np.linalg.eigvals(evaluate_interior_symbol(spec, xi))
    args = np.abs(np.angle(eig))
    gaps = np.where(eig.real > 0, np.pi / 2 - args, -np.inf)
    gaps = np.where(np.abs(eig) == 0, -np.inf, gaps)
    flat = int(np.argmin(gaps))
    i, k = np.unravel_index(flat, gaps.shape)
    worst = float(gaps[i, k])
    return VerificationReport(
        condition="E",
        grid={"sphere_samples": int(sphere_samples), "n": spec.n, "margin": margin},
        min_singular_value=worst if np.isfinite(worst) else -np.pi / 2,
        witness={"xi": xi[i].tolist(), "eigenvalue": complex(eig[i, k])},
        threshold=margin,
        extra={
            "min_real_part": float(eig.real.min()),
            "max_abs_arg": float(args.max()),
        },
    )
