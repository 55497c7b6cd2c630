"""Boundary solvability matrices and uniform-invertibility scans.

At a mode ``(xi', lambda)`` the boundary rows act on a decaying solution
``w(y) = exp(mu i A0 y) w0`` with ``P_plus w0 = 0`` and on the surface
unknown.  Writing ``w0 = S c`` with the orthonormal stable basis ``S`` and
``sigma0 = (lambda + mu^l) mu^{-m_0} sigma``, the rows divided by
``mu^{m_j}`` read::

    B_0(zeta) S c + (nu + C_0(zeta) mu^{l_0 - l}) / (nu + 1) sigma0 = h_0^0
    B_j(zeta) S c + C_j(zeta) mu^{l_j - l} / (nu + 1) sigma0 = h_j^0

with ``mu^{l_j - l} = eta^{(l_j - l)/2m} a_tilde^{l - l_j}``.  Every
coefficient depends continuously on ``(zeta, a_tilde, nu)`` on a compact
set whose boundary faces (``a_tilde = 0`` and ``|nu| = oo``) are the
limit problems, so a uniform lower bound on the smallest singular value
over a fine grid is the numerical surrogate for a uniformly bounded
solution operator.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .companion import (
    CompanionSystem,
    ModeParameters,
    build_companion,
    mode_companion,
    stable_projection,
)
from .reports import VerificationReport, jsonable
from .symbols import (
    ProblemSpec,
    boundary_normal_coefficients,
    sphere_points,
    tangential_symbol,
)

__all__ = [
    "PreconditionError",
    "BoundaryMatrix",
    "ScanGrid",
    "LIMIT_CASES",
    "row_operator",
    "sigma_factors",
    "assemble_boundary_matrix",
    "assemble_limit_matrix",
    "assemble_raw_boundary_matrix",
    "check_LS",
    "check_ALS",
    "MultiplierBoundReport",
    "multiplier_bound_scan",
]

LIMIT_CASES = ("i_finite_mu", "i_infinite_mu", "ii", "iii")
_SPHERE_TOL = 1e-12


class PreconditionError(ValueError):
    """A scan or assembly was requested outside its domain."""


def row_operator(spec: ProblemSpec, zeta, rows=None) -> np.ndarray:
    """Stacked principal boundary rows ``B_j(zeta)`` acting on ``w`` in ``E^{2m}``.

    The block of ``B_j(zeta)`` at position ``k`` is the principal coefficient
    of ``D_y^k``.  ``rows`` selects the boundary indices (default ``0..m``).
    """
    rows = range(spec.m + 1) if rows is None else rows
    N = 2 * spec.m * spec.dimE
    d = spec.dimE
    blocks = []
    for j in rows:
        coeffs = boundary_normal_coefficients(spec, j, zeta, principal=True)
        B = np.zeros((coeffs[0].shape[0], N), dtype=complex)
        for k, q in enumerate(coeffs):
            B[:, k * d:(k + 1) * d] = q
        blocks.append(B)
    return np.vstack(blocks)


def sigma_factors(spec: ProblemSpec, a_tilde: float, eta) -> np.ndarray:
    """``eta^{(l_j - l)/2m} a_tilde^{l - l_j}`` for each row, zero where ``C_j = 0``.

    ``eta`` may be an array; the result has shape ``eta.shape + (m + 1,)``.
    At ``a_tilde = 0`` this reduces to the Kronecker delta ``delta_{l, l_j}``.
    """
    eta = np.asarray(eta, dtype=float)
    two_m = 2 * spec.m
    out = np.zeros(eta.shape + (spec.m + 1,))
    for j, lj in enumerate(spec.l_orders):
        if lj is None:
            continue
        if a_tilde == 0.0:
            out[..., j] = 1.0 if lj == spec.l else 0.0
        else:
            out[..., j] = eta ** ((lj - spec.l) / two_m) * a_tilde ** (spec.l - lj)
    return out


def _sigma_column(spec: ProblemSpec, C: list[np.ndarray], factors: np.ndarray, nu) -> np.ndarray:
    """Scaled sigma columns, shape ``broadcast(factors[..., 0], nu) + (rows, dimF)``.

    ``nu = inf`` gives the unit column of the ``|nu| -> oo`` face.
    """
    nu = np.asarray(nu, dtype=complex)
    shape = np.broadcast_shapes(factors.shape[:-1], nu.shape)
    out = np.zeros(shape + (spec.boundary_rows, spec.dimF), dtype=complex)
    inf = np.isinf(nu)
    nu_f = np.where(inf, 0.0, nu)
    denom = 1.0 / (nu_f + 1.0)
    slices = spec.row_slices()
    eye = np.eye(spec.dimF)
    for j, sl in enumerate(slices):
        col = factors[..., j, None, None] * C[j] * denom[..., None, None]
        if j == 0:
            col = col + (nu_f * denom)[..., None, None] * eye
            col = np.where(inf[..., None, None], eye, col)
        else:
            col = np.where(inf[..., None, None], 0.0, col)
        out[..., sl, :] = np.broadcast_to(col, shape + col.shape[-2:])
    return out


@dataclass(frozen=True)
class BoundaryMatrix:
    """Scaled boundary system acting on ``(c, sigma0)`` with ``w0 = S c``.

    ``rhs_scaling`` holds the per-row factors ``mu^{-m_j}`` taking raw data
    ``h`` to ``h^0``; it and ``sigma_scale`` (``sigma = sigma_scale sigma0``)
    are ``None`` on limit faces where no finite mode corresponds.
    """

    M: np.ndarray
    stable_basis: np.ndarray
    params: dict
    n_sigma: int
    rhs_scaling: np.ndarray | None = None
    sigma_scale: complex | None = None

    @property
    def n_stable(self) -> int:
        return self.stable_basis.shape[1]

    @property
    def smallest_singular_value(self) -> float:
        return float(np.linalg.svd(self.M, compute_uv=False)[-1])

    def solve(self, h0) -> tuple[np.ndarray, np.ndarray]:
        """Solve the scaled system; returns ``(w0, sigma0)`` with ``w0 = S c``."""
        x = np.linalg.solve(self.M, np.asarray(h0, dtype=complex))
        return self.stable_basis @ x[: self.n_stable], x[self.n_stable:]

    def solve_raw(self, h) -> tuple[np.ndarray, np.ndarray]:
        """Solve for raw data ``h``; returns ``(w0, sigma)``."""
        if self.rhs_scaling is None:
            raise PreconditionError("limit matrices have no raw counterpart")
        w0, s0 = self.solve(self.rhs_scaling * np.asarray(h, dtype=complex))
        return w0, self.sigma_scale * s0

    def multiplier(self) -> np.ndarray:
        """``(M_w^0; M_sigma^0)``: the map ``h^0 -> (w0, sigma0)``."""
        X = np.linalg.inv(self.M)
        return np.vstack([self.stable_basis @ X[: self.n_stable], X[self.n_stable:]])

    def unscaled(self) -> np.ndarray:
        """Raw boundary matrix on ``(c, sigma)``: rows times ``mu^{m_j}``, sigma unscaled."""
        if self.rhs_scaling is None:
            raise PreconditionError("limit matrices have no raw counterpart")
        raw = self.M / self.rhs_scaling[:, None]
        if self.n_sigma:
            raw[:, self.n_stable:] = raw[:, self.n_stable:] / self.sigma_scale
        return raw


def _row_scaling(spec: ProblemSpec, mu: float) -> np.ndarray:
    out = np.empty(spec.boundary_rows)
    for j, sl in enumerate(spec.row_slices()):
        out[sl] = mu ** (-spec.boundary[j].order)
    return out


def _principal_C(spec: ProblemSpec, zeta) -> list[np.ndarray]:
    return [tangential_symbol(spec, j, zeta, principal=True) for j in range(spec.m + 1)]


def assemble_boundary_matrix(spec: ProblemSpec, sys: CompanionSystem, params: ModeParameters) -> BoundaryMatrix:
    """Scaled boundary matrix at a finite mode, or the ``|nu| = oo`` face if ``params.nu`` is infinite."""
    S = sys.stable_basis
    if S.shape != (2 * spec.m * spec.dimE, spec.stable_rank):
        raise PreconditionError(f"stable basis has shape {S.shape}, expected {(2 * spec.m * spec.dimE, spec.stable_rank)}")
    zeta = np.atleast_1d(params.zeta)
    BS = row_operator(spec, zeta) @ S
    factors = sigma_factors(spec, params.a_tilde, params.eta)
    col = _sigma_column(spec, _principal_C(spec, zeta), factors, params.nu)
    M = np.hstack([BS, col])
    info = {"zeta": zeta.tolist(), "a_tilde": params.a_tilde, "nu": params.nu, "eta": params.eta}
    if math.isinf(abs(params.nu)):
        return BoundaryMatrix(M, S, info, spec.dimF)
    sigma_scale = params.mu ** spec.boundary[0].order / (params.lam + params.mu**spec.l)
    return BoundaryMatrix(M, S, info, spec.dimF, _row_scaling(spec, params.mu), sigma_scale)


def _check_sphere(zeta):
    if abs(np.linalg.norm(zeta) - 1.0) > _SPHERE_TOL:
        raise PreconditionError(f"limit case requires |zeta| = 1, got {np.linalg.norm(zeta)!r}")


def assemble_limit_matrix(
    spec: ProblemSpec,
    zeta,
    case: str,
    c: complex | None = None,
    a: float | None = None,
    sys: CompanionSystem | None = None,
) -> BoundaryMatrix:
    """Boundary matrix of one limit problem.

    Parameters
    ----------
    case
        ``"i_finite_mu"``: ``|nu| -> oo`` at fixed ``(zeta, a)``, ``a > 0``;
        ``"i_infinite_mu"``: the same at ``a = 0``, ``|zeta| = 1``;
        ``"ii"``: ``lambda/mu^l -> c`` while ``a -> 0``, ``|zeta| = 1``;
        ``"iii"``: rows ``j = 1..m`` only at ``a = 0``, ``|zeta| = 1``.
    c
        Limit value of ``nu`` for case ``"ii"``.
    a
        Value of ``a`` for case ``"i_finite_mu"``.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if case not in LIMIT_CASES:
        raise PreconditionError(f"unknown limit case {case!r}")
    if case == "i_finite_mu":
        if a is None or not (0.0 < a <= 1.0):
            raise PreconditionError("case i_finite_mu needs a in (0, 1]")
    else:
        _check_sphere(zeta)
        a = 0.0
    if sys is None:
        sys = stable_projection(build_companion(spec, zeta, a))
    S = sys.stable_basis
    params = {"zeta": zeta.tolist(), "a_tilde": a ** (1.0 / (2 * spec.m)), "case": case}
    if case == "iii":
        R = row_operator(spec, zeta, rows=range(1, spec.m + 1))
        if R.shape[0] != S.shape[1]:
            raise PreconditionError(f"{R.shape[0]} elliptic rows against stable rank {S.shape[1]}")
        return BoundaryMatrix(R @ S, S, params, 0)
    BS = row_operator(spec, zeta) @ S
    if case == "ii":
        if c is None:
            raise PreconditionError("case ii needs the limit value c")
        nu = complex(c)
        params["c"] = nu
    else:
        nu = complex(math.inf)
    factors = sigma_factors(spec, 0.0, 1.0)
    col = _sigma_column(spec, _principal_C(spec, zeta), factors, nu)
    return BoundaryMatrix(np.hstack([BS, col]), S, params, spec.dimF)


def assemble_raw_boundary_matrix(
    spec: ProblemSpec,
    xi_prime,
    lam: complex,
    eta: float | None = None,
    basis: np.ndarray | None = None,
    principal: bool = True,
) -> np.ndarray:
    """Unscaled boundary matrix ``[B_j(xi', D_y) v | (lambda + C_0) ; C_j]``.

    ``basis`` lists candidate solutions by their normal derivatives at
    ``y = 0``: column ``r`` stacks ``D_y^k v_r(0)`` for ``k = 0..2m-1``.  By
    default it is built from the stable subspace of the companion matrix in
    physical variables, with no ``(zeta, a_tilde, nu)`` substitution.
    """
    eta = spec.eta if eta is None else eta
    xi = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    d = spec.dimE
    if basis is None:
        A, mu = mode_companion(spec, xi, eta, principal=True)
        S = stable_projection(A).stable_basis
        scale = np.repeat(mu ** np.arange(2 * spec.m, dtype=float), d)
        basis = scale[:, None] * S
    basis = np.asarray(basis, dtype=complex)
    blocks = []
    for j in range(spec.m + 1):
        coeffs = boundary_normal_coefficients(spec, j, xi, principal=principal)
        row = sum(q @ basis[k * d:(k + 1) * d] for k, q in enumerate(coeffs))
        C = tangential_symbol(spec, j, xi, principal=principal)
        if j == 0:
            C = C + lam * np.eye(spec.dimF)
        blocks.append(np.hstack([row, C]))
    return np.vstack(blocks)


@dataclass(frozen=True)
class ScanGrid:
    """Parameter grid for the solvability scans.

    ``|zeta|`` runs over ``linspace(0, 1, n_zeta)`` along a fixed set of
    unit directions, with ``a = 1 - |zeta|^{2m}`` (the two are tied by
    ``|zeta|^{2m} + a = 1``); the endpoint ``|zeta| = 1`` is the ``a = 0``
    limit face.  ``nu = r e^{i phi}`` with ``r`` geometric on
    ``nu_r_range`` and ``phi`` uniform on ``[-theta, theta]``, plus
    ``nu = 0`` and the ``|nu| = oo`` face.  ``eta`` is geometric on
    ``eta_range``.  Counts ``c`` refine to ``2c - 1`` so grids nest.
    """

    n_zeta: int = 33
    n_nu_r: int = 33
    n_nu_phi: int = 17
    n_eta: int = 9
    theta: float = 3 * math.pi / 4
    nu_r_range: tuple[float, float] = (1e-3, 1e3)
    eta_range: tuple[float, float] = (1e-2, 1e4)
    n_directions: int | None = None
    rel_threshold: float = 1e-6

    def __post_init__(self):
        for name in ("n_zeta", "n_nu_r", "n_nu_phi", "n_eta"):
            if getattr(self, name) < 2:
                raise PreconditionError(f"{name} must be >= 2")
        if not (math.pi / 2 < self.theta < math.pi):
            raise PreconditionError("theta must lie in (pi/2, pi)")
        lo, hi = self.eta_range
        if not (0 < lo <= hi and math.isfinite(hi)):
            raise PreconditionError(f"eta range must be positive and finite, got {self.eta_range}")
        lo, hi = self.nu_r_range
        if not (0 < lo <= hi and math.isfinite(hi)):
            raise PreconditionError(f"nu radius range must be positive and finite, got {self.nu_r_range}")
        if not self.rel_threshold > 0:
            raise PreconditionError("rel_threshold must be positive")

    def radii(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_zeta)

    def directions(self, n: int) -> np.ndarray:
        """Unit tangential directions in ``R^{n-1}``."""
        if n == 2:
            return np.array([[1.0], [-1.0]])
        count = self.n_directions or 4 * (n - 1) ** 2
        return sphere_points(n - 1, count)

    def nu_values(self) -> np.ndarray:
        """Finite ``nu`` samples: ``0`` followed by the polar grid, row-major in ``(r, phi)``."""
        r = np.geomspace(*self.nu_r_range, self.n_nu_r)
        phi = np.linspace(-self.theta, self.theta, self.n_nu_phi)
        polar = (r[:, None] * np.exp(1j * phi[None, :])).ravel()
        return np.concatenate([[0.0], polar])

    def etas(self) -> np.ndarray:
        return np.geomspace(*self.eta_range, self.n_eta)

    def refined(self) -> "ScanGrid":
        return replace(
            self,
            n_zeta=2 * self.n_zeta - 1,
            n_nu_r=2 * self.n_nu_r - 1,
            n_nu_phi=2 * self.n_nu_phi - 1,
            n_eta=2 * self.n_eta - 1,
        )

    def describe(self) -> dict:
        return {
            "zeta_radii": {"range": [0.0, 1.0], "count": self.n_zeta},
            "nu": {
                "r_range": list(self.nu_r_range),
                "r_count": self.n_nu_r,
                "phi_range": [-self.theta, self.theta],
                "phi_count": self.n_nu_phi,
                "extra": ["0", "inf"],
            },
            "eta": {"range": list(self.eta_range), "count": self.n_eta},
            "theta": self.theta,
            "n_directions": self.n_directions,
            "rel_threshold": self.rel_threshold,
        }


@dataclass
class _Tracker:
    """Running minimum of singular values and maximum of norms, in scan order."""

    smin: float = math.inf
    norm_max: float = 0.0
    witness: dict = field(default_factory=dict)

    def update(self, mats: np.ndarray, witness_of) -> None:
        if mats.size == 0:
            return
        sv = np.linalg.svd(mats, compute_uv=False)
        self.norm_max = max(self.norm_max, float(sv[..., 0].max()))
        low = sv[..., -1]
        idx = int(np.argmin(low))
        if low.flat[idx] < self.smin:
            self.smin = float(low.flat[idx])
            self.witness = witness_of(np.unravel_index(idx, low.shape))

    def report(self, condition: str, grid: dict, rel: float) -> VerificationReport:
        threshold = rel * self.norm_max if self.norm_max > 0 else rel
        return VerificationReport(
            condition=condition,
            grid=grid,
            min_singular_value=self.smin,
            witness=jsonable(self.witness),
            threshold=threshold,
            extra={"max_matrix_norm": self.norm_max, "rel_threshold": rel},
        )


def _scan_points(spec: ProblemSpec, grid: ScanGrid):
    """Yield ``(b, zeta, a, a_tilde, sys)`` in canonical order."""
    two_m = 2 * spec.m
    for b in grid.radii():
        for direction in grid.directions(spec.n):
            zeta = b * direction
            a = 0.0 if b == 1.0 else 1.0 - b**two_m
            sys = stable_projection(build_companion(spec, zeta, a))
            yield float(b), zeta, a, a ** (1.0 / two_m), sys


def _ls_stack(spec, BS, C, a_tilde, etas, nus):
    factors = sigma_factors(spec, a_tilde, etas)[:, None, :]
    col = _sigma_column(spec, C, factors, nus[None, :])
    BSb = np.broadcast_to(BS, col.shape[:2] + BS.shape)
    return np.concatenate([BSb, col], axis=-1)


def check_LS(spec: ProblemSpec, grid: ScanGrid | None = None) -> VerificationReport:
    """Minimum smallest singular value of the scaled boundary matrix over the grid.

    The ``a = 0`` face (``|zeta| = 1``) and the ``|nu| = oo`` face are
    evaluated with the corresponding limit matrices.
    """
    grid = ScanGrid() if grid is None else grid
    etas, nus = grid.etas(), grid.nu_values()
    track = _Tracker()
    for b, zeta, a, a_tilde, sys in _scan_points(spec, grid):
        BS = row_operator(spec, zeta) @ sys.stable_basis
        C = _principal_C(spec, zeta)
        mats = _ls_stack(spec, BS, C, a_tilde, etas, nus)
        face = "ii" if a == 0.0 else "interior"

        def witness(ix, zeta=zeta, a_tilde=a_tilde, face=face):
            return {"zeta": zeta, "a_tilde": a_tilde, "nu": nus[ix[1]], "eta": etas[ix[0]], "face": face}

        track.update(mats, witness)
        inf_col = _sigma_column(spec, C, sigma_factors(spec, a_tilde, 1.0), np.inf)
        inf_face = "i_infinite_mu" if a == 0.0 else "i_finite_mu"

        def witness_inf(ix, zeta=zeta, a_tilde=a_tilde, face=inf_face):
            return {"zeta": zeta, "a_tilde": a_tilde, "nu": math.inf, "eta": None, "face": face}

        track.update(np.hstack([BS, inf_col])[None], witness_inf)
    return track.report("LS", grid.describe(), grid.rel_threshold)


def check_ALS(spec: ProblemSpec, grid: ScanGrid | None = None) -> list[VerificationReport]:
    """Reports for the three limit families ``ALS_i``, ``ALS_ii``, ``ALS_iii``.

    ``ALS_i`` scans the elliptic rows ``j = 1..m`` against the stable basis
    over ``|zeta| < 1``.  ``ALS_ii`` is limit case ii at ``|zeta| = 1`` for
    ``c`` in ``{0}`` and the finite ``nu`` grid.  ``ALS_iii`` is limit case
    iii at ``|zeta| = 1``.
    """
    grid = ScanGrid() if grid is None else grid
    nus = grid.nu_values()
    fam1, fam2, fam3 = _Tracker(), _Tracker(), _Tracker()
    elliptic = range(1, spec.m + 1)
    for b, zeta, a, a_tilde, sys in _scan_points(spec, grid):
        S = sys.stable_basis
        R = row_operator(spec, zeta, rows=elliptic) @ S
        if a > 0.0:
            fam1.update(R[None], lambda ix, zeta=zeta, a_tilde=a_tilde: {"zeta": zeta, "a_tilde": a_tilde, "nu": None, "eta": None})
            continue
        fam3.update(R[None], lambda ix, zeta=zeta: {"zeta": zeta, "a_tilde": 0.0, "nu": None, "eta": None})
        BS = row_operator(spec, zeta) @ S
        C = _principal_C(spec, zeta)
        mats = np.concatenate(
            [np.broadcast_to(BS, (len(nus),) + BS.shape), _sigma_column(spec, C, sigma_factors(spec, 0.0, 1.0), nus)],
            axis=-1,
        )
        fam2.update(mats, lambda ix, zeta=zeta: {"zeta": zeta, "a_tilde": 0.0, "nu": nus[ix[0]], "eta": None})
    desc = grid.describe()
    return [
        fam1.report("ALS_i", {"zeta_radii": {"range": [0.0, 1.0], "count": grid.n_zeta - 1, "open_end": True}}, grid.rel_threshold),
        fam2.report("ALS_ii", {"zeta_radii": [1.0], "c": desc["nu"] | {"extra": ["0"]}}, grid.rel_threshold),
        fam3.report("ALS_iii", {"zeta_radii": [1.0]}, grid.rel_threshold),
    ]


def _inverse_parts(mats: np.ndarray, n_stable: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverses via SVD so that singular members give ``inf`` instead of raising."""
    U, s, Vh = np.linalg.svd(mats)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.conj(np.swapaxes(Vh, -1, -2)) @ (np.conj(np.swapaxes(U, -1, -2)) / s[..., :, None])
    inv = np.where(np.isfinite(inv), inv, np.inf)
    return inv[..., :n_stable, :], inv[..., n_stable:, :]


def _perturbed_mode(spec, zeta, a, scale_vec):
    """Scaled variables after ``xi' -> xi' * scale_vec`` at fixed ``(eta, lambda)``.

    Returns ``(zeta', a'_tilde, nu_factor)`` with ``nu' = nu_factor * nu``; none
    depends on ``eta``.
    """
    two_m = 2 * spec.m
    z = zeta * scale_vec
    rho = (a + np.linalg.norm(z) ** two_m) ** (1.0 / two_m)
    zp = z / rho
    ap = a / rho**two_m
    return zp, ap ** (1.0 / two_m), rho ** (-spec.l), ap


def _multiplier_blocks(spec, zeta, a, a_tilde, etas, nus):
    sys = stable_projection(build_companion(spec, zeta, a))
    S = sys.stable_basis
    BS = row_operator(spec, zeta) @ S
    mats = _ls_stack(spec, BS, _principal_C(spec, zeta), a_tilde, etas, nus)
    Xw, Xs = _inverse_parts(mats, S.shape[1])
    return S @ Xw, Xs


@dataclass(frozen=True)
class MultiplierBoundReport:
    """Suprema of the scaled solution operators over nested grids."""

    sup_M_w: list[float]
    sup_M_sigma: list[float]
    sup_lizorkin: list[float]
    ratios: list[float]
    verdict: str
    witness: dict
    grids: list[dict]

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def to_dict(self) -> dict:
        return jsonable(
            {
                "condition": "multiplier_bound",
                "sup_M_w": self.sup_M_w,
                "sup_M_sigma": self.sup_M_sigma,
                "sup_lizorkin": self.sup_lizorkin,
                "refinement_ratio": self.ratios,
                "verdict": self.verdict,
                "witness": self.witness,
                "grids": self.grids,
            }
        )


BOUND_GRID = ScanGrid(n_zeta=9, n_nu_r=9, n_nu_phi=5, n_eta=5)


def _bound_sweep(spec: ProblemSpec, grid: ScanGrid, lizorkin: bool, rel_step: float):
    etas, nus = grid.etas(), grid.nu_values()
    sup_w = sup_s = sup_l = 0.0
    best, witness = -1.0, {}
    norm_max = 0.0
    alphas = [al for r in range(1, spec.n) for al in itertools.combinations(range(spec.n - 1), r)]
    for b, zeta, a, a_tilde, sys in _scan_points(spec, grid):
        S = sys.stable_basis
        BS = row_operator(spec, zeta) @ S
        C = _principal_C(spec, zeta)
        mats = _ls_stack(spec, BS, C, a_tilde, etas, nus)
        inf_col = _sigma_column(spec, C, sigma_factors(spec, a_tilde, 1.0), np.inf)
        Minf = np.hstack([BS, inf_col])
        norm_max = max(norm_max, float(np.linalg.norm(mats, 2, axis=(-2, -1)).max()), float(np.linalg.norm(Minf, 2)))
        Xw, Xs = _inverse_parts(mats, S.shape[1])
        Iw, Is = _inverse_parts(Minf, S.shape[1])
        nw = np.linalg.norm(Xw, 2, axis=(-2, -1)) if np.all(np.isfinite(Xw)) else np.full(Xw.shape[:2], np.inf)
        ns = np.linalg.norm(Xs, 2, axis=(-2, -1)) if np.all(np.isfinite(Xs)) else np.full(Xs.shape[:2], np.inf)
        nwi = np.linalg.norm(Iw, 2) if np.all(np.isfinite(Iw)) else np.inf
        nsi = np.linalg.norm(Is, 2) if np.all(np.isfinite(Is)) else np.inf
        sup_w = max(sup_w, float(nw.max()), float(nwi))
        sup_s = max(sup_s, float(ns.max()), float(nsi))
        total = nw + ns
        ix = np.unravel_index(int(np.argmax(total)), total.shape)
        if total[ix] > best:
            best = float(total[ix])
            witness = {"zeta": zeta, "a_tilde": a_tilde, "nu": nus[ix[1]], "eta": etas[ix[0]]}
        if nwi + nsi > best:
            best = float(nwi + nsi)
            witness = {"zeta": zeta, "a_tilde": a_tilde, "nu": math.inf, "eta": None}
        if not lizorkin or a == 0.0 or b == 0.0:
            continue
        for alpha in alphas:
            if any(zeta[i] == 0.0 for i in alpha):
                continue
            acc_w, acc_s = 0.0, 0.0
            for signs in itertools.product((1.0, -1.0), repeat=len(alpha)):
                scale = np.ones(spec.n - 1)
                for i, sgn in zip(alpha, signs):
                    scale[i] += sgn * rel_step
                zp, atp, nu_fac, ap = _perturbed_mode(spec, zeta, a, scale)
                pw, ps = _multiplier_blocks(spec, zp, ap, atp, etas, nus * nu_fac)
                weight = np.prod(signs) / (2.0 * rel_step) ** len(alpha)
                acc_w = acc_w + weight * pw
                acc_s = acc_s + weight * ps
            val = np.linalg.norm(acc_w, 2, axis=(-2, -1)) + np.linalg.norm(acc_s, 2, axis=(-2, -1))
            sup_l = max(sup_l, float(val.max()))
    return sup_w, sup_s, sup_l, witness, norm_max


def multiplier_bound_scan(
    spec: ProblemSpec,
    grid: ScanGrid | None = None,
    refinements: int = 2,
    lizorkin: bool = True,
    rel_step: float = 1e-4,
) -> MultiplierBoundReport:
    """Sup of ``||M_w^0||`` and ``||M_sigma^0||`` over ``grid`` and its refinements.

    The norms are those of the maps ``h^0 -> w0`` and ``h^0 -> sigma0`` of the
    scaled system.  The Lizorkin-type terms ``||xi'^alpha d^alpha M^0||`` for
    ``alpha in {0,1}^{n-1} \\ {0}`` are estimated by central differences in
    ``xi'`` with relative step ``rel_step`` at fixed ``(eta, lambda)``.

    The verdict is ``"no numerical evidence of uniform bound"`` when a sup is
    infinite, when the smallest singular value behind it falls below the
    relative solvability threshold, or when both successive refinement
    ratios exceed 2; otherwise ``"bounded"``.
    """
    grid = BOUND_GRID if grid is None else grid
    if refinements < 0:
        raise PreconditionError("refinements must be >= 0")
    grids, sups_w, sups_s, sups_l = [], [], [], []
    witness, norm_max = {}, 0.0
    g = grid
    for _ in range(refinements + 1):
        w, s, lz, witness, nm = _bound_sweep(spec, g, lizorkin, rel_step)
        sups_w.append(w)
        sups_s.append(s)
        sups_l.append(lz)
        norm_max = max(norm_max, nm)
        grids.append(g.describe())
        g = g.refined()
    totals = [w + s for w, s in zip(sups_w, sups_s)]
    ratios = [b / a if a > 0 and math.isfinite(a) else math.inf for a, b in zip(totals, totals[1:])]
    exploded = any(not math.isfinite(t) for t in totals)
    singular = totals[-1] > 1.0 / (grid.rel_threshold * norm_max) if norm_max > 0 else True
    escaping = len(ratios) >= 2 and ratios[-1] > 2.0 and ratios[-2] > 2.0
    verdict = "no numerical evidence of uniform bound" if (exploded or singular or escaping) else "bounded"
    return MultiplierBoundReport(
        sup_M_w=sups_w,
        sup_M_sigma=sups_s,
        sup_lizorkin=sups_l,
        ratios=ratios,
        verdict=verdict,
        witness=jsonable(witness),
        grids=grids,
    )
