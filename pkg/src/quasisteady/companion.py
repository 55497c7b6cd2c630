"""First-order reformulation of the normal ODE and its stable subspace.

For a tangential frequency ``xi'`` the interior equation
``(eta + A(xi', D_y)) v = 0`` becomes ``D_y w = mu A0 w`` for
``w = (v, (D_y/mu) v, ..., (D_y/mu)^{2m-1} v)``.  Solutions decaying as
``y -> oo`` are those with ``P_plus w(0) = 0``, where ``P_plus`` is the
spectral projection of ``i A0`` onto its eigenvalues with positive real
part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm, schur, solve_sylvester

from .symbols import ProblemSpec, normal_coefficients

__all__ = [
    "ModeParameters",
    "mode_parameters",
    "build_companion",
    "mode_companion",
    "CompanionSystem",
    "SpectralSplittingError",
    "stable_projection",
    "evaluate_decaying_solution",
    "projection_lipschitz_estimate",
    "SPLITTING_TOL",
]

SPLITTING_TOL = 1e-10


class SpectralSplittingError(ArithmeticError):
    """``i A0`` has an eigenvalue too close to the imaginary axis, or the
    stable subspace has the wrong dimension."""

    def __init__(self, message: str, eigenvalue: complex | None = None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


@dataclass(frozen=True)
class ModeParameters:
    """Scaled symbol variables of one Fourier-Laplace mode.

    ``lam`` and ``nu`` are ``inf`` for the limit ``|lambda| -> oo``.
    """

    xi_prime: np.ndarray
    lam: complex
    eta: float
    mu: float
    zeta: np.ndarray
    a: float
    a_tilde: float
    b: float
    nu: complex


def mode_parameters(eta: float, xi_prime, lam: complex, m: int, l: int) -> ModeParameters:
    """Compute ``mu = (eta + |xi'|^{2m})^{1/2m}``, ``zeta = xi'/mu``,
    ``a = eta/mu^{2m}``, ``a_tilde = a^{1/2m}``, ``b = |zeta|`` and ``nu = lambda/mu^l``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    xi = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    r = float(np.linalg.norm(xi))
    two_m = 2 * m
    mu = (eta + r**two_m) ** (1.0 / two_m)
    zeta = xi / mu
    b = r / mu
    # a = eta / mu^{2m}, evaluated so that a + b^{2m} = 1 holds to rounding
    a = 1.0 / (1.0 + r**two_m / eta)
    lam = complex(lam)
    nu = complex(math.inf) if math.isinf(abs(lam)) else lam / mu**l
    return ModeParameters(
        xi_prime=xi,
        lam=lam,
        eta=float(eta),
        mu=mu,
        zeta=zeta,
        a=a,
        a_tilde=a ** (1.0 / two_m),
        b=b,
        nu=nu,
    )


def _companion_from_coefficients(p: Sequence[np.ndarray], a0_inv: np.ndarray) -> np.ndarray:
    """Block companion with identity superdiagonal and last row ``-a0^{-1} p_k``."""
    d = a0_inv.shape[0]
    order = len(p) - 1
    A = np.zeros((order * d, order * d), dtype=complex)
    for k in range(order - 1):
        A[k * d:(k + 1) * d, (k + 1) * d:(k + 2) * d] = np.eye(d)
    last = slice((order - 1) * d, order * d)
    for k in range(order):
        A[last, k * d:(k + 1) * d] = -a0_inv @ p[k]
    return A


def build_companion(spec: ProblemSpec, zeta, a: float) -> np.ndarray:
    """Companion matrix ``A0(zeta, a)`` of the principal normal symbol.

    The last block row is ``(c_{2m}, ..., c_1)`` with
    ``c_k = -a0^{-1} a_k(zeta)`` and ``c_{2m} = -a0^{-1}(a_{2m}(zeta) + a)``,
    where ``a_k(zeta)`` multiplies ``D_y^{2m-k}``.
    """
    p = normal_coefficients(spec, zeta, principal=True)
    p[0] = p[0] + a * np.eye(spec.dimE)
    return _companion_from_coefficients(p, np.linalg.inv(spec.leading_coefficient))


def mode_companion(
    spec: ProblemSpec, xi_prime, eta: float | None = None, principal: bool = False
) -> tuple[np.ndarray, float]:
    """Companion matrix for ``eta + A(xi', D_y)`` at a physical mode.

    Returns ``(A, mu)`` with ``D_y w = mu A w``.  Lower-order terms are
    included unless ``principal``; for a principal-part-only operator the
    result equals ``build_companion(spec, xi'/mu, eta/mu^{2m})``.
    """
    eta = spec.eta if eta is None else eta
    xi = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    two_m = 2 * spec.m
    mu = (eta + float(np.linalg.norm(xi)) ** two_m) ** (1.0 / two_m)
    p = normal_coefficients(spec, xi, principal=principal)
    p[0] = p[0] + eta * np.eye(spec.dimE)
    scaled = [pk * mu ** (k - two_m) for k, pk in enumerate(p)]
    return _companion_from_coefficients(scaled, np.linalg.inv(spec.leading_coefficient)), mu


@dataclass(frozen=True)
class CompanionSystem:
    """``A0`` together with its positive spectral projection.

    ``stable_basis`` has orthonormal columns spanning ``range(I - P_plus)``
    and ``i A0 @ stable_basis = stable_basis @ stable_generator``.
    """

    A0: np.ndarray
    P_plus: np.ndarray
    stable_basis: np.ndarray
    stable_generator: np.ndarray
    eigenvalues: np.ndarray

    @property
    def rank(self) -> int:
        return self.stable_basis.shape[1]

    @property
    def spectral_gap(self) -> float:
        """Smallest ``|Re z|`` over the eigenvalues of the stable generator."""
        return float(np.min(-np.diag(self.stable_generator).real))

    def stable_coordinates(self, w: np.ndarray) -> np.ndarray:
        """Coordinates of ``(I - P_plus) w`` in the stable basis."""
        w = np.asarray(w, dtype=complex)
        return self.stable_basis.conj().T @ (w - self.P_plus @ w)


def stable_projection(A0: np.ndarray, tol: float = SPLITTING_TOL) -> CompanionSystem:
    """Positive spectral projection of ``i A0`` via an ordered Schur form.

    The Schur vectors are reordered so that the eigenvalues with negative
    real part come first; a Sylvester solve then decouples the two blocks.

    Raises
    ------
    SpectralSplittingError
        If an eigenvalue has ``|Re z| <= tol * ||A0||`` or the stable
        subspace is not half-dimensional.
    """
    A0 = np.asarray(A0, dtype=complex)
    N = A0.shape[0]
    scale = max(np.linalg.norm(A0, 2), 1e-300)
    T, Z, sdim = schur(1j * A0, output="complex", sort="lhp")
    eig = np.diag(T).copy()
    close = np.abs(eig.real) <= tol * scale
    if np.any(close):
        z = complex(eig[np.argmax(close)])
        raise SpectralSplittingError(f"eigenvalue {z} of iA0 lies on the imaginary axis within {tol:g}", z)
    if 2 * sdim != N:
        raise SpectralSplittingError(f"stable subspace has dimension {sdim}, expected {N // 2}")
    T11, T12, T22 = T[:sdim, :sdim], T[:sdim, sdim:], T[sdim:, sdim:]
    X = solve_sylvester(T11, -T22, -T12)
    Pt = np.zeros((N, N), dtype=complex)
    Pt[:sdim, sdim:] = X
    Pt[sdim:, sdim:] = np.eye(N - sdim)
    P = Z @ Pt @ Z.conj().T
    return CompanionSystem(
        A0=A0,
        P_plus=P,
        stable_basis=Z[:, :sdim].copy(),
        stable_generator=T11.copy(),
        eigenvalues=eig,
    )


def evaluate_decaying_solution(sys: CompanionSystem, mu: float, w0, y) -> np.ndarray:
    """``exp(mu i A0 y) (I - P_plus) w0`` through the stable block only.

    ``y`` may be a scalar or a 1-d array of heights; for an array the result
    has shape ``(len(y), len(w0))``.
    """
    c = sys.stable_coordinates(w0)
    ys = np.asarray(y, dtype=float)
    if np.any(ys < 0):
        raise ValueError("heights must be nonnegative")
    flows = expm(mu * ys.reshape(-1, 1, 1) * sys.stable_generator)
    out = (flows @ c) @ sys.stable_basis.T
    return out[0] if ys.ndim == 0 else out


def projection_lipschitz_estimate(spec: ProblemSpec, n_zeta: int = 9, n_a: int = 9, a_min: float = 0.05) -> dict:
    """Empirical Lipschitz constant of ``P_plus`` on a compact ``(zeta, a)`` grid.

    Neighbouring grid points are compared with the distance
    ``|zeta - zeta'| + |a - a'|``; ``|zeta| <= 1`` and ``a in [a_min, 1]``.
    """
    dim = spec.n - 1
    axes = [np.linspace(-1.0, 1.0, n_zeta)] * dim + [np.linspace(a_min, 1.0, n_a)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = mesh.shape[:-1]
    proj = {}
    for idx in np.ndindex(*shape):
        zeta, a = mesh[idx][:dim], mesh[idx][dim]
        if np.linalg.norm(zeta) <= 1.0:
            proj[idx] = stable_projection(build_companion(spec, zeta, a)).P_plus
    best, where = 0.0, None
    for idx, P in proj.items():
        for axis in range(len(shape)):
            nb = list(idx)
            nb[axis] += 1
            nb = tuple(nb)
            if nb not in proj:
                continue
            dist = np.abs(mesh[idx] - mesh[nb]).sum()
            ratio = np.linalg.norm(P - proj[nb], 2) / dist
            if ratio > best:
                best, where = ratio, mesh[idx]
    return {
        "lipschitz_constant": float(best),
        "witness": None if where is None else where.tolist(),
        "grid": {"n_zeta": n_zeta, "n_a": n_a, "a_min": a_min},
    }
