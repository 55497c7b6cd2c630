"""Model problem on a periodic half-space ``T^{n-1} x (0, oo)``.

The solution is assembled in three steps:

1. ``reduce_data`` removes the interior source and the initial value:
   ``u_*`` solves ``(eta + A) u_* = f`` on a periodic box in ``y`` with
   ``f`` extended by zero, and ``rho_*`` solves
   ``d_t rho_* + (eta - Laplace)^{l/2} rho_* = 0`` with ``rho_*(0) = rho_0``.
2. For each tangential mode the boundary rows ``j = 1..m`` are solved for
   the decaying trace ``w0`` in terms of ``sigma``, leaving the linear ODE
   ``sigma' = -K sigma + F(t)``, integrated exactly for piecewise-linear
   forcing.
3. The interior field is rebuilt from ``w0`` through the stable block of
   the companion flow ``exp(mu i A0 y)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .companion import mode_companion, stable_projection
from .symbols import (
    ProblemSpec,
    boundary_normal_coefficients,
    interior_symbol,
    tangential_symbol,
)

__all__ = [
    "TangentialGrid",
    "DiscreteField",
    "BoundaryField",
    "graded_heights",
    "uniform_heights",
    "ModeSystem",
    "mode_system",
    "exponential_step",
    "solve_mode",
    "reduce_data",
    "boundary_trace",
    "HalfSpaceSolver",
    "solve",
    "SingularModeError",
]


class SingularModeError(ArithmeticError):
    """The elimination block of a tangential mode is singular."""

    def __init__(self, mode, detail: str = ""):
        self.mode = tuple(int(k) for k in mode)
        super().__init__(f"singular elimination block at mode {self.mode}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class TangentialGrid:
    """Fourier modes ``k in {-K..K}^dim`` on a torus of side ``L``.

    Physical samples sit at ``x = L j / N`` with ``N = 2K + 1`` per axis,
    so every mode is resolved without aliasing.  Mode order is
    lexicographic in the centred indices.
    """

    dim: int
    K: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.dim < 1 or self.K < 0 or not self.L > 0:
            raise ValueError("need dim >= 1, K >= 0 and L > 0")

    @property
    def N(self) -> int:
        return 2 * self.K + 1

    @property
    def modes(self) -> np.ndarray:
        axis = np.arange(-self.K, self.K + 1)
        return np.array(list(itertools.product(axis, repeat=self.dim)), dtype=int).reshape(-1, self.dim)

    @property
    def n_modes(self) -> int:
        return self.N**self.dim

    @property
    def xi(self) -> np.ndarray:
        return 2 * math.pi * self.modes / self.L

    @property
    def volume(self) -> float:
        return self.L**self.dim

    def points(self) -> np.ndarray:
        return self.L * np.arange(self.N) / self.N

    def mode_index(self, k) -> int:
        k = np.atleast_1d(np.asarray(k, dtype=int))
        if k.shape != (self.dim,) or np.any(np.abs(k) > self.K):
            raise ValueError(f"mode {k.tolist()} outside the grid")
        return int(np.ravel_multi_index(tuple(k + self.K), (self.N,) * self.dim))

    def negated_index(self) -> np.ndarray:
        """Permutation taking the coefficient of ``k`` to that of ``-k``."""
        return np.array([self.mode_index(-k) for k in self.modes])

    def to_samples(self, coef: np.ndarray) -> np.ndarray:
        """Physical samples, shape ``(N,)*dim + rest``, from coefficients of shape ``(n_modes,) + rest``."""
        coef = np.asarray(coef)
        axes = tuple(range(self.dim))
        centred = coef.reshape((self.N,) * self.dim + coef.shape[1:])
        return np.fft.ifftn(np.fft.ifftshift(centred, axes=axes), axes=axes) * self.N**self.dim

    def to_coefficients(self, samples: np.ndarray) -> np.ndarray:
        """Coefficients ``c_k`` with ``u(x) = sum_k c_k e^{i xi_k x}`` from samples
        stored on the leading ``dim`` axes."""
        samples = np.asarray(samples)
        axes = tuple(range(self.dim))
        coef = np.fft.fftshift(np.fft.fftn(samples, axes=axes), axes=axes) / self.N**self.dim
        return coef.reshape((self.n_modes,) + samples.shape[self.dim:])


def uniform_heights(Y: float, n: int) -> np.ndarray:
    """``y_i = i Y / n`` for ``i = 0..n-1``: the layout the whole-space solve needs."""
    return Y * np.arange(n) / n


def graded_heights(Y: float, n: int = 64) -> np.ndarray:
    """Quadratically graded heights ``y_i = Y (i/(n-1))^2`` clustering at the boundary."""
    return Y * (np.arange(n) / (n - 1)) ** 2


def _samples(grid: TangentialGrid, values: np.ndarray) -> np.ndarray:
    """Coefficients ``(Nt+1, n_modes, ...)`` to samples ``(Nt+1, N, ..., N, ...)``."""
    samples = grid.to_samples(np.moveaxis(values, 1, 0))
    return np.moveaxis(samples, grid.dim, 0)


def _check_times(times: np.ndarray) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or times[0] != 0.0:
        raise ValueError("time grid must start at 0 and have at least two nodes")
    dt = times[1] - times[0]
    if not dt > 0 or not np.allclose(np.diff(times), dt, rtol=1e-10, atol=0):
        raise ValueError("time grid must be uniform")
    return float(dt)


@dataclass
class BoundaryField:
    """Fourier coefficients on the boundary, shape ``(Nt+1, n_modes, comps)``."""

    values: np.ndarray
    times: np.ndarray
    grid: TangentialGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.times = np.asarray(self.times, dtype=float)
        if self.values.ndim != 3 or self.values.shape[:2] != (len(self.times), self.grid.n_modes):
            raise ValueError(f"values shape {self.values.shape} incompatible with {len(self.times)} times and {self.grid.n_modes} modes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def components(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def zeros(cls, times, grid: TangentialGrid, comps: int) -> "BoundaryField":
        return cls(np.zeros((len(times), grid.n_modes, comps), dtype=complex), times, grid)

    def to_physical(self) -> np.ndarray:
        """Samples with shape ``(Nt+1, N, ..., N, comps)``."""
        return _samples(self.grid, self.values)

    def is_conjugate_symmetric(self, tol: float = 1e-12) -> bool:
        neg = self.values[:, self.grid.negated_index()]
        return bool(np.max(np.abs(neg - self.values.conj()), initial=0.0) <= tol * max(1.0, np.abs(self.values).max(initial=0.0)))

    def __add__(self, other: "BoundaryField") -> "BoundaryField":
        return BoundaryField(self.values + other.values, self.times, self.grid)

    def __sub__(self, other: "BoundaryField") -> "BoundaryField":
        return BoundaryField(self.values - other.values, self.times, self.grid)

    def scaled(self, c: complex) -> "BoundaryField":
        return BoundaryField(c * self.values, self.times, self.grid)


@dataclass
class DiscreteField:
    """Fourier coefficients in the interior, shape ``(Nt+1, n_modes, n_y, comps)``."""

    values: np.ndarray
    times: np.ndarray
    grid: TangentialGrid
    heights: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.times = np.asarray(self.times, dtype=float)
        self.heights = np.asarray(self.heights, dtype=float)
        expect = (len(self.times), self.grid.n_modes, len(self.heights))
        if self.values.ndim != 4 or self.values.shape[:3] != expect:
            raise ValueError(f"values shape {self.values.shape} incompatible with {expect}")
        if np.any(self.heights < 0) or np.any(np.diff(self.heights) <= 0):
            raise ValueError("heights must be nonnegative and increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def components(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def zeros(cls, times, grid: TangentialGrid, heights, comps: int) -> "DiscreteField":
        return cls(np.zeros((len(times), grid.n_modes, len(heights), comps), dtype=complex), times, grid, heights)

    def to_physical(self) -> np.ndarray:
        """Samples with shape ``(Nt+1, N, ..., N, n_y, comps)``."""
        return _samples(self.grid, self.values)

    def trace(self) -> BoundaryField:
        if self.heights[0] != 0.0:
            raise ValueError("field has no y = 0 row")
        return BoundaryField(self.values[:, :, 0], self.times, self.grid)

    def is_conjugate_symmetric(self, tol: float = 1e-12) -> bool:
        neg = self.values[:, self.grid.negated_index()]
        return bool(np.max(np.abs(neg - self.values.conj()), initial=0.0) <= tol * max(1.0, np.abs(self.values).max(initial=0.0)))

    def __add__(self, other: "DiscreteField") -> "DiscreteField":
        return DiscreteField(self.values + other.values, self.times, self.grid, self.heights)

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        return DiscreteField(self.values - other.values, self.times, self.grid, self.heights)

    def scaled(self, c: complex) -> "DiscreteField":
        return DiscreteField(c * self.values, self.times, self.grid, self.heights)


@dataclass(frozen=True)
class ModeSystem:
    """Everything the per-mode evolution needs at one tangential frequency.

    ``R0`` and ``Rb`` are the raw boundary rows on stable coordinates
    (``w0 = S c``), ``C0`` and ``Cb`` the tangential symbols, and
    ``K = C0 - R0 Rb^{-1} Cb`` the generator of the eliminated ODE.
    """

    mode: tuple
    xi: np.ndarray
    mu: float
    S: np.ndarray
    G: np.ndarray
    R0: np.ndarray
    Rb: np.ndarray
    C0: np.ndarray
    Cb: np.ndarray
    Rb_inv: np.ndarray
    K: np.ndarray

    def forcing(self, g_hat: np.ndarray, dimF: int) -> np.ndarray:
        """``F = g_0 - R0 Rb^{-1} g_b`` for ``g_hat`` of shape ``(..., rows)``."""
        g0, gb = g_hat[..., :dimF], g_hat[..., dimF:]
        return g0 - gb @ (self.R0 @ self.Rb_inv).T

    def traces(self, g_hat: np.ndarray, sigma: np.ndarray, dimF: int) -> np.ndarray:
        """Stable coordinates ``c = Rb^{-1}(g_b - Cb sigma)``."""
        gb = g_hat[..., dimF:]
        return (gb - sigma @ self.Cb.T) @ self.Rb_inv.T

    def residual(self, g_hat, sigma, dsigma, dimF) -> np.ndarray:
        """Boundary-row residual of ``(c, sigma)`` given ``d sigma/dt``."""
        c = self.traces(g_hat, sigma, dimF)
        r0 = c @ self.R0.T + dsigma + sigma @ self.C0.T - g_hat[..., :dimF]
        rb = c @ self.Rb.T + sigma @ self.Cb.T - g_hat[..., dimF:]
        return np.concatenate([r0, rb], axis=-1)


def _raw_rows(spec: ProblemSpec, xi: np.ndarray, mu: float, S: np.ndarray) -> list[np.ndarray]:
    d = spec.dimE
    rows = []
    for j in range(spec.m + 1):
        coeffs = boundary_normal_coefficients(spec, j, xi, principal=False)
        rows.append(sum(q @ S[k * d:(k + 1) * d] * mu**k for k, q in enumerate(coeffs)))
    return rows


def mode_system(spec: ProblemSpec, k, grid: TangentialGrid | None = None, eta: float | None = None) -> ModeSystem:
    """Assemble the per-mode elimination for mode ``k`` (full symbols)."""
    grid = TangentialGrid(spec.n - 1, int(np.max(np.abs(k), initial=0))) if grid is None else grid
    k = np.atleast_1d(np.asarray(k, dtype=int))
    xi = 2 * math.pi * k / grid.L
    A, mu = mode_companion(spec, xi, eta, principal=False)
    sys = stable_projection(A)
    S, G = sys.stable_basis, sys.stable_generator
    rows = _raw_rows(spec, xi, mu, S)
    R0, Rb = rows[0], np.vstack(rows[1:])
    C = [tangential_symbol(spec, j, xi, principal=False) for j in range(spec.m + 1)]
    C0, Cb = C[0], np.vstack(C[1:])
    cond = np.linalg.cond(Rb)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularModeError(k, f"condition number {cond:.3g}")
    Rb_inv = np.linalg.inv(Rb)
    K = C0 - R0 @ Rb_inv @ Cb
    return ModeSystem(tuple(k.tolist()), xi, mu, S, G, R0, Rb, C0, Cb, Rb_inv, K)


def exponential_step(K: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(exp(-dt K), dt phi_1(-dt K), dt^2 phi_2(-dt K))`` from one augmented exponential."""
    d = K.shape[0]
    big = np.zeros((3 * d, 3 * d), dtype=complex)
    big[:d, :d] = -K
    big[:d, d:2 * d] = np.eye(d)
    big[d:2 * d, 2 * d:] = np.eye(d)
    E = expm(dt * big)
    return E[:d, :d], E[:d, d:2 * d], E[:d, 2 * d:]


def _integrate(K: np.ndarray, F: np.ndarray, dt: float, sigma0=None) -> np.ndarray:
    E0, E1, E2 = exponential_step(K, dt)
    sigma = np.zeros_like(F)
    if sigma0 is not None:
        sigma[0] = sigma0
    slope = np.diff(F, axis=0) / dt
    for n in range(len(F) - 1):
        sigma[n + 1] = E0 @ sigma[n] + E1 @ F[n] + E2 @ slope[n]
    return sigma


def solve_mode(
    spec: ProblemSpec,
    k,
    g_hat: np.ndarray,
    dt: float,
    grid: TangentialGrid | None = None,
    system: ModeSystem | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Evolve one tangential mode of the reduced problem (``sigma(0) = 0``).

    Parameters
    ----------
    g_hat
        Boundary data at the time nodes, shape ``(Nt+1, dimF + m dimE)``,
        rows stacked ``j = 0..m``.
    dt
        Uniform time step.

    Returns
    -------
    sigma : ndarray, shape (Nt+1, dimF)
    w0 : ndarray, shape (Nt+1, 2m dimE)
        Decaying trace ``w0 = S c`` in the scaled companion variables.
    """
    system = mode_system(spec, k, grid) if system is None else system
    g_hat = np.asarray(g_hat, dtype=complex)
    sigma = _integrate(system.K, system.forcing(g_hat, spec.dimF), dt)
    c = system.traces(g_hat, sigma, spec.dimF)
    return sigma, c @ system.S.T


def _box_frequencies(n: int, Y: float) -> np.ndarray:
    """Angular frequencies for the periodic box ``[-Y, Y)`` with ``2n`` nodes; Nyquist dropped."""
    q = np.fft.fftfreq(2 * n, d=1.0 / (2 * n))
    xi = math.pi * q / Y
    xi[n] = 0.0
    return xi


def boundary_trace(spec: ProblemSpec, j: int, xi: np.ndarray, normal_derivs: np.ndarray) -> np.ndarray:
    """``B_j(xi', D_y) u(0)`` from stacked normal derivatives ``D_y^k u(0)``.

    ``normal_derivs`` has shape ``(..., 2m, dimE)``.
    """
    coeffs = boundary_normal_coefficients(spec, j, xi, principal=False)
    return sum(normal_derivs[..., k, :] @ q.T for k, q in enumerate(coeffs))


def reduce_data(
    spec: ProblemSpec,
    f: DiscreteField | None,
    rho0,
    times=None,
    grid: TangentialGrid | None = None,
    out_heights=None,
):
    """Whole-space and initial-value parts of the solution.

    Parameters
    ----------
    f
        Interior source on a uniform height grid ``y_i = i h`` covering
        ``[0, Y)``; it is extended by zero to ``[-Y, 0)`` and solved on the
        periodic box ``[-Y, Y)``.  ``None`` means ``f = 0``.
    rho0
        Initial value: a ``BoundaryField`` (its first time slice is used) or
        an array of shape ``(n_modes, dimF)``.
    out_heights
        Heights at which ``u_*`` is returned (trigonometric interpolation);
        default is the height grid of ``f``.

    Returns
    -------
    u_star : DiscreteField
    rho_star : BoundaryField
    g_corrections : list of BoundaryField
        ``-(B_j u_* + C_j rho_*)`` on ``y = 0``, with ``-d_t rho_*`` added for
        ``j = 0``.
    """
    if f is not None:
        times, grid = f.times, f.grid
    elif isinstance(rho0, BoundaryField):
        times = rho0.times if times is None else times
        grid = rho0.grid if grid is None else grid
    if times is None or grid is None:
        raise ValueError("times and grid are needed when f is None")
    times = np.asarray(times, dtype=float)
    rho0 = rho0.values[0] if isinstance(rho0, BoundaryField) else np.asarray(rho0, dtype=complex)
    rho0 = np.zeros((grid.n_modes, spec.dimF), dtype=complex) if rho0 is None or rho0.size == 0 else rho0
    if rho0.shape != (grid.n_modes, spec.dimF):
        raise ValueError(f"rho0 must have shape {(grid.n_modes, spec.dimF)}")
    xi = grid.xi
    nt, nk, E = len(times), grid.n_modes, spec.dimE
    two_m = 2 * spec.m

    # initial-value part
    rate = (spec.eta + np.sum(xi**2, axis=-1)) ** (spec.l / 2.0)
    decay = np.exp(-times[:, None] * rate[None, :])
    rho_star = BoundaryField(decay[..., None] * rho0[None], times, grid)

    # whole-space part
    if f is None:
        heights = np.zeros(1) if out_heights is None else np.asarray(out_heights, dtype=float)
        u_values = np.zeros((nt, nk, len(heights), E), dtype=complex)
        derivs = np.zeros((nt, nk, two_m, E), dtype=complex)
    else:
        y = f.heights
        ny = len(y)
        h = y[1] - y[0] if ny > 1 else 1.0
        if y[0] != 0.0 or not np.allclose(np.diff(y), h, rtol=1e-10, atol=0):
            raise ValueError("f must live on a uniform height grid starting at y = 0")
        Y = ny * h
        heights = y if out_heights is None else np.asarray(out_heights, dtype=float)
        if np.any(heights > Y) or np.any(heights < 0):
            raise ValueError("output heights must lie in [0, Y]")
        box = np.zeros((nt, nk, 2 * ny, E), dtype=complex)
        box[:, :, :ny] = f.values
        fy = np.fft.fft(box, axis=2)
        eta_y = _box_frequencies(ny, Y)
        full = np.empty((nk, 2 * ny, spec.n))
        full[..., :-1] = xi[:, None, :]
        full[..., -1] = eta_y[None, :]
        symbol = interior_symbol(spec, full, principal=False) + spec.eta * np.eye(E)
        cond = np.linalg.cond(symbol)
        if not np.all(np.isfinite(cond)) or cond.max() > 1e14:
            bad = np.unravel_index(int(np.nanargmax(np.where(np.isfinite(cond), cond, np.inf))), cond.shape)
            raise SingularModeError(grid.modes[bad[0]], "eta + A(xi) is singular; eta is below the ellipticity shift")
        uy = np.linalg.solve(symbol[None], fy[..., None])[..., 0]
        uy[:, :, ny] = 0.0
        coef = uy / (2 * ny)
        # trigonometric interpolation at arbitrary heights and normal derivatives at y = 0
        phase = np.exp(1j * np.outer(heights, eta_y))
        u_values = np.einsum("yq,tkqe->tkye", phase, coef)
        powers = eta_y[None, :] ** np.arange(two_m)[:, None]
        derivs = np.einsum("dq,tkqe->tkde", powers, coef)
    u_star = DiscreteField(u_values, times, grid, heights)

    corrections = []
    for j in range(spec.m + 1):
        Bu = np.stack([boundary_trace(spec, j, xi[i], derivs[:, i]) for i in range(nk)], axis=1)
        Cr = np.einsum("kab,tkb->tka", tangential_symbol(spec, j, xi, principal=False), rho_star.values)
        g = -(Bu + Cr)
        if j == 0:
            g = g + rate[None, :, None] * rho_star.values
        corrections.append(BoundaryField(g, times, grid))
    return u_star, rho_star, corrections


class HalfSpaceSolver:
    """Reusable per-mode systems for one ``(spec, grid, heights)``.

    Parameters
    ----------
    heights
        Output heights for the reconstructed interior field.  Defaults to
        ``graded_heights(10 / sqrt(eta), 64)``.
    """

    def __init__(self, spec: ProblemSpec, grid: TangentialGrid, heights=None):
        if grid.dim != spec.n - 1:
            raise ValueError("grid dimension must be n - 1")
        self.spec = spec
        self.grid = grid
        self.heights = graded_heights(10.0 / math.sqrt(spec.eta)) if heights is None else np.asarray(heights, dtype=float)
        self.systems = [mode_system(spec, k, grid) for k in grid.modes]
        self._flows = [expm(s.mu * self.heights[:, None, None] * s.G) for s in self.systems]
        self._steps: dict[float, list] = {}

    def _step_matrices(self, dt: float):
        if dt not in self._steps:
            self._steps[dt] = [exponential_step(s.K, dt) for s in self.systems]
        return self._steps[dt]

    def solve_reduced(self, g: list[BoundaryField]) -> tuple[DiscreteField, BoundaryField, np.ndarray]:
        """Solve with ``f = 0`` and ``rho(0) = 0``; returns ``(u, rho, w0)``."""
        spec = self.spec
        times = g[0].times
        dt = _check_times(times)
        g_all = np.concatenate([gj.values for gj in g], axis=-1)
        if g_all.shape[-1] != spec.boundary_rows:
            raise ValueError(f"boundary data has {g_all.shape[-1]} components, expected {spec.boundary_rows}")
        nt, nk = len(times), self.grid.n_modes
        sigma = np.zeros((nt, nk, spec.dimF), dtype=complex)
        w0 = np.zeros((nt, nk, 2 * spec.m * spec.dimE), dtype=complex)
        u = np.zeros((nt, nk, len(self.heights), spec.dimE), dtype=complex)
        for i, (s, (E0, E1, E2)) in enumerate(zip(self.systems, self._step_matrices(dt))):
            F = s.forcing(g_all[:, i], spec.dimF)
            slope = np.diff(F, axis=0) / dt
            sg = sigma[:, i]
            for n in range(nt - 1):
                sg[n + 1] = E0 @ sg[n] + E1 @ F[n] + E2 @ slope[n]
            c = s.traces(g_all[:, i], sg, spec.dimF)
            w0[:, i] = c @ s.S.T
            v = s.S[: spec.dimE]
            # u(t, y) = S_1 exp(mu G y) c(t)
            u[:, i] = np.einsum("ar,yrs,ts->tya", v, self._flows[i], c)
        return (
            DiscreteField(u, times, self.grid, self.heights),
            BoundaryField(sigma, times, self.grid),
            w0,
        )

    def solve(self, f: DiscreteField | None, g: list[BoundaryField], rho0=None) -> tuple[DiscreteField, BoundaryField]:
        spec = self.spec
        if len(g) != spec.m + 1:
            raise ValueError(f"expected {spec.m + 1} boundary fields")
        times = g[0].times
        if rho0 is None:
            rho0 = np.zeros((self.grid.n_modes, spec.dimF), dtype=complex)
        u_star, rho_star, corr = reduce_data(spec, f, rho0, times=times, grid=self.grid, out_heights=self.heights)
        reduced = [gj + cj for gj, cj in zip(g, corr)]
        u_t, rho_t, _ = self.solve_reduced(reduced)
        return u_t + u_star, rho_t + rho_star


def solve(spec: ProblemSpec, f: DiscreteField | None, g: list[BoundaryField], rho0=None, heights=None):
    """One-shot solve; see :class:`HalfSpaceSolver`."""
    return HalfSpaceSolver(spec, g[0].grid, heights).solve(f, g, rho0)
