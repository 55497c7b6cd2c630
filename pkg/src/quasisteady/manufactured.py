"""Manufactured solutions and random band-limited data.

The closed-form solution is for the Laplace problem with the dynamic law
``d_t rho + d_nu u + c0 (-Laplace_Gamma) rho = g0`` and the coupling
``u - rho = g1`` (``c0 = 0`` or ``1`` covers the first two built-in
examples).  Every operator is applied by hand here so that the solver is
compared against an independent computation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .halfspace import BoundaryField, DiscreteField, TangentialGrid, graded_heights, uniform_heights

__all__ = ["ManufacturedCase", "laplace_dynamic_case", "random_band_limited", "DataRecipe", "random_recipe"]


@dataclass
class ManufacturedCase:
    """Data ``(f, g, rho0)`` with the exact ``(u, rho)`` on the output grid."""

    f: DiscreteField
    g: list
    rho0: np.ndarray
    u_exact: DiscreteField
    rho_exact: BoundaryField


def random_band_limited(rng: np.random.Generator, grid: TangentialGrid, comps: int = 1, band: int | None = None, decay: float = 2.0) -> np.ndarray:
    """Random coefficients of a real field with modes ``|k|_inf <= band``.

    Amplitudes fall off like ``(1 + |k|)^{-decay}``; the result satisfies
    ``c(-k) = conj(c(k))``.
    """
    band = grid.K if band is None else band
    modes = grid.modes
    inside = np.max(np.abs(modes), axis=1) <= band
    raw = rng.standard_normal((grid.n_modes, comps)) + 1j * rng.standard_normal((grid.n_modes, comps))
    raw *= ((1.0 + np.linalg.norm(modes, axis=1)) ** (-decay) * inside)[:, None]
    neg = grid.negated_index()
    return 0.5 * (raw + raw[neg].conj())


def laplace_dynamic_case(
    eta: float,
    K: int,
    Nt: int,
    T: float = 1.0,
    seed: int = 0,
    c0: float = 0.0,
    n_source: int = 256,
    n_out: int = 64,
    bump_mode: int = 1,
) -> ManufacturedCase:
    """Exact solution ``u = sum_k rho_k(t) e^{-mu_k y} e^{i k x} + u_b``.

    ``rho_k(t) = a_k (1 + t^2) e^{-t}`` with random band-limited ``a_k`` and
    ``mu_k = (eta + k^2)^{1/2}``; ``u_b`` is a Gaussian bump in ``y`` centred
    at ``Y/2`` times ``cos(bump_mode x) e^{-t}`` that carries the interior
    source.  ``Y = 10/sqrt(eta)``.
    """
    grid = TangentialGrid(1, K)
    rng = np.random.default_rng(seed)
    a = random_band_limited(rng, grid)[:, 0]
    k = grid.modes[:, 0]
    mu = np.sqrt(eta + k.astype(float) ** 2)
    t = np.linspace(0.0, T, Nt + 1)
    prof = (1.0 + t**2) * np.exp(-t)
    dprof = (2.0 * t - 1.0 - t**2) * np.exp(-t)
    rho = prof[:, None] * a[None, :]
    drho = dprof[:, None] * a[None, :]

    Y = 10.0 / math.sqrt(eta)
    centre, width = Y / 2.0, Y / 14.0

    def bump(y):
        return np.exp(-((y - centre) ** 2) / (2 * width**2))

    # cos(k_b x) = (e^{i k_b x} + e^{-i k_b x}) / 2
    bump_coef = np.zeros(grid.n_modes)
    if bump_mode <= K:
        bump_coef[grid.mode_index([bump_mode])] += 0.5
        bump_coef[grid.mode_index([-bump_mode])] += 0.5
    et = np.exp(-t)

    ys = uniform_heights(Y, n_source)
    G = bump(ys)
    Gpp = G * (((ys - centre) ** 2) / width**4 - 1.0 / width**2)
    f_y = (eta + bump_mode**2) * G - Gpp
    f_vals = et[:, None, None] * bump_coef[None, :, None] * f_y[None, None, :]
    f = DiscreteField(f_vals[..., None], t, grid, ys)

    G0 = bump(0.0)
    dG0 = centre / width**2 * G0
    ub0 = et[:, None] * bump_coef[None, :] * G0
    dub0 = et[:, None] * bump_coef[None, :] * dG0
    g0 = drho + mu[None, :] * rho + c0 * (k[None, :] ** 2) * rho - dub0
    g1 = ub0

    heights = graded_heights(Y, n_out)
    u_vals = rho[:, :, None] * np.exp(-mu[None, :, None] * heights[None, None, :])
    u_vals = u_vals + et[:, None, None] * bump_coef[None, :, None] * bump(heights)[None, None, :]
    return ManufacturedCase(
        f=f,
        g=[BoundaryField(g0[..., None], t, grid), BoundaryField(g1[..., None], t, grid)],
        rho0=rho[0][:, None],
        u_exact=DiscreteField(u_vals[..., None], t, grid, heights),
        rho_exact=BoundaryField(rho[..., None], t, grid),
    )


@dataclass(frozen=True)
class DataRecipe:
    """Resolution-free description of smooth band-limited data.

    Each boundary datum and each interior bump is a fixed set of Fourier
    amplitudes (modes ``|k|_inf <= band``) times a time profile
    ``c0 + c1 cos(pi t/T) + c2 sin(pi t/T)``.  Interior bumps are Gaussians
    in ``y`` centred at ``0.35 Y`` and ``0.55 Y`` with width ``Y/14``.
    ``sample`` evaluates the same functions on any grid whose ``K`` is at
    least ``band``.
    """

    band: int
    dim: int
    g_modes: tuple
    g_profiles: tuple
    f_modes: tuple
    f_profiles: tuple
    rho0_modes: np.ndarray
    T: float

    @staticmethod
    def _embed(coef: np.ndarray, band: int, grid: TangentialGrid) -> np.ndarray:
        src = TangentialGrid(grid.dim, band)
        out = np.zeros((grid.n_modes,) + coef.shape[1:], dtype=complex)
        for i, k in enumerate(src.modes):
            out[grid.mode_index(k)] = coef[i]
        return out

    def _profile(self, c, times):
        return c[0] + c[1] * np.cos(math.pi * times / self.T) + c[2] * np.sin(math.pi * times / self.T)

    def sample(self, spec, grid: TangentialGrid, times, n_source: int = 128, Y: float | None = None):
        """``(f, g, rho0)`` on ``grid`` and ``times``; ``f`` on ``n_source`` uniform heights."""
        if grid.K < self.band or grid.dim != self.dim:
            raise ValueError("grid does not resolve the recipe band")
        times = np.asarray(times, dtype=float)
        Y = 10.0 / math.sqrt(spec.eta) if Y is None else Y
        g = []
        for coef, c in zip(self.g_modes, self.g_profiles):
            full = self._embed(coef, self.band, grid)
            g.append(BoundaryField(self._profile(c, times)[:, None, None] * full[None], times, grid))
        ys = uniform_heights(Y, n_source)
        width = Y / 14.0
        f_vals = np.zeros((len(times), grid.n_modes, n_source, spec.dimE), dtype=complex)
        for centre, coef, c in zip((0.35 * Y, 0.55 * Y), self.f_modes, self.f_profiles):
            full = self._embed(coef, self.band, grid)
            shape = np.exp(-((ys - centre) ** 2) / (2 * width**2))
            f_vals += self._profile(c, times)[:, None, None, None] * full[None, :, None, :] * shape[None, None, :, None]
        f = DiscreteField(f_vals, times, grid, ys)
        return f, g, self._embed(self.rho0_modes, self.band, grid)

    def scaled(self, factor: float) -> "DataRecipe":
        return DataRecipe(
            self.band,
            self.dim,
            tuple(factor * c for c in self.g_modes),
            self.g_profiles,
            tuple(factor * c for c in self.f_modes),
            self.f_profiles,
            factor * self.rho0_modes,
            self.T,
        )


def random_recipe(spec, rng: np.random.Generator, band: int, T: float = 1.0) -> DataRecipe:
    """Draw a :class:`DataRecipe` for ``spec`` from ``rng``."""
    grid = TangentialGrid(spec.n - 1, band)
    g_modes, g_prof = [], []
    for j in range(spec.m + 1):
        rows = spec.dimF if j == 0 else spec.dimE
        g_modes.append(random_band_limited(rng, grid, rows))
        g_prof.append(rng.standard_normal(3))
    f_modes, f_prof = [], []
    for _ in range(2):
        f_modes.append(random_band_limited(rng, grid, spec.dimE))
        f_prof.append(rng.standard_normal(3))
    rho0 = random_band_limited(rng, grid, spec.dimF)
    return DataRecipe(band, spec.n - 1, tuple(g_modes), tuple(g_prof), tuple(f_modes), tuple(f_prof), rho0, T)
