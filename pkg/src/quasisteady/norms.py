"""Discrete norms of the data and solution spaces and the ratio check.

Tangential smoothness is always applied spectrally with the multiplier
``(1 + |xi'|^2)^{s/2}``; the ``L_q`` norm in ``x'`` is a sum over the
physical samples, and ``L_p`` in time and ``L_q`` in ``y`` use the
composite trapezoid rule.  For ``p = q = 2`` the tangential part is exact
by Parseval.  Interior ``W^{2m}_q`` norms use the equivalent form
``(sum_{j <= 2m} ||Lambda^{2m-j} d_y^j u||_q^q)^{1/q}`` with
``Lambda = (1 + |xi'|^2)^{1/2}`` and finite differences in ``y``.

Besov norms use the dyadic blocks ``Delta_0 = {|xi'| <= 1}`` and
``Delta_k = {2^{k-1} < |xi'| <= 2^k}``; the result is only equivalent to
the continuum norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .halfspace import BoundaryField, DiscreteField, HalfSpaceSolver, TangentialGrid, graded_heights
from .manufactured import DataRecipe, random_recipe
from .reports import jsonable
from .symbols import ProblemSpec

__all__ = [
    "SpaceTag",
    "sobolev_norm",
    "besov_norm",
    "dyadic_blocks",
    "EnsembleSpec",
    "RatioReport",
    "solution_ratio",
    "verify_max_regularity",
    "mixed_derivative_diagnostic",
]

_KINDS = ("X", "Y", "Z_u", "Z_rho", "piZ_rho", "plain")


@dataclass(frozen=True)
class SpaceTag:
    """A function space with its smoothness orders.

    Build tags through the constructors (``X``, ``Y``, ``Z_u``, ``Z_rho``,
    ``piZ_rho``), which read every order off the problem; ``plain`` is
    ``W^{s_time}_p(J; W^{s_space}_q)`` with ``s_time`` in ``{0, 1}``.
    """

    kind: str
    p: float
    q: float
    s_space: float = 0.0
    s_time: int = 0
    s_high: float | None = None
    interior_order: int = 0
    j: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if not (1 < self.p < math.inf and 1 < self.q < math.inf):
            raise ValueError("p and q must lie in (1, oo)")
        if self.s_time not in (0, 1):
            raise ValueError("time smoothness must be 0 or 1")

    @classmethod
    def X(cls, spec: ProblemSpec) -> "SpaceTag":
        return cls("X", spec.p, spec.q)

    @classmethod
    def Y(cls, spec: ProblemSpec, j: int) -> "SpaceTag":
        return cls("Y", spec.p, spec.q, s_space=2 * spec.m * spec.kappa[j], j=j)

    @classmethod
    def Z_u(cls, spec: ProblemSpec) -> "SpaceTag":
        return cls("Z_u", spec.p, spec.q, interior_order=2 * spec.m)

    @classmethod
    def Z_rho(cls, spec: ProblemSpec) -> "SpaceTag":
        s0 = 2 * spec.m * spec.kappa[0]
        return cls("Z_rho", spec.p, spec.q, s_space=s0, s_time=1, s_high=spec.l + s0)

    @classmethod
    def piZ_rho(cls, spec: ProblemSpec) -> "SpaceTag":
        s = spec.l * (1 - 1 / spec.p) + 2 * spec.m * spec.kappa[0]
        return cls("piZ_rho", spec.p, spec.q, s_space=s)

    @classmethod
    def plain(cls, p: float, q: float, s_time: int = 0, s_space: float = 0.0) -> "SpaceTag":
        return cls("plain", p, q, s_space=s_space, s_time=s_time)


def _multiplier(grid: TangentialGrid, s: float) -> np.ndarray:
    return (1.0 + np.sum(grid.xi**2, axis=-1)) ** (s / 2.0)


def _lq_boundary(values: np.ndarray, grid: TangentialGrid, q: float) -> np.ndarray:
    """``L_q(T^{n-1})`` norm of coefficient arrays ``(..., n_modes, comps)``."""
    samples = grid.to_samples(np.moveaxis(values, -2, 0))
    mag = np.linalg.norm(samples, axis=-1)
    cell = (grid.L / grid.N) ** grid.dim
    integral = np.sum(mag**q, axis=tuple(range(grid.dim))) * cell
    return integral ** (1.0 / q)


def _lq_interior(values: np.ndarray, grid: TangentialGrid, heights: np.ndarray, q: float) -> np.ndarray:
    """``L_q(T^{n-1} x (0, Y))`` norm of arrays ``(..., n_modes, n_y, comps)``."""
    samples = grid.to_samples(np.moveaxis(values, -3, 0))
    mag = np.linalg.norm(samples, axis=-1)
    cell = (grid.L / grid.N) ** grid.dim
    per_y = np.sum(mag**q, axis=tuple(range(grid.dim))) * cell
    if len(heights) == 1:
        return per_y[..., 0] ** (1.0 / q)
    return np.trapezoid(per_y, heights, axis=-1) ** (1.0 / q)


def _lp_time(values: np.ndarray, times: np.ndarray, p: float) -> float:
    if len(times) == 1:
        return float(values[0])
    return float(np.trapezoid(np.asarray(values) ** p, times) ** (1.0 / p))


def _time_derivative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.gradient(values, times, axis=0, edge_order=2 if len(times) > 2 else 1)


def _boundary_norm(field: BoundaryField, p, q, s, s_time) -> float:
    mult = _multiplier(field.grid, s)[None, :, None]
    out = _lp_time(_lq_boundary(mult * field.values, field.grid, q), field.times, p)
    if s_time:
        dv = _time_derivative(field.values, field.times)
        out += _lp_time(_lq_boundary(mult * dv, field.grid, q), field.times, p)
    return out


def _interior_norm(field: DiscreteField, p, q, s, order: int) -> float:
    grid, heights = field.grid, field.heights
    lam2 = 1.0 + np.sum(grid.xi**2, axis=-1)
    acc = np.zeros(len(field.times))
    deriv = field.values
    for j in range(order + 1):
        if j:
            deriv = np.gradient(deriv, heights, axis=2, edge_order=2)
        mult = lam2 ** ((order - j + s) / 2.0)
        acc = acc + _lq_interior(mult[None, :, None, None] * deriv, grid, heights, q) ** q
    return _lp_time(acc ** (1.0 / q), field.times, p)


def sobolev_norm(field, tag: SpaceTag) -> float:
    """Discrete norm of ``field`` in the space described by ``tag``.

    ``X`` and ``Z_u`` need a :class:`DiscreteField`; ``Y``, ``Z_rho`` and
    ``piZ_rho`` need a :class:`BoundaryField` (``piZ_rho`` uses its first
    time slice).  ``plain`` accepts either; for an interior field only
    tangential smoothness is applied.
    """
    interior = isinstance(field, DiscreteField)
    if tag.kind in ("X", "Z_u") and not interior:
        raise TypeError(f"space {tag.kind} needs an interior field")
    if tag.kind in ("Y", "Z_rho", "piZ_rho") and interior:
        raise TypeError(f"space {tag.kind} needs a boundary field")
    if tag.kind == "piZ_rho":
        return besov_norm(field, tag.s_space, tag.q, tag.p)
    if interior:
        if tag.s_time:
            raise ValueError("time smoothness is not supported for interior fields")
        return _interior_norm(field, tag.p, tag.q, tag.s_space, tag.interior_order)
    if tag.kind == "Z_rho":
        low = _boundary_norm(field, tag.p, tag.q, tag.s_space, 1)
        return low + _boundary_norm(field, tag.p, tag.q, tag.s_high, 0)
    return _boundary_norm(field, tag.p, tag.q, tag.s_space, tag.s_time)


def dyadic_blocks(grid: TangentialGrid) -> list[np.ndarray]:
    """Boolean masks of the Littlewood-Paley blocks over the grid modes."""
    r = np.linalg.norm(grid.xi, axis=-1)
    blocks = [r <= 1.0]
    top = math.ceil(math.log2(r.max())) if r.max() > 1.0 else 0
    for k in range(1, top + 1):
        blocks.append((r > 2.0 ** (k - 1)) & (r <= 2.0**k))
    return blocks


def besov_norm(field, s: float, q: float, p: float, grid: TangentialGrid | None = None, time_index: int = 0) -> float:
    """``(sum_k 2^{k s p} ||Delta_k field||_q^p)^{1/p}`` at one time.

    ``field`` is a :class:`BoundaryField` (slice ``time_index``) or an array
    of coefficients ``(n_modes, comps)`` together with ``grid``.
    """
    if not s > 0:
        raise ValueError("Besov smoothness must be positive")
    if isinstance(field, BoundaryField):
        coef, grid = field.values[time_index], field.grid
    else:
        if grid is None:
            raise ValueError("a grid is needed for raw coefficients")
        coef = np.asarray(field, dtype=complex)
    total = 0.0
    for k, mask in enumerate(dyadic_blocks(grid)):
        if not mask.any():
            continue
        part = np.where(mask[:, None], coef, 0.0)
        total += 2.0 ** (k * s * p) * float(_lq_boundary(part, grid, q)) ** p
    return total ** (1.0 / p)


@dataclass(frozen=True)
class EnsembleSpec:
    """Seeded ensemble of random band-limited data for the ratio check.

    ``zero_members`` lists member indices whose data are replaced by zero
    (they are skipped in the ratio statistics and reported).
    """

    size: int = 32
    seed: int = 0
    K: int = 16
    Nt: int = 64
    T: float = 1.0
    band: int = 8
    n_source: int = 128
    n_heights: int = 64
    tolerance: float = 0.2
    zero_members: tuple = ()

    def __post_init__(self):
        if self.size < 1 or self.K < self.band or self.Nt < 1:
            raise ValueError("need size >= 1, K >= band and Nt >= 1")

    def recipes(self, spec: ProblemSpec) -> list[DataRecipe]:
        rng = np.random.default_rng(self.seed)
        out = [random_recipe(spec, rng, self.band, self.T) for _ in range(self.size)]
        return [r.scaled(0.0) if i in self.zero_members else r for i, r in enumerate(out)]


@dataclass(frozen=True)
class RatioReport:
    eta: float
    ensemble_size: int
    resolution: list
    max_ratio: float
    refined_max_ratio: float
    verdict: str
    seed: int
    skipped: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    refined_ratios: list = field(default_factory=list)

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def to_dict(self) -> dict:
        return jsonable(
            {
                "eta": self.eta,
                "ensemble_size": self.ensemble_size,
                "resolution": self.resolution,
                "max_ratio": self.max_ratio,
                "refined_max_ratio": self.refined_max_ratio,
                "verdict": self.verdict,
                "seed": self.seed,
                "skipped": self.skipped,
            }
        )


def solution_ratio(spec: ProblemSpec, f, g, rho0, u, rho) -> float:
    """``(eta ||u||_X + ||u||_{Z_u} + ||rho||_{Z_rho}) / (||f||_X + sum ||g_j||_{Y_j} + ||rho0||_{piZ_rho})``.

    Returns ``nan`` when the data norm vanishes.
    """
    data = sobolev_norm(f, SpaceTag.X(spec)) if f is not None else 0.0
    data += sum(sobolev_norm(gj, SpaceTag.Y(spec, j)) for j, gj in enumerate(g))
    tag = SpaceTag.piZ_rho(spec)
    data += besov_norm(rho0, tag.s_space, tag.q, tag.p, grid=g[0].grid)
    if data == 0.0:
        return math.nan
    sol = spec.eta * sobolev_norm(u, SpaceTag.X(spec))
    sol += sobolev_norm(u, SpaceTag.Z_u(spec))
    sol += sobolev_norm(rho, SpaceTag.Z_rho(spec))
    return sol / data


def _ensemble_ratios(spec, recipes, K, Nt, ens: EnsembleSpec):
    grid = TangentialGrid(spec.n - 1, K)
    times = np.linspace(0.0, ens.T, Nt + 1)
    Y = 10.0 / math.sqrt(spec.eta)
    solver = HalfSpaceSolver(spec, grid, graded_heights(Y, ens.n_heights))
    ratios = []
    for recipe in recipes:
        f, g, rho0 = recipe.sample(spec, grid, times, ens.n_source, Y)
        u, rho = solver.solve(f, g, rho0)
        ratios.append(solution_ratio(spec, f, g, rho0, u, rho))
    return ratios


def verify_max_regularity(spec: ProblemSpec, ensemble: EnsembleSpec | None = None, eta: float | None = None) -> RatioReport:
    """Ratio of solution to data norms over an ensemble at two resolutions.

    The second resolution doubles ``K`` and ``Nt``.  The verdict is
    ``"bounded"`` when the two maxima agree within ``ensemble.tolerance``
    (relative to the coarse maximum).
    """
    ens = EnsembleSpec() if ensemble is None else ensemble
    if eta is not None:
        spec = spec.with_eta(eta)
    recipes = ens.recipes(spec)
    coarse = _ensemble_ratios(spec, recipes, ens.K, ens.Nt, ens)
    fine = _ensemble_ratios(spec, recipes, 2 * ens.K, 2 * ens.Nt, ens)
    skipped = [i for i, r in enumerate(coarse) if not math.isfinite(r)]
    kept = [r for r in coarse if math.isfinite(r)]
    kept_fine = [r for r in fine if math.isfinite(r)]
    if not kept:
        raise ValueError("every ensemble member has zero data")
    rmax, rmax_fine = max(kept), max(kept_fine)
    verdict = "bounded" if abs(rmax_fine - rmax) <= ens.tolerance * rmax else "unstable under refinement"
    return RatioReport(
        eta=spec.eta,
        ensemble_size=ens.size,
        resolution=[[ens.K, ens.Nt], [2 * ens.K, 2 * ens.Nt]],
        max_ratio=rmax,
        refined_max_ratio=rmax_fine,
        verdict=verdict,
        seed=ens.seed,
        skipped=skipped,
        ratios=coarse,
        refined_ratios=fine,
    )


def _slobodeckij_time(values: np.ndarray, times: np.ndarray, s: float, p: float) -> float:
    """Discrete ``W^s_p(J)`` seminorm (``0 < s < 1``) of a norm time series."""
    t = np.asarray(times)
    diff = np.abs(values[:, None] - values[None, :]) if values.ndim == 1 else np.linalg.norm(values[:, None] - values[None, :], axis=-1)
    dist = np.abs(t[:, None] - t[None, :])
    off = dist > 0
    w = np.gradient(t)
    kernel = np.where(off, diff**p / np.where(off, dist, 1.0) ** (1 + s * p), 0.0)
    return float((w @ kernel @ w) ** (1.0 / p))


def mixed_derivative_diagnostic(spec: ProblemSpec, rho: BoundaryField, orders=(0.0, 0.5, 1.0)) -> dict:
    """Norms of ``rho`` in ``W^s_p(J; W^{l(1-s) + 2m kappa_0}_q)`` for a few ``s``.

    Reported only (no assertion): the values and whether ``log`` of the
    norm is convex in ``s`` over the given orders.  Fractional orders use a
    Slobodeckij double sum of spatial samples in time.
    """
    s0 = 2 * spec.m * spec.kappa[0]
    grid, times, p, q = rho.grid, rho.times, spec.p, spec.q
    values = {}
    for s in orders:
        mult = _multiplier(grid, spec.l * (1 - s) + s0)[None, :, None]
        scaled = mult * rho.values
        base = _lp_time(_lq_boundary(scaled, grid, q), times, p)
        if s == 0:
            values[s] = base
        elif s == 1:
            values[s] = base + _lp_time(_lq_boundary(_time_derivative(scaled, times), grid, q), times, p)
        else:
            samples = grid.to_samples(np.moveaxis(scaled, 1, 0))
            flat = np.moveaxis(samples, grid.dim, 0).reshape(len(times), -1)
            cell = (grid.L / grid.N) ** grid.dim
            values[s] = base + _slobodeckij_time(flat * cell ** (1.0 / q), times, s, p)
    logs = [math.log(values[s]) if values[s] > 0 else -math.inf for s in orders]
    convex = all(
        logs[i] <= 0.5 * (logs[i - 1] + logs[i + 1]) + 1e-12 for i in range(1, len(orders) - 1)
    ) if len(orders) >= 3 else True
    return {"orders": list(orders), "norms": [values[s] for s in orders], "log_convex": convex}
