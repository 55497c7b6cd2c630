"""Closed-form determinants of the built-in examples, derived by hand.

All use ``D_y = -i d_y``, so a candidate ``v = e^{-z y}`` has normal data
``D_y^k v(0) = (i z)^k`` and ``v = y e^{-s y}`` has
``D_y^k v(0) = (-i)^k k (-s)^{k-1}``.
"""
import math

import numpy as np

from quasisteady.halfspace import DiscreteField, uniform_heights


def sample_modes(rng, count, theta=0.75 * math.pi, dim=1):
    """Seeded ``(eta, lam, xi')`` with ``eta > 0`` and ``lam`` in the sector of half-angle ``theta``."""
    out = []
    for _ in range(count):
        eta = 10.0 ** rng.uniform(-2, 4)
        lam = 10.0 ** rng.uniform(-3, 3) * np.exp(1j * rng.uniform(-theta, theta))
        xi = rng.standard_normal(dim) * 10.0 ** rng.uniform(-2, 2)
        out.append((eta, complex(lam), xi))
    return out


def exp_basis(z_values, order):
    """Normal data of ``e^{-z y}`` for each ``z``, stacked over ``k = 0..order-1``."""
    z = np.asarray(z_values, dtype=complex)
    k = np.arange(order)[:, None]
    return (1j * z[None, :]) ** k


def ye_basis(s, order):
    """Normal data of ``y e^{-s y}``."""
    k = np.arange(order)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (-1j) ** k * k * np.where(k > 0, (-s + 0j) ** (k - 1), 0.0)
    return out


def laplace_det(eta, lam, xi):
    """``det [[z, lam], [1, -1]] = -(lam + z)``, ``z = sqrt(eta + |xi'|^2)``."""
    return -(lam + math.sqrt(eta + float(np.dot(xi, xi))))


def laplace_broken_det(eta, lam, xi):
    """Coupling row ``u + rho``: ``det [[z, lam], [1, 1]] = z - lam``."""
    return math.sqrt(eta + float(np.dot(xi, xi))) - lam


def bilaplace_roots(eta, xi):
    r2 = float(np.dot(xi, xi))
    s = math.sqrt(eta)
    return np.sqrt(r2 + 1j * s + 0j), np.sqrt(r2 - 1j * s + 0j)


def bilaplace_displayed_matrix(eta, lam, xi):
    r2 = float(np.dot(xi, xi))
    z1, z2 = bilaplace_roots(eta, xi)
    return np.array(
        [
            [z1, z2, lam + r2],
            [z1 * (z1**2 - r2), z2 * (z2**2 - r2), 0.0],
            [1.0, 1.0, -1.0],
        ],
        dtype=complex,
    )


def cofactor_det(M):
    """Determinant by Laplace expansion along the first row."""
    M = np.asarray(M)
    if M.shape == (1, 1):
        return M[0, 0]
    return sum((-1) ** c * M[0, c] * cofactor_det(np.delete(M[1:], c, axis=1)) for c in range(M.shape[1]))


def bilaplace_ls_det(eta, lam, xi):
    """``i sqrt(eta) ((lam + |xi'|^2)(z1 + z2) + 2 z1 z2)``."""
    r2 = float(np.dot(xi, xi))
    z1, z2 = bilaplace_roots(eta, xi)
    return 1j * math.sqrt(eta) * ((lam + r2) * (z1 + z2) + 2 * z1 * z2)


def bilaplace_family1_det(eta, xi):
    """Elliptic rows only: ``det [[i s z1, -i s z2], [1, 1]] = i s (z1 + z2)``."""
    z1, z2 = bilaplace_roots(eta, xi)
    return 1j * math.sqrt(eta) * (z1 + z2)


def bilaplace_family1_reference(eta, xi):
    """Reference closed form ``-i sqrt(eta) (2|xi'|^2/(z1 + z2) + z1 + z2)``."""
    r2 = float(np.dot(xi, xi))
    z1, z2 = bilaplace_roots(eta, xi)
    return -1j * math.sqrt(eta) * (2 * r2 / (z1 + z2) + z1 + z2)


def bilaplace_family2_reference(lam, xi):
    """``-2 |xi'| (lam + |xi'|^2)``."""
    r = float(np.linalg.norm(xi))
    return -2 * r * (lam + r * r)


def gaussian_source(spec, grid, t, Y, n=256, centre=0.5, width=1 / 20, k=1):
    """``u = e^{-t} g(y) cos(k x)`` with ``g`` Gaussian and ``f = (eta + A) u`` by hand."""
    ys = uniform_heights(Y, n)
    c, w = centre * Y, width * Y
    G = np.exp(-((ys - c) ** 2) / (2 * w**2))
    s = (ys - c) / w**2
    G2 = G * (s**2 - 1 / w**2)
    G4 = G * (s**4 - 6 * s**2 / w**2 + 3 / w**4)
    coef = np.zeros(grid.n_modes)
    coef[grid.mode_index([k])] = coef[grid.mode_index([-k])] = 0.5
    if spec.m == 1:
        fy = (spec.eta + k**2) * G - G2
    else:
        fy = (spec.eta + k**4) * G - 2 * k**2 * G2 + G4
    f = np.exp(-t)[:, None, None, None] * coef[None, :, None, None] * fy[None, None, :, None]
    u = np.exp(-t)[:, None, None, None] * coef[None, :, None, None] * G[None, None, :, None]
    return DiscreteField(f, t, grid, ys), DiscreteField(u, t, grid, ys)


def laplace_residual(spec, u, f):
    """``eta u + |k|^2 u - d_y^2 u - f`` on interior nodes, ``d_y^2`` by an 8th-order stencil."""
    h = f.heights[1]
    st = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560]) / h**2
    v = u.values[..., 0]
    d2 = sum(c * np.roll(v, 4 - i, axis=2) for i, c in enumerate(st))[..., 4:-4]
    k2 = (u.grid.xi[:, 0] ** 2)[None, :, None]
    return (spec.eta + k2) * v[..., 4:-4] - d2 - f.values[..., 4:-4, 0]
