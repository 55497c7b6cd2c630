import math

import numpy as np
import pytest

from oracles import (
    bilaplace_displayed_matrix,
    bilaplace_family1_det,
    bilaplace_ls_det,
    bilaplace_roots,
    cofactor_det,
    exp_basis,
    laplace_broken_det,
    laplace_det,
    sample_modes,
    ye_basis,
)
from quasisteady.companion import build_companion, mode_companion, mode_parameters, stable_projection
from quasisteady.lopatinskii import (
    PreconditionError,
    ScanGrid,
    assemble_boundary_matrix,
    assemble_limit_matrix,
    assemble_raw_boundary_matrix,
    check_ALS,
    check_LS,
    multiplier_bound_scan,
    sigma_factors,
)

SMALL = ScanGrid(n_zeta=9, n_nu_r=9, n_nu_phi=5, n_eta=3)


def _scaled(spec, eta, lam, xi):
    par = mode_parameters(eta, xi, lam, spec.m, spec.l)
    sys = stable_projection(build_companion(spec, par.zeta, par.a))
    return assemble_boundary_matrix(spec.with_eta(eta), sys, par)


def test_laplace_raw_determinant(laplace, rng):
    for eta, lam, xi in sample_modes(rng, 100):
        z = math.sqrt(eta + xi @ xi)
        M = assemble_raw_boundary_matrix(laplace, xi, lam, eta, basis=exp_basis([z], 2))
        expected = laplace_det(eta, lam, xi)
        assert abs(np.linalg.det(M) - expected) <= 1e-10 * abs(expected)


def test_laplace_scaled_determinant_is_constant(laplace, rng):
    # the stable vector is (1, i)/sqrt(2) after scaling, so det = -(nu + 1)/(sqrt 2 (nu + 1))
    for eta, lam, xi in sample_modes(rng, 50):
        M = _scaled(laplace, eta, lam, xi).M
        assert abs(abs(np.linalg.det(M)) - 1 / math.sqrt(2)) <= 1e-12


def test_broken_scaled_determinant(broken, rng):
    for eta, lam, xi in sample_modes(rng, 50):
        bm = _scaled(broken, eta, lam, xi)
        nu = bm.params["nu"]
        expected = abs(1 - nu) / (math.sqrt(2) * abs(nu + 1))
        assert abs(abs(np.linalg.det(bm.M)) - expected) <= 1e-12 * max(1.0, expected)


def test_broken_raw_determinant(broken, rng):
    for eta, lam, xi in sample_modes(rng, 50):
        z = math.sqrt(eta + xi @ xi)
        M = assemble_raw_boundary_matrix(broken, xi, lam, eta, basis=exp_basis([z], 2))
        expected = laplace_broken_det(eta, lam, xi)
        assert abs(np.linalg.det(M) - expected) <= 1e-10 * max(abs(expected), z)


def test_bilaplace_displayed_matrix(bilaplace, rng):
    for eta, lam, xi in sample_modes(rng, 100):
        D = bilaplace_displayed_matrix(eta, lam, xi)
        M = assemble_raw_boundary_matrix(bilaplace, xi, lam, eta, basis=exp_basis(bilaplace_roots(eta, xi), 4))
        np.testing.assert_allclose(M, D, rtol=1e-12, atol=1e-12 * np.abs(D).max())
        brute = cofactor_det(D)
        scale = abs(brute) + 1e-300
        assert abs(np.linalg.det(M) - brute) <= 1e-10 * scale
        assert abs(bilaplace_ls_det(eta, lam, xi) - brute) <= 1e-10 * scale


def test_bilaplace_elliptic_rows(bilaplace, rng):
    for eta, _, xi in sample_modes(rng, 100):
        basis = exp_basis(bilaplace_roots(eta, xi), 4)
        M = assemble_raw_boundary_matrix(bilaplace, xi, 0.0, eta, basis=basis)[1:, :2]
        expected = bilaplace_family1_det(eta, xi)
        assert abs(np.linalg.det(M) - expected) <= 1e-10 * abs(expected)


def test_bilaplace_second_family_magnitude(bilaplace, rng):
    # a = 0, |xi'| = 1: v = C1 e^{-y} + C2 y e^{-y}; the l_2 < l coupling drops out
    basis = np.stack([exp_basis([1.0], 4)[:, 0], ye_basis(1.0, 4)], axis=1)
    for _ in range(50):
        lam = 10 ** rng.uniform(-3, 3) * np.exp(1j * rng.uniform(-0.75 * math.pi, 0.75 * math.pi))
        xi = np.array([rng.choice([-1.0, 1.0])])
        M = assemble_raw_boundary_matrix(bilaplace, xi, lam, 1.0, basis=basis)
        M[2, 2] = 0.0
        expected = 2 * abs(lam + 1)
        assert abs(abs(np.linalg.det(M)) - expected) <= 1e-10 * expected


def test_unscaled_matches_raw(bilaplace, rng):
    for eta, lam, xi in sample_modes(rng, 30):
        bm = _scaled(bilaplace, eta, lam, xi)
        A, mu = mode_companion(bilaplace, xi, eta, principal=True)
        basis = np.repeat(mu ** np.arange(4.0), 1)[:, None] * bm.stable_basis
        raw = assemble_raw_boundary_matrix(bilaplace, xi, lam, eta, basis=basis)
        np.testing.assert_allclose(bm.unscaled(), raw, rtol=1e-9, atol=1e-9 * np.abs(raw).max())


def test_solve_raw_recovers_data(bilaplace):
    bm = _scaled(bilaplace, 5.0, 2.0 - 1.0j, np.array([0.7]))
    h = np.array([1.0, -2.0j, 0.5])
    w0, sigma = bm.solve_raw(h)
    c = bm.stable_basis.conj().T @ w0
    np.testing.assert_allclose(bm.unscaled() @ np.concatenate([c, sigma]), h, atol=1e-10)


def test_sigma_factors_limit(bilaplace):
    np.testing.assert_array_equal(sigma_factors(bilaplace, 0.0, 3.0), [1.0, 0.0, 0.0])
    f = sigma_factors(bilaplace, 0.5, np.array([1.0, 4.0]))
    # eta^{(l_2 - l)/2m} a_tilde^{l - l_2} with l_2 = 1, l = 2, m = 2
    np.testing.assert_allclose(f[:, 2], 0.5 * np.array([1.0, 4.0]) ** -0.25)


def test_limit_cases(laplace, bilaplace):
    for case in ("i_infinite_mu", "iii"):
        bm = assemble_limit_matrix(bilaplace, [1.0], case)
        assert bm.smallest_singular_value > 0.1
    bm = assemble_limit_matrix(laplace, [-1.0], "ii", c=0.5)
    assert abs(abs(np.linalg.det(bm.M)) - 1 / math.sqrt(2)) < 1e-12
    assert assemble_limit_matrix(laplace, [0.3], "i_finite_mu", a=0.91).M.shape == (2, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(zeta=[0.5], case="ii", c=0.0),
        dict(zeta=[1.0], case="ii"),
        dict(zeta=[0.5], case="i_finite_mu"),
        dict(zeta=[1.0], case="vi"),
    ],
)
def test_limit_case_preconditions(laplace, kwargs):
    with pytest.raises(PreconditionError):
        assemble_limit_matrix(laplace, **kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [dict(eta_range=(0.0, 1.0)), dict(theta=math.pi / 2), dict(theta=math.pi), dict(n_zeta=1), dict(n_nu_phi=1)],
)
def test_scan_grid_rejects(kwargs):
    with pytest.raises(PreconditionError):
        ScanGrid(**kwargs)


def test_grids_nest():
    g = SMALL
    r = g.refined()
    assert set(np.round(g.radii(), 14)) <= set(np.round(r.radii(), 14))
    assert np.all(np.isin(np.round(g.nu_values(), 12), np.round(r.nu_values(), 12)))
    assert np.all(np.isin(np.round(g.etas(), 9), np.round(r.etas(), 9)))


@pytest.mark.parametrize("name", ["laplace", "laplace_diffusive", "bilaplace"])
def test_checks_pass_on_builtins(name, request):
    spec = request.getfixturevalue(name)
    reports = [check_LS(spec, SMALL), *check_ALS(spec, SMALL)]
    assert [r.condition for r in reports] == ["LS", "ALS_i", "ALS_ii", "ALS_iii"]
    assert all(r.verdict for r in reports)
    assert all(r.min_singular_value >= 1e-3 for r in reports)


def test_laplace_ls_value(laplace):
    rep = check_LS(laplace, SMALL)
    # the |nu| = oo face at zeta = 0 pairs (1, i)/sqrt 2 with the unit column
    assert rep.min_singular_value == pytest.approx(0.3410813774, rel=1e-8)


def test_broken_fails_ls_at_unit_nu(broken):
    rep = check_LS(broken, ScanGrid())
    assert not rep.verdict
    nu = rep.witness["nu"]
    nu = complex(nu["re"], nu["im"]) if isinstance(nu, dict) else complex(nu)
    assert abs(nu - 1.0) < 1e-9
    fam = check_ALS(broken, SMALL)
    assert [r.verdict for r in fam] == [True, False, True]


def test_refinement_is_monotone(bilaplace):
    coarse = check_LS(bilaplace, SMALL)
    fine = check_LS(bilaplace, SMALL.refined())
    assert fine.min_singular_value <= coarse.min_singular_value + 1e-15


def test_scans_are_deterministic(bilaplace):
    assert check_LS(bilaplace, SMALL).to_dict() == check_LS(bilaplace, SMALL).to_dict()


def test_ls_report_json(laplace):
    import json

    d = json.loads(check_LS(laplace, SMALL).to_json())
    assert d["verdict"] == "pass"
    assert {"zeta", "a_tilde", "nu", "eta", "face"} <= set(d["witness"])
    assert d["threshold"] == pytest.approx(1e-6 * d["max_matrix_norm"])


@pytest.mark.slow
def test_bound_scan_laplace(laplace):
    rep = multiplier_bound_scan(laplace, ScanGrid(n_zeta=5, n_nu_r=5, n_nu_phi=3, n_eta=3), refinements=1)
    assert rep.bounded
    assert rep.ratios[0] == pytest.approx(1.0, abs=0.05)
    assert rep.to_dict()["verdict"] == "bounded"


@pytest.mark.slow
def test_bound_scan_broken(broken):
    rep = multiplier_bound_scan(broken, ScanGrid(n_zeta=5, n_nu_r=5, n_nu_phi=3, n_eta=3), refinements=1, lizorkin=False)
    assert not rep.bounded


def test_bound_scan_rejects_negative_refinements(laplace):
    with pytest.raises(PreconditionError):
        multiplier_bound_scan(laplace, refinements=-1)
