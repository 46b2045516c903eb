import math

import numpy as np
import pytest

from forcedflow import forcing as fo

SWIRL_L2 = math.pi * 0.25  # pi A^2 s^2 at A = 1, s = 0.5
SWIRL_DIRICHLET = 2 * math.pi  # 2 pi A^2 per unit time


@pytest.fixture(scope="module")
def swirl():
    return fo.gaussian_swirl(1.0, 0.5)


CATALOG = [
    fo.constant_patch((0.3, -0.4), 0.7, center=(0.2, 0.1)),
    fo.gaussian_swirl(1.5, 0.4, center=(-0.3, 0.2)),
    fo.shear_patch(0.8, 0.3, 1.0, center=(0.1, 0.0)),
]


# --- evaluation ---------------------------------------------------------------

def test_zero_field_everywhere_zero():
    u = fo.catalog("zero")
    pts = np.random.default_rng(0).normal(size=(20, 2))
    assert np.all(u.eval(pts, 0.3) == 0.0) and np.all(u.grad(pts, 0.3) == 0.0)


def test_swirl_vanishes_at_center():
    u = fo.gaussian_swirl(2.0, 0.3, center=(0.4, -0.1))
    assert np.all(u.eval((0.4, -0.1), 0.0) == 0.0)


def test_swirl_is_divergence_free(swirl):
    J = swirl.grad(np.random.default_rng(1).uniform(-1, 1, (30, 2)), 0.0)
    assert np.max(np.abs(J[:, 0, 0] + J[:, 1, 1])) < 1e-13


@pytest.mark.parametrize("u", CATALOG, ids=lambda u: u.kind)
def test_gradient_matches_differences(u):
    x = np.random.default_rng(2).uniform(-0.9, 0.9, (25, 2))
    J = u.grad(x, 0.0)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (u.eval(x + e, 0.0) - u.eval(x - e, 0.0)) / (2 * h)
        np.testing.assert_allclose(J[:, :, j], fd, rtol=1e-3, atol=1e-6)


@pytest.mark.parametrize("u", CATALOG, ids=lambda u: u.kind)
def test_zero_outside_support(u):
    far = np.array([[u.support_radius * 1.01, 0.0], [0.0, -u.support_radius * 1.5]])
    assert np.all(u.eval(far, 0.0) == 0.0) and np.all(u.grad(far, 0.0) == 0.0)


def test_zero_after_horizon():
    w = fo.constant_patch(horizon=1.0)
    assert np.all(w.eval((0.0, 0.0), 1.5) == 0.0)
    np.testing.assert_allclose(w.eval((0.0, 0.0), 0.5), [0.0, 1.0])


def test_grid_reproduces_node_values(swirl):
    lat = fo.Lattice(21, 17, 1, -1.0, -0.8, 0.0, 0.1, 0.1, 1.0)
    g = fo.sample(swirl, lat)
    X, Y = np.meshgrid(lat.xs, lat.ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    np.testing.assert_allclose(g.eval(pts, 0.3), swirl.eval(pts, 0.3), atol=1e-15)


def test_grid_time_interpolation_is_linear():
    lat = fo.Lattice(2, 2, 2, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    vals = np.zeros((2, 2, 2, 2))
    vals[1] = 2.0
    g = fo.grid_field(lat, vals)
    np.testing.assert_allclose(g.eval((0.5, 0.5), 0.25), [0.5, 0.5])


def test_malformed_grid_is_refused():
    lat = fo.Lattice(3, 3, 1, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(fo.GridError):
        fo.grid_field(lat, np.zeros((1, 3, 2, 2)))
    with pytest.raises(fo.GridError):
        fo.grid_field(lat, np.full((1, 3, 3, 2), np.nan))


def test_grid_file_round_trip(tmp_path, swirl):
    lat = fo.Lattice(9, 7, 2, -1.0, -0.6, 0.0, 0.25, 0.2, 0.5)
    g = fo.sample(swirl, lat)
    p = tmp_path / "u.csv"
    fo.save_grid(g, p)
    back = fo.load_grid(p)
    x = np.array([[0.13, -0.21], [0.5, 0.4]])
    np.testing.assert_array_equal(back.eval(x, 0.2), g.eval(x, 0.2))
    np.testing.assert_array_equal(back.grad(x, 0.2), g.grad(x, 0.2))


def test_grid_file_with_shuffled_rows_is_refused(tmp_path, swirl):
    lat = fo.Lattice(3, 3, 1, 0.0, 0.0, 0.0, 0.5, 0.5, 1.0)
    p = tmp_path / "u.csv"
    fo.save_grid(fo.sample(swirl, lat), p)
    lines = p.read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(fo.GridError):
        fo.load_grid(p)


# --- budgets ----------------------------------------------------------------------

def test_zero_budget():
    b = fo.sobolev_budget(fo.zero_field(), 1.0)
    assert (b.sup_l2, b.dirichlet, b.c1) == (0.0, 0.0, 0.0)


def test_swirl_budget_matches_closed_form(swirl):
    b = fo.sobolev_budget(swirl, 0.5)
    assert b.sup_l2 == pytest.approx(SWIRL_L2, rel=5e-3)
    assert b.dirichlet == pytest.approx(0.5 * SWIRL_DIRICHLET, rel=5e-3)
    assert b.c1 == b.sup_l2 * b.dirichlet
    assert not b.coarse


def test_budget_homogeneity(swirl):
    b1 = fo.sobolev_budget(swirl, 0.5)
    b2 = fo.sobolev_budget(fo.scaled(swirl, 2.0), 0.5)
    assert b2.sup_l2 == pytest.approx(4 * b1.sup_l2, rel=1e-12)
    assert b2.dirichlet == pytest.approx(4 * b1.dirichlet, rel=1e-12)
    assert b2.c1 == pytest.approx(16 * b1.c1, rel=1e-12)


def test_coarse_budget_flagged(swirl):
    with pytest.warns(RuntimeWarning):
        b = fo.sobolev_budget(swirl, 0.5, quad_resolution=0.2)
    assert b.coarse


@pytest.mark.parametrize("u", CATALOG, ids=lambda u: u.kind)
def test_c1_parabolic_scaling_invariance(u):
    T = 0.4
    b1 = fo.sobolev_budget(u, T)
    b2 = fo.sobolev_budget(fo.rescaled(u, 2.0), T / 4)
    assert b2.c1 == pytest.approx(b1.c1, rel=0.02)


def test_decaying_field_budget_uses_time_quadrature():
    u = fo.gaussian_swirl(1.0, 0.5, decay=2.0)
    b = fo.sobolev_budget(u, 1.0)
    assert b.sup_l2 == pytest.approx(SWIRL_L2, rel=5e-3)  # attained at t = 0
    assert b.dirichlet == pytest.approx(SWIRL_DIRICHLET * (1 - math.exp(-4)) / 4, rel=5e-3)


def test_budget_sup_window_option(swirl):
    u = fo.gaussian_swirl(1.0, 0.5, horizon=2.0)
    assert fo.sobolev_budget(u, 1.0, sup_window=2.0).sup_window == 2.0


def test_budget_json_round_trip(swirl):
    b = fo.sobolev_budget(swirl, 0.5)
    assert fo.SobolevBudget.from_dict(b.to_dict()) == b


# --- mollification ---------------------------------------------------------------------

def test_kernels_have_unit_integral():
    for m in (1, 4, 32):
        zs, zt = fo.MollifierParams(m).kernel_integrals()
        assert abs(zs - 1) < 1e-10 and abs(zt - 1) < 1e-10


def test_mollify_zero_is_zero():
    assert fo.mollify(fo.zero_field(), 8).is_zero


def test_mollify_rejects_m0(swirl):
    with pytest.raises(ValueError):
        fo.mollify(swirl, 0)


def test_mollify_approximates_smooth_field(swirl):
    x = np.random.default_rng(4).uniform(-1, 1, (40, 2))
    errs = [float(np.max(np.abs(fo.mollify(swirl, m).eval(x, 0.5) - swirl.eval(x, 0.5)))) for m in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_mollified_gradient_matches_differences(swirl):
    v = fo.mollify(swirl, 8)
    x = np.array([[0.3, 0.1], [-0.4, 0.5]])
    J = v.grad(x, 0.5)
    h = 1e-5
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (v.eval(x + e, 0.5) - v.eval(x - e, 0.5)) / (2 * h)
        np.testing.assert_allclose(J[:, :, j], fd, rtol=1e-4, atol=1e-7)


def test_mollify_commutes_with_translation(swirl):
    shift = np.array([0.5, -0.25])
    a = fo.mollify(fo.translated(swirl, shift), 8)
    b = fo.translated(fo.mollify(swirl, 8), shift)
    x = np.random.default_rng(6).uniform(-1, 1, (20, 2))
    np.testing.assert_allclose(a.eval(x, 0.5), b.eval(x, 0.5), atol=1e-13)


def test_mollified_sup_l2_bound(swirl):
    T = 1.0
    v = fo.mollify(swirl, 8)
    sup_u = fo.sobolev_budget(swirl, T, sup_window=T + 1).sup_l2
    sup_v = max(v.l2_density(t) for t in np.linspace(0, T, 11))
    assert sup_v <= sup_u * (1 + 1e-3)


def test_w12_distance_decreases_with_m(swirl):
    d = [fo.w12_distance(swirl, fo.mollify(swirl, m), 1.0) for m in (4, 8, 16, 32)]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_w12_distance_identical_is_zero(swirl):
    assert fo.w12_distance(swirl, swirl, 0.5) == pytest.approx(0.0, abs=1e-14)


def test_w12_distance_u_vs_2u(swirl):
    # |u - 2u|^2 + |grad u - 2 grad u|^2 integrates to T (int |u|^2 + int |grad u|^2)
    T = 0.5
    d = fo.w12_distance(swirl, fo.scaled(swirl, 2.0), T)
    assert d == pytest.approx(T * (SWIRL_L2 + SWIRL_DIRICHLET), rel=5e-3)


# --- normal projection ---------------------------------------------------------------

@pytest.mark.parametrize("u,tau,expected", [
    ((2.0, 0.0), (1.0, 0.0), (0.0, 0.0)),
    ((0.0, 1.0), (1.0, 0.0), (0.0, 1.0)),
    ((1.0, 1.0), (1.0, 0.0), (0.0, 1.0)),
])
def test_perp_project_examples(u, tau, expected):
    np.testing.assert_allclose(fo.perp_project(u, tau), expected, atol=1e-15)


def test_perp_project_rejects_non_unit_tangent():
    with pytest.raises(ValueError):
        fo.perp_project((1.0, 0.0), (1.0, 1.0))


# --- files ------------------------------------------------------------------------

@pytest.mark.parametrize("u", CATALOG, ids=lambda u: u.kind)
def test_catalog_spec_round_trip(u):
    v = fo.field_from_dict(u.to_dict())
    x = np.array([[0.1, 0.2], [-0.3, 0.4]])
    np.testing.assert_array_equal(v.eval(x, 0.1), u.eval(x, 0.1))


def test_unknown_catalog_name():
    with pytest.raises(ValueError):
        fo.catalog("vortex-street")
