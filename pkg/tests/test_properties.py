"""Randomised invariants of the geometry, varifold and forcing layers."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from forcedflow import estimates as es
from forcedflow import flow as fl
from forcedflow import forcing as fo
from forcedflow import generators as gen
from forcedflow import network as nw
from forcedflow import varifold as vf

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

angles = st.floats(-math.pi, math.pi, allow_nan=False)
shifts = st.tuples(st.floats(-5, 5), st.floats(-5, 5))
radii = st.floats(0.2, 3.0)


def star_polygon(r, n=40):
    """A star-shaped closed curve with radial profile ``r(theta)`` sampled at ``n`` angles."""
    th = 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    return nw.CurveNetwork(pts, [nw.Curve(tuple(range(n)), True, 1, 2)], [], 2,
                           [(0.0, 0.0), (float(np.max(r)) * 2, 0.0)])


star_profiles = st.lists(st.floats(0.5, 1.5), min_size=5, max_size=5).map(
    lambda c: 1.0 + 0.3 * np.array(c) @ np.array([np.cos(k * 2 * np.pi * np.arange(40) / 40 + k)
                                                for k in range(5)]) / 5)


@SETTINGS
@given(star_profiles, angles, shifts)
def test_junction_and_curvature_rigid_invariance(r, rot, shift):
    net = star_polygon(r)
    moved = net.transformed(rot, shift)
    c, s = math.cos(rot), math.sin(rot)
    R = np.array([[c, -s], [s, c]])
    h0, d0 = nw.curvature_vectors(net)
    h1, d1 = nw.curvature_vectors(moved)
    np.testing.assert_allclose(h0 @ R.T, h1, atol=1e-9 * (1 + np.abs(h0).max()))
    np.testing.assert_allclose(d0, d1, rtol=1e-10)


@SETTINGS
@given(angles, shifts, st.floats(-30, 30))
def test_triod_balance_rigid_invariance(rot, shift, skew):
    net = gen.triod(1.0, angles_deg=(90.0, 210.0 + skew, 330.0))
    res0, ang0 = nw.junction_balance(net, 0)
    res1, ang1 = nw.junction_balance(net.transformed(rot, shift), 0)
    c, s = math.cos(rot), math.sin(rot)
    np.testing.assert_allclose(np.array([[c, -s], [s, c]]) @ res0, res1, atol=1e-12)
    np.testing.assert_allclose(ang0, ang1, atol=1e-9)


@SETTINGS
@given(star_profiles, angles, shifts)
def test_varifold_quantities_rigid_invariance(r, rot, shift):
    net = star_polygon(r)
    V, W = vf.from_network(net), vf.from_network(net.transformed(rot, shift))
    assert vf.mass(W) == pytest.approx(vf.mass(V), rel=1e-10)
    assert vf.total_first_variation(W) == pytest.approx(vf.total_first_variation(V), rel=1e-10)
    assert vf.l2_curvature(W) == pytest.approx(vf.l2_curvature(V), rel=1e-9)
    assert vf.density_ratio(W)[0] == pytest.approx(vf.density_ratio(V)[0], rel=1e-9)


@SETTINGS
@given(star_profiles, st.integers(2, 5))
def test_density_ratio_scales_with_multiplicity(r, k):
    V = vf.from_network(star_polygon(r))
    assert vf.density_ratio(V.scaled(k))[0] == pytest.approx(k * vf.density_ratio(V)[0], rel=1e-12)


@SETTINGS
@given(star_profiles)
def test_density_inequalities_inequalities_hold(r):
    for rep in vf.density_inequalities(vf.from_network(star_polygon(r))):
        assert rep.margin >= -1e-9 or not rep.applicable


@SETTINGS
@given(star_profiles, st.floats(0.1, 1.0))
def test_remesh_preserves_polygon_length_and_band(r, factor):
    net = star_polygon(r)
    spacing = factor * float(np.mean(net.segment_lengths()))
    out = nw.remesh(net, spacing)
    assert out.length() <= net.length() * (1 + 1e-12)
    lens = out.segment_lengths()
    assert lens.min() >= 0.5 * spacing * (1 - 1e-12) and lens.max() <= 1.5 * spacing * (1 + 1e-12)


@SETTINGS
@given(star_profiles)
def test_symmetric_difference_with_self_is_zero(r):
    net = star_polygon(r)
    assert nw.symmetric_difference_area(net, net, 1, 0.05) == 0.0


@SETTINGS
@given(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), st.floats(-math.pi, math.pi))
def test_perp_project_idempotent_and_contracting(u, a):
    tau = np.array([math.cos(a), math.sin(a)])
    p = fo.perp_project(u, tau)
    np.testing.assert_allclose(fo.perp_project(p, tau), p, atol=1e-14)
    assert np.linalg.norm(p) <= np.linalg.norm(u) + 1e-14
    assert abs(np.dot(p, tau)) < 1e-12


@SETTINGS
@given(st.sampled_from(["bump", "plateau"]), st.floats(0.2, 2.0), shifts, st.floats(0, 0.9), st.floats(0, 5))
def test_test_function_gradient_device(kind, radius, c, mod, freq):
    phi = es.test_function(kind, radius=radius, center=c, inner=0.4 * radius if kind == "plateau" else 0.0,
                           modulation=mod, frequency=freq)
    for t in (0.0, 0.37):
        assert phi.gradient_ratio_sup(t) <= 2.0 * phi.hessian_bound(t) * (1 + 1e-9)


@SETTINGS
@given(st.sampled_from(["bump", "tent", "plateau"]), st.floats(0.2, 2.0), st.floats(0.1, 5.0))
def test_test_function_homogeneity(kind, radius, amp):
    base = es.test_function(kind, radius=radius, inner=0.3 * radius if kind == "plateau" else 0.0)
    scaled = es.test_function(kind, radius=radius, inner=0.3 * radius if kind == "plateau" else 0.0,
                              amplitude=amp)
    assert scaled.total_integral() == pytest.approx(amp * base.total_integral(), rel=1e-12)
    assert scaled.grad_l1() == pytest.approx(amp * base.grad_l1(), rel=1e-12)


@pytest.fixture(scope="module")
def forced_trace():
    u = fo.gaussian_swirl(1.0, 0.5, center=(0.5, 0.0))
    return fl.run(gen.circle(1.0, 64), u, 0.05, fl.FlowOptions(record_every=10, record_density=False))


@SETTINGS
@given(st.floats(1e-3, 1e3), st.floats(1.0, 10.0))
def test_checks_never_flip_to_fail_when_C_grows(forced_trace, C, factor):
    lo = es.c_dependent_reports(forced_trace, C)
    hi = es.c_dependent_reports(forced_trace, C * factor)
    for a, b in zip(lo, hi):
        assert a.name == b.name
        assert b.passed or not a.passed


@SETTINGS
@given(st.data())
def test_brakke_residual_additive(forced_trace, data):
    n = len(forced_trace.times)
    i = data.draw(st.integers(0, n - 3))
    j = data.draw(st.integers(i + 1, n - 2))
    k = data.draw(st.integers(j + 1, n - 1))
    phi = es.test_function("bump", radius=data.draw(st.floats(0.4, 1.5)),
                           center=(data.draw(st.floats(-1, 1)), data.draw(st.floats(-1, 1))))
    t = forced_trace.times
    whole = es.brakke_residual(forced_trace, phi, t[i], t[k]).lhs
    parts = es.brakke_residual(forced_trace, phi, t[i], t[j]).lhs + es.brakke_residual(forced_trace, phi, t[j],
                                                                                          t[k]).lhs
    assert whole == pytest.approx(parts, abs=1e-13)


@SETTINGS
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 1.0))
def test_catalog_gradients_match_differences(cx, cy, width):
    assume(math.hypot(cx, cy) < 1.5)
    u = fo.gaussian_swirl(1.0, width, center=(cx, cy))
    x = np.array([[cx + 0.3 * width, cy - 0.2 * width]])
    J = u.grad(x, 0.0)
    h = 1e-6 * width
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (u.eval(x + e, 0.0) - u.eval(x - e, 0.0)) / (2 * h)
        np.testing.assert_allclose(J[:, :, j], fd, rtol=1e-3, atol=1e-6 / width)
