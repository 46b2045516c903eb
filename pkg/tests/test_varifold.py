import math

import numpy as np
import pytest

from forcedflow import generators as gen
from forcedflow import network as nw
from forcedflow import varifold as vf

CIRCLE_MASS = 512 * math.sin(math.pi / 256)  # perimeter of the inscribed 256-gon


@pytest.fixture(scope="module")
def circle():
    return vf.from_network(gen.circle(1.0, 256))


def _unit_segment():
    return vf.from_network(gen.segment((0, 0), (1, 0)))


# --- lift and masses ---------------------------------------------------------------

def test_square_lift():
    V = vf.from_network(gen.square(1.0, per_side=5))
    assert len(V) == 20
    assert vf.mass(V) == pytest.approx(4.0, abs=1e-14)
    assert np.all(V.theta == 1)


def test_coincident_segments_merge():
    V = vf.from_network(gen.doubled_segment())
    assert len(V) == 1 and V.theta[0] == 2
    assert vf.mass(V) == pytest.approx(2.0, abs=1e-15)


def test_circle_mass(circle):
    assert vf.mass(circle) == pytest.approx(CIRCLE_MASS, rel=1e-14)
    assert abs(vf.mass(circle) - 2 * math.pi) < 1e-3


@pytest.mark.parametrize("center,r,expected", [
    ((0.5, 0.0), 0.25, 0.5),
    ((0.5, 0.3), 0.5, 0.8),  # chord of half-length 0.4
    ((2.0, 0.0), 0.5, 0.0),
])
def test_ball_mass_unit_segment(center, r, expected):
    assert vf.ball_mass(_unit_segment(), center, r) == pytest.approx(expected, abs=1e-14)


def test_ball_mass_circle(circle):
    assert vf.ball_mass(circle, (0, 0), 2.0) == pytest.approx(vf.mass(circle), rel=1e-14)
    assert vf.ball_mass(circle, (0, 0), 0.5) == 0.0


def test_ball_is_open():
    # the segment only touches the closed disk at one point
    assert vf.ball_mass(_unit_segment(), (0.5, 1.0), 1.0) == 0.0


# --- density ratio -------------------------------------------------------------------

def test_density_ratio_unit_segment():
    d, c, r = vf.density_ratio(_unit_segment())
    assert d == pytest.approx(2.0, abs=1e-12)
    assert r > 0 and vf.ball_mass(_unit_segment(), c, r) / r == pytest.approx(d)


def test_density_ratio_circle(circle):
    d, c, r = vf.density_ratio(circle)
    assert d == pytest.approx(2 * math.pi, rel=0.01)
    assert np.linalg.norm(c) < 1e-9
    assert 1.0 <= r < 1.0 + 1e-6


def test_density_ratio_doubled_segment():
    d, _, _ = vf.density_ratio(vf.from_network(gen.doubled_segment()))
    assert d == pytest.approx(4.0, abs=1e-12)


def test_density_ratio_is_witnessed(circle):
    d, c, r = vf.density_ratio(circle)
    assert vf.ball_mass(circle, c, r) / r == pytest.approx(d, rel=1e-12)


# --- first variation ------------------------------------------------------------------

def test_first_variation_identity_field_gives_mass(circle):
    g = vf.affine_test_field()
    assert vf.first_variation(circle, g) == pytest.approx(vf.mass(circle), rel=1e-12)


def test_first_variation_constant_field_on_closed_curve(circle):
    g = vf.affine_test_field(matrix=((0, 0), (0, 0)), offset=(0.3, -1.2))
    assert abs(vf.first_variation(circle, g)) < 1e-10


def test_first_variation_unit_segment():
    g = vf.affine_test_field(matrix=((1, 0), (0, 0)))
    assert vf.first_variation(_unit_segment(), g) == pytest.approx(1.0, abs=1e-13)


def test_first_variation_matches_atoms():
    # delta V(g) = - sum_p atom_p . g(p) for polygons
    rng = np.random.default_rng(11)
    net = gen.polyline(np.column_stack([np.linspace(-1, 1, 9), rng.uniform(-0.3, 0.3, 9)]))
    V = vf.from_network(net)
    g = vf.polynomial_test_field(rng.normal(size=12))
    pos, vec = vf.atoms(V)
    expected = -float(np.sum(np.einsum("ij,ij->i", vec, g.value(pos))))
    assert vf.first_variation(V, g) == pytest.approx(expected, abs=1e-9)


def test_test_field_gradient_matches_differences():
    rng = np.random.default_rng(5)
    g = vf.polynomial_test_field(rng.normal(size=12))
    x = np.array([[0.3, -0.7], [1.1, 0.4]])
    J = g.grad(x)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (g.value(x + e) - g.value(x - e)) / (2 * h)
        np.testing.assert_allclose(J[:, :, j], fd, rtol=1e-4, atol=1e-8)


# --- total first variation and curvature ---------------------------------------------------

def test_total_first_variation_straight_chain():
    V = vf.from_network(gen.line(2.0, 0.25))
    assert vf.total_first_variation(V) == pytest.approx(2.0, abs=1e-12)


def test_total_first_variation_polygon(circle):
    assert vf.total_first_variation(circle) == pytest.approx(512 * math.sin(math.pi / 256), rel=1e-12)


def test_total_first_variation_balanced_triod():
    assert vf.total_first_variation(vf.from_network(gen.triod(1.0, 0.1))) == pytest.approx(3.0, abs=1e-12)


def test_total_first_variation_needs_network():
    V = vf.DiscreteVarifold([(0, 0)], [(1, 0)], [1])
    with pytest.raises(ValueError):
        vf.total_first_variation(V)


@pytest.mark.parametrize("R", [1.0, 2.0])
def test_l2_curvature_circle(R):
    net = gen.circle(R, 256)
    assert vf.l2_curvature(vf.from_network(net), net) == pytest.approx(2 * math.pi / R, rel=0.01)


def test_l2_curvature_straight_is_zero():
    net = gen.line(2.0, 0.1)
    assert vf.l2_curvature(vf.from_network(net), net) == 0.0


# --- density-ratio inequalities ------------------------------------------------------------------

def test_density_inequalities_segment_equality():
    fv, cu = vf.density_inequalities(_unit_segment())
    assert fv.lhs == pytest.approx(2.0, abs=1e-12) and fv.rhs == pytest.approx(2.0, abs=1e-12)
    assert fv.passed and not cu.applicable


def test_density_inequalities_circle_equality(circle):
    fv, cu = vf.density_inequalities(circle)
    assert cu.applicable and cu.passed and fv.passed
    assert cu.lhs == pytest.approx(2 * math.pi, rel=0.02)
    assert cu.rhs == pytest.approx(2 * math.pi, rel=0.02)


def test_density_inequalities_triod_only_first_variation():
    fv, cu = vf.density_inequalities(vf.from_network(gen.triod(1.0, 0.1)))
    assert not cu.applicable
    assert fv.passed and fv.rhs == pytest.approx(3.0, abs=1e-12)


# --- smoothed curvature -----------------------------------------------------------------

def test_smoothed_curvature_straight_chain():
    V = vf.from_network(gen.line(4.0, 0.05))
    assert np.linalg.norm(vf.smoothed_curvature(V, (0.1, 0.0), 0.05)) <= 1e-8


def test_smoothed_curvature_circle(circle):
    x = np.array([math.cos(0.3), math.sin(0.3)])
    h = vf.smoothed_curvature(circle, x, 0.01)
    assert np.linalg.norm(h) == pytest.approx(1.0, rel=0.05)
    assert -np.dot(h, x) / np.linalg.norm(h) > 0.999


def test_smoothed_curvature_far_away_is_exact_zero(circle):
    assert np.all(vf.smoothed_curvature(circle, (0.0, 0.0), 0.1) == 0.0)


def test_smoothed_curvature_rejects_bad_eps(circle):
    with pytest.raises(ValueError):
        vf.smoothed_curvature(circle, (1.0, 0.0), 0.0)


def test_smoothed_curvature_converges_to_discrete():
    net = gen.circle(1.0, 512)
    V = vf.from_network(net)
    x = net.vertices[3]
    exact = nw.discrete_curvature(net, 3)
    errs = [np.linalg.norm(vf.smoothed_curvature(V, x, e) - exact) for e in (0.08, 0.04, 0.02)]
    assert errs[0] > errs[1] > errs[2]
    # at least first order; the regulariser eps / (Phi * ||V||) is in fact O(eps^2)
    assert math.log2(errs[0] / errs[1]) > 0.9
    assert math.log2(errs[1] / errs[2]) > 0.9


# --- files ---------------------------------------------------------------------------

def test_csv_round_trip(tmp_path, circle):
    p = tmp_path / "v.csv"
    vf.save_csv(circle.scaled(3), p)
    assert p.read_text().splitlines()[0] == "ax,ay,bx,by,theta"
    back = vf.load_csv(p)
    np.testing.assert_array_equal(back.a, circle.a)
    np.testing.assert_array_equal(back.theta, 3 * circle.theta)


def test_rejects_fractional_multiplicity():
    with pytest.raises(ValueError):
        vf.DiscreteVarifold([(0, 0)], [(1, 0)], [1.5])
