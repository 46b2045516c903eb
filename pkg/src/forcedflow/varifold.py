"""Discrete integral 1-varifolds in the plane.

A :class:`DiscreteVarifold` is a finite list of segments with positive
integer multiplicities.  Its weight measure is ``theta * H^1`` restricted to
the segments.  Because every segment is straight, the first variation is
purely atomic: at each endpoint position ``p`` the atom is the sum of the
unit vectors pointing from ``p`` along each incident segment, weighted by
multiplicity, and ``delta V(g) = -sum_p atom(p) . g(p)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import network as nw
from ._kernels import GAUSS_CUT, plateau, truncated_gaussian
from ._quadrature import gauss_legendre_unit
from .reports import EstimateReport


@dataclass(frozen=True, eq=False)
class DiscreteVarifold:
    a: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    network: nw.CurveNetwork | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1, 2)
        b = np.asarray(self.b, dtype=float).reshape(-1, 2)
        th = np.asarray(self.theta).reshape(-1)
        if len(a) != len(b) or len(a) != len(th):
            raise ValueError("a, b and theta must have the same length")
        if th.size and (np.any(th < 1) or np.any(th != np.round(th))):
            raise ValueError("multiplicities must be positive integers")
        if len(a) and np.min(np.hypot(*(b - a).T)) <= 0.0:
            raise ValueError("zero-length segment")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", th.astype(int))

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(*(self.b - self.a).T)

    @property
    def weights(self) -> np.ndarray:
        return self.theta * self.lengths

    def __len__(self) -> int:
        return len(self.theta)

    def scaled(self, factor: int) -> "DiscreteVarifold":
        return DiscreteVarifold(self.a, self.b, self.theta * int(factor), self.network)

    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0)) -> "DiscreteVarifold":
        c, s = math.cos(rotation), math.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        sh = np.asarray(shift, dtype=float)
        net = None if self.network is None else self.network.transformed(rotation, shift)
        return DiscreteVarifold(self.a @ rot.T + sh, self.b @ rot.T + sh, self.theta, net)


def from_network(network: nw.CurveNetwork, tol: float = 1e-12) -> DiscreteVarifold:
    """Unit-density lift of a network; coincident segments merge with summed multiplicity."""
    a, b, theta = nw.merged_segments(network, tol)
    return DiscreteVarifold(a, b, theta, network)


def mass(V: DiscreteVarifold) -> float:
    return float(np.sum(V.weights))


def _clip_lengths(V: DiscreteVarifold, center, radii) -> np.ndarray:
    """Length of each segment inside each ball: shape (len(radii), S)."""
    c = np.asarray(center, dtype=float)
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    d = V.b - V.a
    ln2 = np.einsum("ij,ij->i", d, d)
    w = c - V.a
    # foot of the perpendicular, then half-chord; avoids cancellation for small r
    t0 = np.einsum("ij,ij->i", w, d) / ln2
    perp = w - t0[:, None] * d
    p2 = np.einsum("ij,ij->i", perp, perp)
    half2 = (r[:, None] ** 2 - p2[None, :]) / ln2[None, :]
    half = np.sqrt(np.maximum(half2, 0.0))
    s0 = np.clip(t0[None, :] - half, 0.0, 1.0)
    s1 = np.clip(t0[None, :] + half, 0.0, 1.0)
    frac = np.where(half2 > 0, s1 - s0, 0.0)
    return frac * np.sqrt(ln2)[None, :]


def ball_mass(V: DiscreteVarifold, center, r: float) -> float:
    """``||V||(B_r(center))`` by exact segment-disk clipping."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if len(V) == 0:
        return 0.0
    return float(_clip_lengths(V, center, [r])[0] @ V.theta)


def mass_profile(V: DiscreteVarifold, center, radii) -> np.ndarray:
    if len(V) == 0:
        return np.zeros(len(np.atleast_1d(radii)))
    return _clip_lengths(V, center, radii) @ V.theta


def _points(V: DiscreteVarifold) -> np.ndarray:
    pts = np.vstack([V.a, V.b])
    return np.unique(pts, axis=0)


def _block_ratios(V: DiscreteVarifold, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """``||V||(B_r(c)) / r`` for centres (B, 2) and per-centre radii (B, K)."""
    d = V.b - V.a
    ln2 = np.einsum("ij,ij->i", d, d)
    w = centers[:, None, :] - V.a[None, :, :]
    t0 = np.einsum("bsi,si->bs", w, d) / ln2
    perp = w - t0[..., None] * d[None]
    p2 = np.einsum("bsi,bsi->bs", perp, perp)
    # in place: these (B, K, S) arrays dominate the cost; a missed disk gives half = 0, hence frac = 0
    half = radii[:, :, None] ** 2 - p2[:, None, :]
    half /= ln2
    np.maximum(half, 0.0, out=half)
    np.sqrt(half, out=half)
    t = t0[:, None, :]
    hi = t + half
    np.minimum(np.maximum(hi, 0.0, out=hi), 1.0, out=hi)
    np.negative(half, out=half)
    half += t
    np.minimum(np.maximum(half, 0.0, out=half), 1.0, out=half)
    hi -= half
    return (hi @ V.weights) / radii


def density_ratio(V: DiscreteVarifold, max_pair_points: int = 48, work: float = 4e6):
    """Largest ``||V||(B_r(x)) / r`` over a finite candidate set.

    Candidate centres are the vertices, segment midpoints and midpoints of
    vertex pairs; candidate radii are the centre-to-vertex distances.  When
    there are many vertices the pair midpoints use an evenly spaced subset of
    ``max_pair_points`` vertices plus each vertex paired with its farthest
    vertex, and each centre's radii are thinned to keep about ``work``
    segment-radius evaluations.  The five best centres then get the full
    radius list and the winner a dyadic radius refinement.

    Returns ``(value, center, radius)``.  The value is an attained ratio, hence
    a lower bound for the supremum.
    """
    if len(V) == 0:
        raise ValueError("density ratio of an empty varifold")
    pts = _points(V)
    p = len(pts)
    mids = 0.5 * (V.a + V.b)
    if p <= max_pair_points:
        i, j = np.triu_indices(p, 1)
    else:
        sub = np.unique(np.linspace(0, p - 1, max_pair_points).round().astype(int))
        ii, jj = np.meshgrid(sub, sub, indexing="ij")
        keep = ii < jj
        far = np.empty(p, dtype=int)
        for k in range(0, p, 512):
            d2 = np.sum((pts[k:k + 512, None, :] - pts[None, :, :]) ** 2, axis=-1)
            far[k:k + 512] = np.argmax(d2, axis=1)
        i = np.concatenate([ii[keep], np.arange(p)])
        j = np.concatenate([jj[keep], far])
    centers = np.unique(np.vstack([pts, mids, 0.5 * (pts[i] + pts[j])]), axis=0)
    nc, s = len(centers), len(V)
    # radii below round-off of the coordinates carry no information
    floor = 1e-9 * max(1.0, float(np.max(np.abs(pts))))
    k_rad = int(min(p, max(8, work // max(1, nc * s))))
    pick = np.linspace(0, p - 1, k_rad).round().astype(int)
    block = max(1, int(2e6 // max(1, k_rad * s)))
    scores = np.empty(nc)
    best_r = np.empty(nc)
    for k in range(0, nc, block):
        c = centers[k:k + block]
        dist = np.sort(np.sqrt(np.sum((c[:, None, :] - pts[None, :, :]) ** 2, axis=-1)), axis=1)
        radii = dist[:, pick]
        radii = np.where(radii > floor, radii, dist[:, -1:])
        radii = np.maximum(radii, floor)
        ratio = _block_ratios(V, c, radii)
        m = np.argmax(ratio, axis=1)
        scores[k:k + block] = ratio[np.arange(len(c)), m]
        best_r[k:k + block] = radii[np.arange(len(c)), m]
    top = np.argsort(-scores, kind="stable")[:5]
    value, center, r = -1.0, None, None
    for k in top:
        c = centers[k]
        if scores[k] > value:
            value, center, r = float(scores[k]), c, float(best_r[k])
        dist = np.hypot(*(pts - c).T)
        radii = np.unique(dist[dist > floor])
        if radii.size == 0:
            continue
        ratio = mass_profile(V, c, radii) / radii
        m = int(np.argmax(ratio))
        if ratio[m] > value:
            value, center, r = float(ratio[m]), c, float(radii[m])
    steps = r * np.concatenate([1.0 + 2.0 ** -np.arange(1, 30), 1.0 - 2.0 ** -np.arange(1, 30)])
    ratio = mass_profile(V, center, steps) / steps
    m = int(np.argmax(ratio))
    if ratio[m] > value:
        value, r = float(ratio[m]), float(steps[m])
    return value, np.array(center, dtype=float), r


def segment_quadrature(V: DiscreteVarifold, order: int = 6, max_length: float | None = None):
    """Quadrature points, weights (including multiplicity) and unit tangents on V.

    Segments longer than ``max_length`` are split into equal panels.
    """
    s, w = gauss_legendre_unit(order)
    lengths = V.lengths
    panels = np.ones(len(V), dtype=int)
    if max_length is not None and len(V):
        panels = np.maximum(1, np.ceil(lengths / max_length).astype(int))
    seg = np.repeat(np.arange(len(V)), panels)
    k = np.concatenate([np.arange(n) for n in panels]) if len(V) else np.zeros(0, dtype=int)
    frac0 = k / panels[seg]
    width = 1.0 / panels[seg]
    t = frac0[:, None] + width[:, None] * s[None, :]
    d = V.b - V.a
    pts = V.a[seg][:, None, :] + t[..., None] * d[seg][:, None, :]
    wts = (V.theta[seg] * lengths[seg] * width)[:, None] * w[None, :]
    tau = (d / lengths[:, None])[seg]
    tau = np.repeat(tau[:, None, :], len(s), axis=1)
    return pts.reshape(-1, 2), wts.reshape(-1), tau.reshape(-1, 2)


def integrate(V: DiscreteVarifold, f: Callable[[np.ndarray], np.ndarray], order: int = 6,
              max_length: float | None = None) -> float:
    """``int f d||V||`` for a scalar function evaluated on (N, 2) points."""
    if len(V) == 0:
        return 0.0
    pts, wts, _ = segment_quadrature(V, order, max_length)
    return float(np.dot(wts, f(pts)))


@dataclass(frozen=True)
class VectorTestField:
    """Compactly supported C^1 vector field ``g`` with its Jacobian ``grad[..., i, j] = dg_i/dx_j``."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    radius: float
    center: tuple[float, float] = (0.0, 0.0)


def affine_test_field(matrix=((1.0, 0.0), (0.0, 1.0)), offset=(0.0, 0.0), inner: float = 10.0,
                      outer: float = 12.0, center=(0.0, 0.0)) -> VectorTestField:
    """``g(x) = (A x + b) * chi(|x - c|)`` with a plateau cutoff equal to 1 on ``B_inner``."""
    A = np.asarray(matrix, dtype=float)
    bvec = np.asarray(offset, dtype=float)
    c = np.asarray(center, dtype=float)

    def value(x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(*(x - c).T)
        chi, _ = plateau(rho, inner, outer)
        return (x @ A.T + bvec) * chi[..., None]

    def grad(x):
        x = np.asarray(x, dtype=float)
        y = x - c
        rho = np.hypot(*y.T)
        chi, dchi = plateau(rho, inner, outer)
        lin = x @ A.T + bvec
        unit = y / np.where(rho > 0, rho, 1.0)[..., None]
        return A[None] * chi[:, None, None] + lin[:, :, None] * (dchi[:, None] * unit)[:, None, :]

    return VectorTestField(value, grad, outer, tuple(c))


def polynomial_test_field(coeffs, inner: float = 3.0, outer: float = 4.0) -> VectorTestField:
    """Quadratic field ``g_i = sum c_ik m_k(x)`` with monomials ``1, x, y, x^2, xy, y^2`` times a cutoff."""
    C = np.asarray(coeffs, dtype=float).reshape(2, 6)

    def mono(x):
        X, Y = x[:, 0], x[:, 1]
        one = np.ones_like(X)
        m = np.stack([one, X, Y, X * X, X * Y, Y * Y], axis=1)
        dm = np.stack([
            np.stack([0 * X, one, 0 * X, 2 * X, Y, 0 * X], axis=1),
            np.stack([0 * X, 0 * X, one, 0 * X, X, 2 * Y], axis=1),
        ], axis=2)  # (N, 6, 2)
        return m, dm

    def value(x):
        x = np.asarray(x, dtype=float)
        m, _ = mono(x)
        chi, _ = plateau(np.hypot(*x.T), inner, outer)
        return (m @ C.T) * chi[:, None]

    def grad(x):
        x = np.asarray(x, dtype=float)
        m, dm = mono(x)
        rho = np.hypot(*x.T)
        chi, dchi = plateau(rho, inner, outer)
        unit = x / np.where(rho > 0, rho, 1.0)[:, None]
        g = m @ C.T
        dg = np.einsum("ik,nkj->nij", C, dm)
        return dg * chi[:, None, None] + g[:, :, None] * (dchi[:, None] * unit)[:, None, :]

    return VectorTestField(value, grad, outer)


def first_variation(V: DiscreteVarifold, g: VectorTestField, order: int = 6) -> float:
    """``delta V(g) = int S : grad g dV`` with ``S`` the projection onto each segment."""
    if len(V) == 0:
        return 0.0
    pts, wts, tau = segment_quadrature(V, order)
    J = g.grad(pts)
    integrand = np.einsum("ni,nij,nj->n", tau, J, tau)
    return float(np.dot(wts, integrand))


def atoms(V: DiscreteVarifold, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Positions and vectors of the first-variation atoms (``delta V = -sum atom * delta_p``)."""
    if len(V) == 0:
        return np.zeros((0, 2)), np.zeros((0, 2))
    d = V.b - V.a
    u = d / V.lengths[:, None] * V.theta[:, None]
    pos = np.vstack([V.a, V.b])
    vec = np.vstack([u, -u])
    key = np.round(pos / tol).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    summed = np.zeros((len(first), 2))
    np.add.at(summed, inv, vec)
    return pos[first], summed


def total_first_variation(V: DiscreteVarifold) -> float:
    """``||delta V||(R^2)``: the summed norms of the vertex atoms.

    Requires a varifold built from a network so that the vertex structure is known.
    """
    if V.network is None:
        raise ValueError("total first variation needs a varifold built from a network")
    _, vec = atoms(V)
    return float(np.sum(np.hypot(vec[:, 0], vec[:, 1])))


def l2_curvature(V: DiscreteVarifold, network: nw.CurveNetwork | None = None) -> float:
    """``int |h|^2 d||V||`` from the discrete curvature at interior vertices."""
    net = network if network is not None else V.network
    if net is None:
        raise ValueError("l2_curvature needs the underlying network")
    if net.is_empty or len(net.topology.interior) == 0:
        return 0.0
    h, dual = nw.curvature_vectors(net)
    return float(np.sum(np.einsum("ij,ij->i", h, h) * dual))


def _curvature_absolutely_continuous(net: nw.CurveNetwork) -> bool:
    """Closed curves only: no pinned ends and no junction atoms."""
    return not net.is_empty and all(c.closed for c in net.curves)


def density_inequalities(V: DiscreteVarifold, network: nw.CurveNetwork | None = None,
                  tol: float = 1e-9) -> list[EstimateReport]:
    """Density ratio against total first variation and against sqrt(mass * int |h|^2)."""
    net = network if network is not None else V.network
    if len(V) == 0:
        return [EstimateReport("density_vs_first_variation", 0.0, 0.0, slack=tol),
                EstimateReport("density_vs_curvature", 0.0, 0.0, slack=tol, applicable=False)]
    d, c, r = density_ratio(V)
    tv = total_first_variation(V)
    out = [EstimateReport("density_vs_first_variation", d, tv, slack=tol,
                          witnesses={"center": c.tolist(), "radius": r})]
    ok = net is not None and _curvature_absolutely_continuous(net)
    rhs = math.sqrt(mass(V) * l2_curvature(V, net)) if ok else math.nan
    out.append(EstimateReport("density_vs_curvature", d, rhs if ok else 0.0, slack=tol, applicable=ok,
                              witnesses={"center": c.tolist(), "radius": r},
                              note="" if ok else "first variation has endpoint or junction atoms"))
    return out


def _varifold_mass_convolution(V: DiscreteVarifold, x: np.ndarray, eps: float) -> np.ndarray:
    """``(Phi_eps * ||V||)(x)`` at points ``x`` (N, 2)."""
    pts, wts, _ = segment_quadrature(V, order=4, max_length=0.5 * eps)
    out = np.zeros(len(x))
    reach = (GAUSS_CUT * eps) ** 2
    for k in range(0, len(x), 256):
        diff = x[k:k + 256, None, :] - pts[None, :, :]
        z2 = np.einsum("nmi,nmi->nm", diff, diff)
        out[k:k + 256] = np.where(z2 < reach, truncated_gaussian(z2, eps), 0.0) @ wts
    return out


def smoothed_curvature(V: DiscreteVarifold, x, eps: float) -> np.ndarray:
    """``h_eps(x) = -(Phi_eps * delta V)(x) / ((Phi_eps * ||V||)(x) + eps)``.

    ``x`` may be a single point or an (N, 2) array.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if len(V) == 0:
        out = np.zeros_like(xs)
        return out[0] if single else out
    pos, vec = atoms(V)
    diff = xs[:, None, :] - pos[None, :, :]
    z2 = np.einsum("nmi,nmi->nm", diff, diff)
    kern = truncated_gaussian(z2, eps)
    num = kern @ vec  # = -(Phi * delta V)
    den = _varifold_mass_convolution(V, xs, eps) + eps
    out = np.where(np.any(kern > 0, axis=1)[:, None], num / den[:, None], 0.0)
    return out[0] if single else out


def save_csv(V: DiscreteVarifold, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ax", "ay", "bx", "by", "theta"])
        for (ax, ay), (bx, by), th in zip(V.a, V.b, V.theta):
            w.writerow([repr(float(ax)), repr(float(ay)), repr(float(bx)), repr(float(by)), int(th)])


def load_csv(path) -> DiscreteVarifold:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return DiscreteVarifold(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int))
    arr = np.array([[float(r["ax"]), float(r["ay"]), float(r["bx"]), float(r["by"])] for r in rows])
    theta = np.array([int(r["theta"]) for r in rows])
    return DiscreteVarifold(arr[:, :2], arr[:, 2:], theta)
