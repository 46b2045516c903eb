"""Verification harness: a priori inequalities and structural properties on traces.

Every check returns an :class:`~forcedflow.reports.EstimateReport`.  Constants
enter only through :class:`VerifyConfig`; the interpolation constant ``C`` is a
single knob that :func:`fit_constant` can minimise over a suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from . import flow as fl
from . import network as nw
from . import varifold as vf
from ._quadrature import gauss_legendre
from .forcing import ForcingField, SobolevBudget, sup_norm
from .reports import EstimateReport, combine


class PreconditionError(ValueError):
    """A check was called on data that does not satisfy its hypothesis."""


# ---------------------------------------------------------------------------
# scalar test functions

_PROFILES = ("bump", "tent", "plateau")


@dataclass(frozen=True)
class ScalarTestFunction:
    """Radial test function ``phi(x, t) = A m(t) p(|x - c(t)|)``.

    Parameters
    ----------
    kind : {"bump", "tent", "plateau"}
        ``bump`` is ``(1 - rho^2/r^2)^4``, ``tent`` is ``1 - rho/r`` and
        ``plateau`` equals one up to ``inner`` and falls to zero at ``radius``
        along a quintic smoothstep.
    radius : float
        Support radius.
    center : (float, float)
        Center at ``t = 0``.
    inner : float
        Plateau radius (``plateau`` only).
    amplitude : float
        ``A >= 0``.
    modulation, frequency : float
        ``m(t) = 1 + modulation * sin(frequency * t)`` with ``|modulation| <= 1``.
    velocity : (float, float)
        Constant drift of the center, ``c(t) = center + velocity * t``.
    """

    kind: str = "bump"
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    inner: float = 0.0
    amplitude: float = 1.0
    modulation: float = 0.0
    frequency: float = 0.0
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in _PROFILES:
            raise ValueError(f"unknown profile {self.kind!r}; choose from {_PROFILES}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.amplitude < 0 or abs(self.modulation) > 1:
            raise ValueError("test functions must be nonnegative: amplitude >= 0 and |modulation| <= 1")
        if self.kind == "plateau" and not 0 <= self.inner < self.radius:
            raise ValueError("plateau needs 0 <= inner < radius")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))

    # -- radial profile as polynomial pieces in rho
    @cached_property
    def _pieces(self) -> list[tuple[float, float, Polynomial]]:
        r = self.radius
        if self.kind == "bump":
            return [(0.0, r, Polynomial([1.0, 0.0, -1.0 / r**2]) ** 4)]
        if self.kind == "tent":
            return [(0.0, r, Polynomial([1.0, -1.0 / r]))]
        a = self.inner
        s = Polynomial([-a / (r - a), 1.0 / (r - a)])
        fall = 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
        pieces = [(a, r, fall)]
        if a > 0:
            pieces.insert(0, (0.0, a, Polynomial([1.0])))
        return pieces

    @cached_property
    def _flux_pieces(self) -> list[tuple[float, float, Polynomial, float]]:
        # Psi(rho) = int_0^rho s p(s) ds, stored per piece with its offset
        out, acc = [], 0.0
        x = Polynomial([0.0, 1.0])
        for lo, hi, p in self._pieces:
            q = (x * p).integ()
            out.append((lo, hi, q, acc - q(lo)))
            acc += q(hi) - q(lo)
        return out

    def _profile(self, rho: np.ndarray, deriv: int = 0) -> np.ndarray:
        out = np.zeros_like(rho)
        for lo, hi, p in self._pieces:
            m = (rho >= lo) & (rho < hi)
            if np.any(m):
                out[m] = p.deriv(deriv)(rho[m]) if deriv else p(rho[m])
        # the profiles are nonnegative; clamp round-off at the support edge
        return out if deriv else np.maximum(out, 0.0)

    def _psi(self, rho: np.ndarray) -> np.ndarray:
        out = np.full_like(rho, self._flux_pieces[-1][2](self.radius) + self._flux_pieces[-1][3])
        for lo, hi, q, off in self._flux_pieces:
            m = (rho >= lo) & (rho < hi)
            if np.any(m):
                out[m] = q(rho[m]) + off
        return out

    # -- time factors
    def _m(self, t: float) -> float:
        return self.amplitude * (1.0 + self.modulation * math.sin(self.frequency * t))

    def _dm(self, t: float) -> float:
        return self.amplitude * self.modulation * self.frequency * math.cos(self.frequency * t)

    def center_at(self, t: float) -> np.ndarray:
        return np.array(self.center) + t * np.array(self.velocity)

    def _offsets(self, x, t: float):
        y = np.asarray(x, dtype=float).reshape(-1, 2) - self.center_at(t)
        rho = np.hypot(y[:, 0], y[:, 1])
        return y, rho

    def _radial_grad(self, y: np.ndarray, rho: np.ndarray) -> np.ndarray:
        d = self._profile(rho, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(rho[:, None] > 0, d[:, None] * y / rho[:, None], 0.0)
        return g

    # -- public evaluation
    def value(self, x, t: float = 0.0) -> np.ndarray:
        _, rho = self._offsets(x, t)
        return self._m(t) * self._profile(rho)

    def grad(self, x, t: float = 0.0) -> np.ndarray:
        y, rho = self._offsets(x, t)
        return self._m(t) * self._radial_grad(y, rho)

    def dt(self, x, t: float = 0.0) -> np.ndarray:
        y, rho = self._offsets(x, t)
        drift = self._radial_grad(y, rho) @ np.array(self.velocity)
        return self._dm(t) * self._profile(rho) - self._m(t) * drift

    @property
    def time_independent(self) -> bool:
        return (self.modulation == 0.0 or self.frequency == 0.0) and self.velocity == (0.0, 0.0)

    def profile_integral(self) -> float:
        """``int p(|x|) dx``: the plane integral without amplitude and modulation."""
        return 2.0 * math.pi * float(self._psi(np.array([self.radius]))[0])

    def total_integral(self, t: float = 0.0) -> float:
        """``int phi(x, t) dx`` over the plane."""
        return self._m(t) * self.profile_integral()

    def flux_field(self, x, t: float = 0.0) -> np.ndarray:
        """A field ``F`` with ``div F = p(|x - c|)`` (amplitude and modulation excluded)."""
        y, rho = self._offsets(x, t)
        psi = self._psi(rho)
        p0 = self._pieces[0][2](0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(rho[:, None] > 1e-12 * self.radius, y * (psi / rho**2)[:, None], 0.5 * p0 * y)
        return f

    def grad_l1(self, t: float = 0.0) -> float:
        """``int |grad phi(x, t)| dx``, exact for the polynomial profiles."""
        total = 0.0
        for lo, hi, p in self._pieces:
            dp = p.deriv()
            cuts = [lo, hi] + [float(z.real) for z in dp.roots() if abs(z.imag) < 1e-12 and lo < z.real < hi]
            cuts = sorted(cuts)
            integ = (Polynomial([0.0, 1.0]) * dp).integ()
            for a, b in zip(cuts, cuts[1:]):
                total += abs(integ(b) - integ(a))
        return 2.0 * math.pi * abs(self._m(t)) * total

    def hessian_bound(self, t: float = 0.0) -> float:
        """``sup |D^2 phi(., t)|`` (spectral norm); ``inf`` when ``phi`` is not C^2."""
        best = 0.0
        pieces = self._pieces
        for k, (lo, hi, p) in enumerate(pieces):
            d1, d2 = p.deriv(), p.deriv(2)
            if lo == 0.0 and abs(d1(0.0)) > 1e-14:
                return math.inf
            # first and second derivatives must match across piece boundaries and vanish at the edge
            nxt = pieces[k + 1][2] if k + 1 < len(pieces) else Polynomial([0.0])
            if abs(d1(hi) - nxt.deriv()(hi)) > 1e-9 or abs(d2(hi) - nxt.deriv(2)(hi)) > 1e-9:
                return math.inf
            polys = [d2]
            if lo == 0.0:
                polys.append(Polynomial(d1.coef[1:]) if len(d1.coef) > 1 else Polynomial([0.0]))
            else:
                polys.append(None)
            for q in polys:
                if q is None:
                    xs = np.linspace(lo, hi, 2049)
                    best = max(best, float(np.max(np.abs(d1(xs) / xs))))
                    continue
                cand = [lo, hi] + [float(z.real) for z in q.deriv().roots()
                                   if abs(z.imag) < 1e-12 and lo < z.real < hi]
                best = max(best, float(np.max(np.abs(q(np.array(cand))))))
        return abs(self._m(t)) * best

    def gradient_ratio_sup(self, t: float = 0.0, samples: int = 4001) -> float:
        """Sampled ``sup_{phi > 0} |grad phi|^2 / phi``."""
        rho = np.linspace(0.0, self.radius, samples)[:-1]
        p = self._profile(rho)
        d = self._profile(rho, 1)
        keep = p > 0
        return abs(self._m(t)) * float(np.max(d[keep] ** 2 / p[keep]))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius, "center": list(self.center), "inner": self.inner,
                "amplitude": self.amplitude, "modulation": self.modulation, "frequency": self.frequency,
                "velocity": list(self.velocity)}


def test_function(kind: str = "bump", **params) -> ScalarTestFunction:
    """Catalog constructor: ``test_function("tent", radius=1.0)``."""
    return ScalarTestFunction(kind=kind, **params)


def covering_plateau(networks: Sequence[nw.CurveNetwork], margin: float = 0.25) -> ScalarTestFunction:
    """A plateau equal to one on a disk containing every vertex of ``networks``."""
    pts = np.vstack([n.vertices for n in networks if len(n.vertices)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    c = 0.5 * (lo + hi)
    R = float(np.max(np.hypot(*(pts - c).T)))
    R = max(R, 1e-6)
    inner = R * (1.0 + margin)
    return ScalarTestFunction("plateau", radius=2.0 * inner, center=tuple(c), inner=inner)


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class VerifyConfig:
    """Constants and tolerances of a verification suite.

    ``C`` is the interpolation constant, ``kappa`` scales the discretisation
    slack ``kappa (dt + spacing^2) mass (t2 - t1)``.  ``holder_constant=None``
    uses the kinetic bound ``sqrt(sup mass * int int |v|^2)``.
    """

    C: float = 1.0
    kappa: float = 10.0
    angle_tol: float = 1e-6
    tol: float = 1e-9
    holder_constant: float | None = None
    raster_resolution: float | None = None
    density_snapshots: int = 6
    clearing_grid: int = 12
    perimeter_tol: float = 1e-6
    max_turn_deg: float = 30.0

    def __post_init__(self):
        if self.C <= 0 or self.kappa < 0 or self.tol < 0 or self.angle_tol < 0:
            raise ValueError("constants must be positive and tolerances nonnegative")
        if self.density_snapshots < 1 or self.clearing_grid < 2:
            raise ValueError("density_snapshots >= 1 and clearing_grid >= 2 required")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown verify options: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# budget-type checks

def _exp(x: float) -> float:
    return math.exp(x) if x < 700.0 else math.inf


def _budget(trace: fl.FlowTrace, budget: SobolevBudget | None) -> SobolevBudget:
    if budget is not None:
        return budget
    if trace.budget is not None:
        return trace.budget
    if trace.forcing.is_zero:
        return SobolevBudget(0.0, 0.0, trace.T)
    raise PreconditionError("the trace carries no Sobolev budget for its forcing")


def _mass_series(trace: fl.FlowTrace) -> np.ndarray:
    m = [trace.initial_mass] + [e["mass"] + e["dmass"] for e in trace.ledger]
    m += [s.mass for s in trace.snapshots]
    return np.array(m)


def gronwall_check(trace: fl.FlowTrace, budget: SobolevBudget | None = None, C: float = 1.0) -> EstimateReport:
    """``sup_t mass(t) <= mass(0) exp(C^2 c1)``."""
    if not trace.snapshots:
        raise PreconditionError("empty trace")
    b = _budget(trace, budget)
    m0 = trace.initial_mass
    expo = C * C * b.c1
    rhs = m0 if trace.forcing.is_zero else m0 * _exp(expo)
    masses = _mass_series(trace)
    return EstimateReport("gronwall", float(masses.max()), rhs, slack=1e-12 * m0,
                          constants={"C": C, "c1": b.c1, "L0": m0},
                          witnesses={"argmax_step": int(np.argmax(masses[: len(trace.ledger) + 1]))})


def mass_monotone_check(trace: fl.FlowTrace, rel_tol: float = 1e-9) -> EstimateReport:
    """Unforced runs: no step may increase the mass by more than ``rel_tol * mass``."""
    if not trace.forcing.is_zero:
        return EstimateReport("mass_monotone", 0.0, 0.0, applicable=False, note="forcing is not zero")
    if not trace.ledger:
        return EstimateReport("mass_monotone", 0.0, 0.0)
    rel = np.array([e["dmass"] / e["mass"] if e["mass"] > 0 else 0.0 for e in trace.ledger])
    k = int(np.argmax(rel))
    return EstimateReport("mass_monotone", float(rel[k]), 0.0, slack=rel_tol,
                          witnesses={"step": k + 1, "t": trace.ledger[k]["t"]})


def total_dissipation(trace: fl.FlowTrace) -> float:
    """``int_0^T int |h|^2 d||V_t|| dt`` from the ledger."""
    return float(sum(e["dissipation"] for e in trace.ledger))


def curvature_budget_rhs(m0: float, c1: float, C: float) -> float:
    e = C * C * c1
    return 4.0 * m0 * (1.0 + e * _exp(e))


def trace_u_budget_rhs(m0: float, c1: float, C: float) -> float:
    e = C * C * c1
    if c1 == 0.0:
        return 0.0
    return 4.0 * C * math.sqrt(c1) * m0 * math.sqrt(1.0 + e * _exp(e)) * _exp(0.5 * e)


def curvature_budget_check(trace: fl.FlowTrace, budget: SobolevBudget | None = None,
                           C: float = 1.0) -> EstimateReport:
    """Total dissipation against ``4 mass(0) (1 + C^2 c1 exp(C^2 c1))``."""
    b = _budget(trace, budget)
    m0 = trace.initial_mass
    return EstimateReport("curvature_budget", total_dissipation(trace), curvature_budget_rhs(m0, b.c1, C),
                          constants={"C": C, "c1": b.c1, "L0": m0})


def _trapezoid(times: np.ndarray, values: np.ndarray) -> float:
    if len(times) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


def _u_l2_on(V: vf.DiscreteVarifold, u: ForcingField, t: float, order: int = 6) -> float:
    if len(V) == 0 or u.is_zero:
        return 0.0
    pts, wts, _ = vf.segment_quadrature(V, order)
    val = u.eval(pts, t)
    return float(np.dot(wts, np.einsum("ij,ij->i", val, val)))


def trace_u_budget_check(trace: fl.FlowTrace, budget: SobolevBudget | None = None,
                         C: float = 1.0) -> EstimateReport:
    """``int_0^T int |u|^2 d||V_t|| dt`` (snapshot quadrature, trapezoid in time) against its budget."""
    b = _budget(trace, budget)
    m0 = trace.initial_mass
    vals = np.array([_u_l2_on(s.varifold, trace.forcing, s.t) for s in trace.snapshots])
    lhs = _trapezoid(trace.times, vals)
    return EstimateReport("trace_u_budget", lhs, trace_u_budget_rhs(m0, b.c1, C),
                          constants={"C": C, "c1": b.c1, "L0": m0}, witnesses={"snapshots": len(vals)})


def interpolation_check(V: vf.DiscreteVarifold, network: nw.CurveNetwork, u: ForcingField, t: float,
                        C: float = 1.0, resolution: float | None = None) -> EstimateReport:
    """``int |u|^2 d||V|| <= 1/2 int |h|^2 d||V|| + 2 C^2 mass int |grad u|^2 int |u|^2`` at one time."""
    lhs = _u_l2_on(V, u, t)
    h2 = vf.l2_curvature(V, network) if not network.is_empty else 0.0
    if u.is_zero:
        grad2 = l2 = 0.0
    else:
        grad2 = u.dirichlet_density(t, resolution)
        l2 = u.l2_density(t, resolution)
    m = vf.mass(V)
    rhs = 0.5 * h2 + 2.0 * C * C * m * grad2 * l2
    return EstimateReport("interpolation", lhs, rhs, slack=1e-12 * max(1.0, rhs),
                          constants={"C": C}, witnesses={"t": t, "l2_curvature": h2, "mass": m,
                                                         "dirichlet": grad2, "l2": l2})


def meyers_ziemer_check(V: vf.DiscreteVarifold, phi: ScalarTestFunction, C: float = 1.0, t: float = 0.0,
                        density: float | None = None) -> EstimateReport:
    """``int phi d||V|| <= C D(||V||) int |grad phi| dx`` at a frozen time."""
    lhs = vf.integrate(V, lambda x: phi.value(x, t), order=8, max_length=phi.radius / 8)
    if density is None:
        density = vf.density_ratio(V)[0] if len(V) else 0.0
    g = phi.grad_l1(t)
    return EstimateReport("meyers_ziemer", lhs, C * density * g, slack=1e-12 * max(1.0, lhs),
                          constants={"C": C}, witnesses={"density": density, "grad_l1": g, "phi": phi.to_dict()})


def psi2_check(trace: fl.FlowTrace, budget: SobolevBudget | None = None, C: float = 1.0,
               rel_tol: float = 1e-9) -> EstimateReport:
    """``Phi - U`` non-increasing per step with ``U`` rebuilt at constant ``C``."""
    b = _budget(trace, budget)
    if not trace.ledger:
        return EstimateReport("psi2_monotone", 0.0, 0.0)
    series = fl._bookkeeping(trace.ledger, trace.initial_mass, trace.forcing, b, C)
    phi = np.array(series["Phi"])
    U = np.array(series["U"])
    inc = np.diff(phi - U) / np.maximum(phi[:-1], 1e-300)
    k = int(np.argmax(inc))
    return EstimateReport("psi2_monotone", float(inc[k]), 0.0, slack=rel_tol, constants={"C": C, "c1": b.c1},
                          witnesses={"step": k + 1, "t": series["t"][k]})


def ledger_identity_check(trace: fl.FlowTrace, rel_tol: float = 1e-9) -> EstimateReport:
    """Per step, ``dmass_motion + dissipation + cross_work`` lies in ``[0, remainder_bound]``.

    The first two terms are the exact first variation of the polygon length
    along the step's displacement, so the sum is the nonnegative Taylor
    remainder.  Only valid for the direct curvature mode.
    """
    if trace.options.curvature_mode != "direct":
        return EstimateReport("ledger_identity", 0.0, 0.0, applicable=False,
                              note="smoothed curvature does not move vertices along the lumped first variation")
    if not trace.ledger:
        return EstimateReport("ledger_identity", 0.0, 0.0)
    worst, k_w, lo_w = -math.inf, 0, 0.0
    for k, e in enumerate(trace.ledger):
        r = e["dmass_motion"] + e["dissipation"] + e["cross_work"]
        scale = rel_tol * e["mass"]
        excess = max(r - e.get("remainder_bound", math.inf), -r) / max(scale, 1e-300)
        if excess > worst:
            worst, k_w, lo_w = excess, k, r
    return EstimateReport("ledger_identity", worst, 0.0, slack=1.0,
                          note="lhs is the worst excess in units of rel_tol * mass",
                          witnesses={"step": k_w + 1, "residual": lo_w})


# ---------------------------------------------------------------------------
# Brakke residual

def _spacing(trace: fl.FlowTrace) -> float:
    s = trace.options.remesh_spacing
    if s is None:
        s = float(np.mean(trace.snapshots[0].network.segment_lengths()))
    return s


def _snapshot_window(trace: fl.FlowTrace, t1: float, t2: float) -> tuple[int, int]:
    times = trace.times
    if not t1 < t2:
        raise PreconditionError("need t1 < t2")
    i = int(np.argmin(np.abs(times - t1)))
    j = int(np.argmin(np.abs(times - t2)))
    if j <= i:
        raise PreconditionError(f"[{t1}, {t2}] contains no pair of distinct snapshots")
    return i, j


@dataclass
class _BrakkeTerms:
    mass_phi: float
    dt_phi: float
    motion: float  # int (grad phi - phi h) . v


def _brakke_terms(snap: fl.Snapshot, phi: ScalarTestFunction, u: ForcingField,
                  opts: fl.FlowOptions) -> _BrakkeTerms:
    net = snap.network
    if net.is_empty:
        return _BrakkeTerms(0.0, 0.0, 0.0)
    V = snap.varifold
    pts, wts, _ = vf.segment_quadrature(V, 6)
    val = phi.value(pts, snap.t)
    if np.any(val < 0):
        raise PreconditionError("test function takes negative values")
    mass_phi = float(np.dot(wts, val))
    dt_phi = float(np.dot(wts, phi.dt(pts, snap.t)))
    mot = fl.vertex_motion(net, u, snap.t, opts)
    # grad phi . v with v linear along each segment
    seg = net.segments
    x = net.vertices
    s, w = gauss_legendre(0.0, 1.0, 6)
    a, b = x[seg[:, 0]], x[seg[:, 1]]
    va, vb = mot.velocity[seg[:, 0]], mot.velocity[seg[:, 1]]
    P = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    Vel = va[:, None, :] + s[None, :, None] * (vb - va)[:, None, :]
    G = phi.grad(P.reshape(-1, 2), snap.t).reshape(P.shape)
    ln = net.segment_lengths()
    transport = float(np.sum(ln[:, None] * w[None, :] * np.einsum("ijk,ijk->ij", G, Vel)))
    # phi h . v lumped on the vertex atoms
    m = mot.moving
    pv = phi.value(x, snap.t)
    lumped = float(np.sum((pv * mot.dual * np.einsum("ij,ij->i", mot.h, mot.velocity))[m]))
    return _BrakkeTerms(mass_phi, dt_phi, transport - lumped)


def brakke_residual(trace: fl.FlowTrace, phi: ScalarTestFunction, t1: float | None = None,
                    t2: float | None = None, kappa: float = 10.0) -> EstimateReport:
    """Signed residual of the Brakke inequality for ``phi`` on ``[t1, t2]``.

    ``residual = Delta ||V||(phi) - int int d_t phi - int int (grad phi - phi h).(h + u_perp)``
    with time integrals by the trapezoid rule over snapshots; ``t1`` and
    ``t2`` snap to the nearest snapshot times.  Passes iff
    ``residual <= kappa (dt + spacing^2) mass(0) (t2 - t1)`` with ``dt`` the
    largest snapshot gap.  Residuals are additive over adjacent windows.
    """
    times = trace.times
    t1 = times[0] if t1 is None else t1
    t2 = times[-1] if t2 is None else t2
    i, j = _snapshot_window(trace, t1, t2)
    terms = [_brakke_terms(trace.snapshots[k], phi, trace.forcing, trace.options) for k in range(i, j + 1)]
    ts = times[i: j + 1]
    mass_change = terms[-1].mass_phi - terms[0].mass_phi
    dtp = _trapezoid(ts, np.array([q.dt_phi for q in terms]))
    mot = _trapezoid(ts, np.array([q.motion for q in terms]))
    residual = mass_change - dtp - mot
    gap = float(np.max(np.diff(ts)))
    sp = _spacing(trace)
    slack = kappa * (gap + sp * sp) * trace.initial_mass * (ts[-1] - ts[0])
    return EstimateReport("brakke_residual", residual, 0.0, slack=slack, constants={"kappa": kappa},
                          witnesses={"t1": float(ts[0]), "t2": float(ts[-1]), "mass_change": mass_change,
                                     "dt_phi": dtp, "motion": mot, "max_gap": gap, "spacing": sp,
                                     "phi": phi.to_dict()})


def turning_angle(net: nw.CurveNetwork) -> float:
    """Largest turning angle (degrees) at an interior vertex; ``inf`` for an empty network."""
    if net.is_empty:
        return math.inf
    h, dual = nw.curvature_vectors(net)
    if not len(dual):
        return 0.0
    chord = np.hypot(*(h * dual[:, None]).T)  # |e+/|e+| - e-/|e-|| = 2 sin(turn / 2)
    return float(np.degrees(2.0 * np.arcsin(np.clip(0.5 * chord.max(), 0.0, 1.0))))


def resolved_until(trace: fl.FlowTrace, max_turn_deg: float = 30.0) -> int:
    """Index of the last snapshot before the polygon first stops resolving its curvature.

    A snapshot is resolved when no interior vertex turns by more than
    ``max_turn_deg``.  Returns -1 if the first snapshot is already unresolved.
    """
    for k, s in enumerate(trace.snapshots):
        if turning_angle(s.network) > max_turn_deg:
            return k - 1
    return len(trace.snapshots) - 1


def brakke_localize(trace: fl.FlowTrace, phi: ScalarTestFunction, kappa: float = 10.0) -> list[EstimateReport]:
    """Residuals on every consecutive snapshot window (they sum to the global residual)."""
    times = trace.times
    return [brakke_residual(trace, phi, times[k], times[k + 1], kappa) for k in range(len(times) - 1)]


# ---------------------------------------------------------------------------
# clearing out

def _box(trace: fl.FlowTrace, pad: float = 0.0):
    pts = np.vstack([s.network.vertices for s in trace.snapshots if len(s.network.vertices)])
    return pts.min(axis=0) - pad, pts.max(axis=0) + pad


def _trace_u_sup(trace: fl.FlowTrace, pad: float = 0.0) -> float:
    if trace.forcing.is_zero:
        return 0.0
    lo, hi = _box(trace, pad)
    res = min(float(np.max(hi - lo)) / 64.0, trace.forcing.feature_width / 4.0)
    return sup_norm(trace.forcing, lo, hi, trace.times, res)


def _distances(net: nw.CurveNetwork, centers: np.ndarray) -> np.ndarray:
    """Distance from each center to the network (``inf`` for an empty network)."""
    if net.is_empty:
        return np.full(len(centers), math.inf)
    seg = net.segments
    a = net.vertices[seg[:, 0]]
    d = net.vertices[seg[:, 1]] - a
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(centers))
    for k0 in range(0, len(centers), 256):
        c = centers[k0: k0 + 256]
        rel = c[:, None, :] - a[None, :, :]
        s = np.clip(np.einsum("cij,ij->ci", rel, d) / dd, 0.0, 1.0)
        foot = rel - s[..., None] * d[None]
        out[k0: k0 + 256] = np.sqrt(np.min(np.einsum("cij,cij->ci", foot, foot), axis=1))
    return out


def clearing_out_radius(r: float, elapsed: float, u_sup: float, n: int = 1) -> float:
    """Radius of the ball guaranteed empty ``elapsed`` after an empty ball of radius ``r``."""
    v = r * r - (2.0 * n + 2.0 * r * u_sup) * elapsed
    return math.sqrt(v) if v > 0 else 0.0


def clearing_out_check(trace: fl.FlowTrace, center, r: float, t: float, n: int = 1,
                       u_sup: float | None = None) -> EstimateReport:
    """An empty ball stays empty at the shrinking radius for all admissible later snapshots.

    Raises
    ------
    PreconditionError
        If ``||V_t||(B(center, r)) > 0`` at the snapshot nearest ``t``.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    center = np.asarray(center, dtype=float)
    k = int(np.argmin(np.abs(trace.times - t)))
    snap = trace.snapshots[k]
    tol = 1e-12 * max(trace.initial_mass, 1e-300)
    if not snap.network.is_empty and vf.ball_mass(snap.varifold, center, r) > tol:
        raise PreconditionError(f"ball B({center.tolist()}, {r}) is not empty at t={snap.t}")
    us = _trace_u_sup(trace, pad=r) if u_sup is None else u_sup
    life = r * r / (2.0 * n + 2.0 * r * us)
    worst, wit = 0.0, {}
    checked = 0
    for s in trace.snapshots[k + 1:]:
        el = s.t - snap.t
        if el >= life:
            break
        rho = clearing_out_radius(r, el, us, n)
        checked += 1
        if s.network.is_empty:
            continue
        m = vf.ball_mass(s.varifold, center, rho)
        if m > worst:
            worst, wit = m, {"t": s.t, "radius": rho}
    return EstimateReport("clearing_out", worst, 0.0, slack=tol, constants={"n": n, "u_sup": us},
                          witnesses={"center": center.tolist(), "r": r, "t": snap.t, "checked": checked,
                                     **wit})


def clearing_out_sweep(trace: fl.FlowTrace, grid: int = 12, n: int = 1, pad: float = 0.25,
                       max_snapshots: int = 200) -> EstimateReport:
    """Every grid ball that is maximally empty at a snapshot, tracked forward.

    For each center and start snapshot the ball radius is the distance to the
    network, the largest empty open ball.  A violation is a later admissible
    snapshot whose network comes closer than the clearing-out radius.
    """
    snaps = [s for s in trace.snapshots]
    if len(snaps) > max_snapshots:
        idx = np.unique(np.linspace(0, len(snaps) - 1, max_snapshots).round().astype(int))
        snaps = [snaps[i] for i in idx]
    if len(snaps) < 2:
        return EstimateReport("clearing_out", 0.0, 0.0, applicable=False, note="fewer than two snapshots")
    lo, hi = _box(trace)
    span = float(np.max(hi - lo))
    lo, hi = lo - pad * span, hi + pad * span
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    centers = np.array([(x, y) for y in ys for x in xs])
    us = _trace_u_sup(trace, pad=pad * span)
    D = np.array([_distances(s.network, centers) for s in snaps])  # (S, C)
    ts = np.array([s.t for s in snaps])
    tol = 1e-12 * max(span, 1e-300)
    worst, wit, violations, pairs = 0.0, {}, 0, 0
    for i in range(len(snaps) - 1):
        r = D[i]
        ok = np.isfinite(r) & (r > 0)
        if not np.any(ok):
            continue
        el = ts[i + 1:] - ts[i]  # (S',)
        rr = r[None, ok]
        life = rr * rr / (2.0 * n + 2.0 * rr * us)
        need2 = rr * rr - (2.0 * n + 2.0 * rr * us) * el[:, None]
        admissible = el[:, None] < life
        later = D[i + 1:, ok]
        have = np.where(np.isfinite(later), later, np.inf)
        rho = np.sqrt(np.maximum(need2, 0.0))
        deficit = np.where(admissible, rho - have, -np.inf)
        pairs += int(np.count_nonzero(admissible))
        violations += int(np.count_nonzero(deficit > tol))
        m = float(np.max(deficit)) if deficit.size else -np.inf
        if m > worst:
            a, c = np.unravel_index(int(np.argmax(deficit)), deficit.shape)
            cidx = np.flatnonzero(ok)[c]
            wit = {"center": centers[cidx].tolist(), "t": float(ts[i]), "t_later": float(ts[i + 1 + a]),
                   "r": float(r[cidx]), "required_radius": float(rho[a, c]), "distance": float(have[a, c])}
            worst = m
    return EstimateReport("clearing_out", worst, 0.0, slack=tol, constants={"n": n, "u_sup": us},
                          witnesses={"violations": violations, "pairs": pairs, "centers": len(centers), **wit},
                          note="lhs is the largest intrusion depth into a clearing-out ball")


# ---------------------------------------------------------------------------
# phases

def _kinetic_energy(trace: fl.FlowTrace) -> float:
    return float(sum(e["dissipation"] + 2.0 * e["cross_work"] + e["u_perp_l2"] * e["dt"] for e in trace.ledger))


def phase_holder_check(trace: fl.FlowTrace, phase_id: int, constant: float | None = None,
                       resolution: float | None = None, max_snapshots: int = 120) -> EstimateReport:
    """Max over snapshot pairs of ``|E(t2) sym E(t1)| / sqrt(t2 - t1)`` against a constant.

    Areas are rasterised on one common grid.  The default constant is the
    kinetic bound ``sqrt(sup mass * int int |h + u_perp|^2)``; a slack of
    ``2 res (P1 + P2) / sqrt(t2 - t1)`` absorbs raster error.
    """
    snaps = trace.snapshots
    if len(snaps) > max_snapshots:
        idx = np.unique(np.linspace(0, len(snaps) - 1, max_snapshots).round().astype(int))
        snaps = [snaps[i] for i in idx]
    name = f"phase_holder[{phase_id}]"
    if len(snaps) < 2:
        return EstimateReport(name, 0.0, 0.0, applicable=False, note="fewer than two snapshots")
    nets = [s.network for s in snaps]
    if not _phase_closed(trace, phase_id):
        return EstimateReport(name, 0.0, 0.0, applicable=False, note="phase boundary ends at pinned curve ends")
    lo, hi = _box(trace)
    span = float(np.max(hi - lo)) or 1.0
    res = resolution or span / 400.0
    xs, ys = nw._grid([n for n in nets if not n.is_empty], res, pad=2 * res)
    masks = np.array([nw.phase_mask(n, phase_id, xs, ys) if not n.is_empty else
                      np.full((len(ys), len(xs)), n.seeds[phase_id - 1] is not None) for n in nets])
    flat = np.packbits(masks.reshape(len(nets), -1), axis=1)
    per = np.array([nw.phase_perimeter(n, phase_id) if not n.is_empty else 0.0 for n in nets])
    ts = np.array([s.t for s in snaps])
    pop = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)
    if constant is None:
        sup_m = float(_mass_series(trace).max())
        constant = math.sqrt(sup_m * max(_kinetic_energy(trace), 0.0))
    best, corrected, wit = 0.0, 0.0, {}
    for i in range(len(nets) - 1):
        x = np.bitwise_xor(flat[i + 1:], flat[i])
        area = pop[x].sum(axis=1) * res * res
        dt = ts[i + 1:] - ts[i]
        ratio = area / np.sqrt(dt)
        slack = 2.0 * res * (per[i] + per[i + 1:]) / np.sqrt(dt)
        corrected = max(corrected, float(np.max(ratio - slack)))
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best = float(ratio[k])
            wit = {"t1": float(ts[i]), "t2": float(ts[i + 1 + k]), "area": float(area[k]),
                   "raster_slack": float(slack[k])}
    return EstimateReport(name, corrected, constant, constants={"holder_constant": constant, "resolution": res},
                          witnesses={"max_ratio": best, **wit},
                          note="lhs is the largest ratio after subtracting each pair's raster error")


def _phase_closed(trace: fl.FlowTrace, phase_id: int) -> bool:
    return not any(math.isnan(nw.phase_area(s.network, phase_id))
                   for s in trace.snapshots if not s.network.is_empty)


def _phase_boundary_sign(net: nw.CurveNetwork, phase_id: int) -> np.ndarray:
    return nw._phase_sign(net, phase_id)[net.topology.segment_curve]


def _phase_integrals(net: nw.CurveNetwork, phase_id: int, phi: ScalarTestFunction, t: float,
                     u: ForcingField, opts: fl.FlowOptions, need_motion: bool = True) -> dict:
    """Per-snapshot integrals for the transport identity and estimate."""
    s, w = gauss_legendre(0.0, 1.0, 8)
    m_t = phi._m(t)
    out = {"phi_E": 0.0, "dt_phi_E": 0.0, "flux": 0.0, "beta": 0.0, "phi2_V": 0.0}
    if net.is_empty:
        full = net.seeds[phase_id - 1] is not None
        base = phi.profile_integral() if full else 0.0
        out["phi_E"] = m_t * base
        out["dt_phi_E"] = phi._dm(t) * base
        return out
    sign = _phase_boundary_sign(net, phase_id)
    seg = net.segments
    x = net.vertices
    a, b = x[seg[:, 0]], x[seg[:, 1]]
    e = b - a
    ln = net.segment_lengths()
    nr = np.column_stack([e[:, 1], -e[:, 0]]) / ln[:, None]
    nu = sign[:, None] * nr  # outward normal of the phase; zero off its boundary
    P = (a[:, None, :] + s[None, :, None] * e[:, None, :]).reshape(-1, 2)
    W = (ln[:, None] * w[None, :]).reshape(-1)
    NU = np.repeat(nu, len(s), axis=0)
    F = phi.flux_field(P, t)
    area_part = float(np.dot(W, np.einsum("ij,ij->i", F, NU)))
    base = area_part  # int_E p(|x - c|) dx; the unbounded phase adds the flux at infinity
    if not math.isfinite(nw.phase_area(net, phase_id)):
        base += phi.profile_integral()
    out["phi_E"] = m_t * base
    # d_t phi = m' p - m grad p . c'
    p_bd = phi._profile(np.hypot(*(P - phi.center_at(t)).T))
    drift = float(np.dot(W, p_bd * (NU @ np.array(phi.velocity))))
    out["dt_phi_E"] = phi._dm(t) * base - m_t * drift
    # phi^2 on the full weight measure
    V = vf.from_network(net)
    qp, qw, _ = vf.segment_quadrature(V, 8)
    out["phi2_V"] = float(np.dot(qw, phi.value(qp, t) ** 2))
    if need_motion:
        mot = fl.vertex_motion(net, u, t, opts)
        va, vb = mot.velocity[seg[:, 0]], mot.velocity[seg[:, 1]]
        vel = (va[:, None, :] + s[None, :, None] * (vb - va)[:, None, :]).reshape(-1, 2)
        out["flux"] = float(np.dot(W, phi.value(P, t) * np.einsum("ij,ij->i", vel, NU)))
        uval = u.eval(x, t) if not u.is_zero else np.zeros_like(x)
        g = np.einsum("ij,ij->i", mot.h, mot.h) + np.einsum("ij,ij->i", uval, uval)
        on = sign != 0
        out["beta"] = 2.0 * float(np.sum(ln[on] * 0.5 * (g[seg[on, 0]] + g[seg[on, 1]])))
    return out


def phase_transport_check(trace: fl.FlowTrace, phase_id: int, phi: ScalarTestFunction,
                          t1: float | None = None, t2: float | None = None,
                          kappa: float = 10.0) -> EstimateReport:
    """Transport identity and its Cauchy-Schwarz estimate for one phase.

    (i) ``Delta int_E phi - int int_E d_t phi - int int_{bd E} phi v.nu``
    vanishes up to discretisation slack.  (ii) The same left side without
    the flux is bounded by ``beta^(1/2) (int int phi^2 d||V|| dt)^(1/2)``
    with ``beta = int 2 int_{bd E} (|h|^2 + |u|^2)``.
    """
    if not _phase_closed(trace, phase_id):
        return EstimateReport(f"phase_transport[{phase_id}]", 0.0, 0.0, applicable=False,
                              note="phase boundary ends at pinned curve ends")
    times = trace.times
    t1 = times[0] if t1 is None else t1
    t2 = times[-1] if t2 is None else t2
    i, j = _snapshot_window(trace, t1, t2)
    rows = [_phase_integrals(trace.snapshots[k].network, phase_id, phi, trace.snapshots[k].t, trace.forcing,
                             trace.options) for k in range(i, j + 1)]
    ts = times[i: j + 1]
    series = {key: np.array([r[key] for r in rows]) for key in rows[0]}
    delta = series["phi_E"][-1] - series["phi_E"][0]
    dtp = _trapezoid(ts, series["dt_phi_E"])
    flux = _trapezoid(ts, series["flux"])
    beta = _trapezoid(ts, series["beta"])
    phi2 = _trapezoid(ts, series["phi2_V"])
    gap = float(np.max(np.diff(ts)))
    sp = _spacing(trace)
    sup_phi = phi.amplitude * (1.0 + abs(phi.modulation))
    slack = kappa * (gap + sp * sp) * sup_phi * trace.initial_mass * (ts[-1] - ts[0])
    wit = {"t1": float(ts[0]), "t2": float(ts[-1]), "delta": delta, "dt_phi": dtp, "flux": flux}
    identity = EstimateReport(f"phase_transport[{phase_id}].identity", abs(delta - dtp - flux), 0.0,
                              slack=slack, constants={"kappa": kappa}, witnesses=wit)
    estimate = EstimateReport(f"phase_transport[{phase_id}].estimate", abs(delta - dtp),
                              math.sqrt(beta * phi2), slack=slack,
                              witnesses={**wit, "beta": beta, "phi2": phi2})
    rep = combine(f"phase_transport[{phase_id}]", [identity, estimate])
    return rep


# ---------------------------------------------------------------------------
# structure

_ALLOWED_ANGLES = np.array([0.0, 60.0, 120.0])


def structure_checks(snapshot: fl.Snapshot | nw.CurveNetwork, angle_tol: float = 1e-6, tol: float = 1e-9,
                     perimeter_tol: float = 1e-6) -> EstimateReport:
    """Junction angles, perimeter bounds on the mass, and the parity rule.

    (a) every junction gap within ``angle_tol`` degrees of 0, 60 or 120;
    (b) ``mass >= P_i`` for each phase and ``2 mass >= sum_i P_i``;
    (c) with unit multiplicities ``2 mass = sum_i P_i``; with two phases a
    merged segment lies on the reduced boundary of phase 1 iff its
    multiplicity is odd.
    """
    net = snapshot.network if isinstance(snapshot, fl.Snapshot) else snapshot
    t = snapshot.t if isinstance(snapshot, fl.Snapshot) else 0.0
    parts: list[EstimateReport] = []
    if net.is_empty:
        return EstimateReport("structure", 0.0, 0.0, witnesses={"t": t}, note="empty network")
    # (a)
    dev, wj = 0.0, None
    for rep in nw.junction_angle_report(net):
        for g in rep["angles"]:
            d = float(np.min(np.abs(_ALLOWED_ANGLES - g)))
            if d > dev:
                dev, wj = d, rep["junction"]
    parts.append(EstimateReport("structure.angles", dev, angle_tol, applicable=bool(net.junctions),
                                witnesses={"junction": wj, "t": t}))
    # (b)
    V = vf.from_network(net)
    m = vf.mass(V)
    per = [nw.phase_perimeter(net, i) for i in range(1, net.phase_count + 1)]
    k = int(np.argmax(per))
    parts.append(EstimateReport("structure.mass_vs_perimeter", per[k], m, slack=tol * max(m, 1.0),
                                witnesses={"phase": k + 1, "t": t}))
    parts.append(EstimateReport("structure.mass_vs_perimeter_sum", sum(per), 2.0 * m, slack=tol * max(m, 1.0),
                                witnesses={"perimeters": per, "t": t}))
    # (c)
    unit = bool(np.all(V.theta == 1))
    parts.append(EstimateReport("structure.unit_density", abs(2.0 * m - sum(per)), 0.0,
                                slack=perimeter_tol * max(m, 1.0), applicable=unit, witnesses={"t": t}))
    if net.phase_count == 2:
        bad = parity_violations(net)
        parts.append(EstimateReport("structure.parity", float(bad), 0.0, witnesses={"t": t}))
    rep = combine("structure", parts)
    return rep


def parity_violations(net: nw.CurveNetwork, tol: float = 1e-12) -> int:
    """Merged segments whose multiplicity parity disagrees with membership in the reduced boundary of phase 1."""
    if net.is_empty:
        return 0
    s = nw._phase_sign(net, 1)[net.topology.segment_curve]
    seg = net.segments
    a = net.vertices[seg[:, 0]]
    b = net.vertices[seg[:, 1]]
    keys, flip = nw._segment_keys(a, b, tol)
    oriented = np.where(flip, -s, s)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    net_sign = np.zeros(len(counts))
    np.add.at(net_sign, inv, oriented)
    on_boundary = net_sign != 0
    odd = counts % 2 == 1
    return int(np.count_nonzero(on_boundary != odd))


# ---------------------------------------------------------------------------
# suites

SUITES = ("budgets", "varifold", "brakke", "phases", "structure", "clearing")


def _parse_suite(suite: str | Sequence[str]) -> set[str]:
    names = [suite] if isinstance(suite, str) else list(suite)
    out: set[str] = set()
    for n in names:
        for p in str(n).split(","):
            p = p.strip()
            if p == "all":
                out.update(SUITES)
            elif p in SUITES:
                out.add(p)
            elif p:
                raise ValueError(f"unknown suite {p!r}; choose from all, {', '.join(SUITES)}")
    return out


def _density_snapshots(trace: fl.FlowTrace, count: int) -> list[tuple[fl.Snapshot, float]]:
    live = [s for s in trace.snapshots if not s.network.is_empty]
    if not live:
        return []
    idx = np.unique(np.linspace(0, len(live) - 1, min(count, len(live))).round().astype(int))
    out = []
    for k in idx:
        s = live[k]
        d = s.density if s.density is not None else vf.density_ratio(s.varifold)[0]
        out.append((s, float(d)))
    return out


def _catalog_for(trace: fl.FlowTrace) -> list[ScalarTestFunction]:
    nets = [s.network for s in trace.snapshots if not s.network.is_empty]
    if not nets:
        return []
    pts = nets[0].vertices
    c = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    R = max(float(np.max(np.hypot(*(pts - c).T))), 1e-6)
    cover = covering_plateau(nets)
    return [cover, ScalarTestFunction("bump", radius=R, center=tuple(c)),
            ScalarTestFunction("tent", radius=0.5 * R, center=tuple(pts[0]))]


def c_dependent_reports(trace: fl.FlowTrace, C: float, budget: SobolevBudget | None = None,
                        densities: list | None = None, catalog: list | None = None) -> list[EstimateReport]:
    """The checks whose verdict depends on the interpolation constant."""
    b = _budget(trace, budget)
    reps = [gronwall_check(trace, b, C), curvature_budget_check(trace, b, C), trace_u_budget_check(trace, b, C),
            psi2_check(trace, b, C)]
    live = [s for s in trace.snapshots if not s.network.is_empty]
    if live and not trace.forcing.is_zero:
        idx = np.unique(np.linspace(0, len(live) - 1, min(8, len(live))).round().astype(int))
        reps.append(combine("interpolation", [interpolation_check(live[k].varifold, live[k].network,
                                                                  trace.forcing, live[k].t, C) for k in idx]))
    if densities is not None and catalog:
        parts = [meyers_ziemer_check(s.varifold, phi, C, 0.0, d) for s, d in densities for phi in catalog]
        reps.append(combine("meyers_ziemer", parts))
    return reps


def verify_trace(trace: fl.FlowTrace, config: VerifyConfig | None = None, suite: str | Sequence[str] = "all",
                 budget: SobolevBudget | None = None,
                 test_functions: Sequence[ScalarTestFunction] | None = None) -> list[EstimateReport]:
    """Run the selected checks on ``trace``; reports are sorted by name."""
    cfg = config or VerifyConfig()
    chosen = _parse_suite(suite)
    reps: list[EstimateReport] = [EstimateReport("run_completed", float(trace.failed), 0.0, note=trace.error)]
    b = _budget(trace, budget)
    catalog = list(test_functions) if test_functions is not None else _catalog_for(trace)
    densities = _density_snapshots(trace, cfg.density_snapshots) if "varifold" in chosen else None
    if "budgets" in chosen:
        reps += [r for r in c_dependent_reports(trace, cfg.C, b) if r.name != "interpolation"]
        reps += [mass_monotone_check(trace, cfg.tol), ledger_identity_check(trace, cfg.tol)]
    if "varifold" in chosen:
        reps += [r for r in c_dependent_reports(trace, cfg.C, b, densities, catalog)
                 if r.name in ("interpolation", "meyers_ziemer")]
        fv, cu = [], []
        for s, d in densities:
            V = s.varifold
            fv.append(EstimateReport("density_vs_first_variation", d, vf.total_first_variation(V),
                                     slack=cfg.tol, witnesses={"t": s.t}))
            ok = vf._curvature_absolutely_continuous(s.network)
            rhs = math.sqrt(vf.mass(V) * vf.l2_curvature(V, s.network)) if ok else 0.0
            cu.append(EstimateReport("density_vs_curvature", d, rhs, slack=cfg.tol, applicable=ok,
                                     witnesses={"t": s.t}))
        reps += [combine("density_vs_first_variation", fv), combine("density_vs_curvature", cu)]
    if "brakke" in chosen and len(trace.snapshots) > 1:
        # the time quadrature is meaningless once the polygon no longer resolves h (e.g. near extinction)
        j = resolved_until(trace, cfg.max_turn_deg)
        for phi in catalog[:2]:
            name = f"brakke_residual[{phi.kind}]"
            if j < 1:
                reps.append(EstimateReport(name, 0.0, 0.0, applicable=False,
                                           note="fewer than two resolved snapshots"))
                continue
            r = brakke_residual(trace, phi, trace.times[0], trace.times[j], kappa=cfg.kappa)
            r.name = name
            r.witnesses["resolved_until"] = trace.times[j]
            if j < len(trace.snapshots) - 1:
                r.note = (f"snapshots after t={trace.times[j]:.6g} turn by more than {cfg.max_turn_deg:g} deg "
                          f"and are excluded")
            reps.append(r)
    if "phases" in chosen and len(trace.snapshots) > 1:
        net0 = trace.snapshots[0].network
        for i in range(1, net0.phase_count + 1):
            reps.append(phase_holder_check(trace, i, cfg.holder_constant, cfg.raster_resolution))
            if catalog:
                reps.append(phase_transport_check(trace, i, catalog[1], kappa=cfg.kappa))
    if "structure" in chosen:
        # junction angles lag the balanced state by O(spacing) when the forcing drags a junction
        ang = cfg.angle_tol
        if not trace.forcing.is_zero:
            ang += cfg.kappa * _spacing(trace) * (1.0 + _trace_u_sup(trace))
        parts = [structure_checks(s, ang, cfg.tol, cfg.perimeter_tol) for s in trace.snapshots]
        reps.append(combine("structure", parts))
    if "clearing" in chosen:
        reps.append(clearing_out_sweep(trace, cfg.clearing_grid))
    return sorted(reps, key=lambda r: r.name)


def fit_constant(traces: Sequence[fl.FlowTrace], lo: float = 1e-6, hi: float = 1e6, rtol: float = 1e-4,
                 with_varifold: bool = True) -> float:
    """Smallest ``C`` in ``[lo, hi]`` for which every constant-dependent check passes on all traces.

    Returns ``inf`` when even ``hi`` fails.  Relies on each check being
    monotone in ``C``.
    """
    prepared = []
    for tr in traces:
        dens = _density_snapshots(tr, 4) if with_varifold else None
        prepared.append((tr, dens, _catalog_for(tr)))

    def ok(C: float) -> bool:
        return all(r.passed for tr, d, cat in prepared for r in c_dependent_reports(tr, C, None, d, cat))

    if ok(lo):
        return lo
    if not ok(hi):
        return math.inf
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol:
        mid = 0.5 * (a + b)
        if ok(math.exp(mid)):
            b = mid
        else:
            a = mid
    return math.exp(b)


def all_passed(reports: Sequence[EstimateReport]) -> bool:
    return all(r.passed for r in reports)
