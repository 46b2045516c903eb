"""Explicit front-tracking stepper for ``v = h + u^perp`` with a per-step ledger.

Interior vertices move by ``(h + u^perp) dt`` with ``h`` the discrete (or
kernel-smoothed) curvature.  A junction moves by its first-variation atom
divided by its dual length plus ``u``, so a balanced junction only drifts
with the forcing.  Free curve ends are pinned.  Every step is followed by
remeshing and topology events.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property

import numpy as np

from . import network as nw
from . import varifold as vf
from .forcing import ForcingField, SobolevBudget, perp_project, sobolev_budget, zero_field

log = logging.getLogger(__name__)


class StepError(RuntimeError):
    """A step produced an invalid configuration (usually: dt too large)."""


@dataclass(frozen=True)
class FlowOptions:
    """Stepper configuration.

    ``dt_mode`` is ``"cfl"`` (uses ``c_cfl``) or ``"fixed"`` (uses ``dt``).
    ``curvature_mode`` is ``"direct"`` or ``"smoothed"`` (uses ``eps``).
    Unset spacings and tolerances are derived from the initial mean segment
    length when the run starts.
    """

    curvature_mode: str = "direct"
    eps: float | None = None
    dt_mode: str = "cfl"
    dt: float | None = None
    c_cfl: float = 0.25
    remesh: bool = True
    remesh_spacing: float | None = None
    length_tol: float | None = None
    junction_tol: float | None = None
    record_every: int = 50
    record_density: bool = True
    crossing_check: str = "snapshot"
    max_steps: int = 10_000_000
    constant_C: float = 1.0
    max_displacement: float = 0.5

    def __post_init__(self):
        if self.curvature_mode not in ("direct", "smoothed"):
            raise ValueError("curvature_mode must be 'direct' or 'smoothed'")
        if self.curvature_mode == "smoothed" and not (self.eps and self.eps > 0):
            raise ValueError("smoothed curvature needs eps > 0")
        if self.dt_mode not in ("cfl", "fixed"):
            raise ValueError("dt_mode must be 'cfl' or 'fixed'")
        if self.dt_mode == "fixed" and not (self.dt and self.dt > 0):
            raise ValueError("fixed dt_mode needs dt > 0")
        if not 0.0 < self.c_cfl <= 0.5:
            raise ValueError("c_cfl must lie in (0, 0.5]")
        for name in ("remesh_spacing", "length_tol", "junction_tol"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.record_every < 1 or self.max_steps < 1:
            raise ValueError("record_every and max_steps must be positive")
        if self.crossing_check not in ("step", "snapshot", "off"):
            raise ValueError("crossing_check must be 'step', 'snapshot' or 'off'")
        if self.constant_C <= 0:
            raise ValueError("constant_C must be positive")

    def resolved(self, network: nw.CurveNetwork) -> "FlowOptions":
        """Fill in spacing-derived defaults from ``network``."""
        if None not in (self.remesh_spacing, self.length_tol, self.junction_tol):
            return self
        spacing = self.remesh_spacing
        if spacing is None:
            spacing = float(np.mean(network.segment_lengths())) if not network.is_empty else 1.0
        return FlowOptions(**{**asdict(self), "remesh_spacing": spacing,
                              "length_tol": self.length_tol or 0.1 * spacing,
                              "junction_tol": self.junction_tol or 0.5 * spacing})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FlowOptions":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown flow options: {sorted(unknown)}")
        return cls(**data)


def cfl_dt(network: nw.CurveNetwork, u: ForcingField, t: float, c_cfl: float) -> float:
    """``c_cfl * min(h_min^2, 1 / (1 + sup |u|))`` with ``sup |u|`` over the vertices."""
    if network.is_empty:
        raise ValueError("cfl_dt of an empty network")
    hmin = float(np.min(network.segment_lengths()))
    uval = u.eval(network.vertices, t)
    umax = float(np.max(np.hypot(uval[:, 0], uval[:, 1]))) if len(uval) else 0.0
    return c_cfl * min(hmin * hmin, 1.0 / (1.0 + umax))


def construction_params(eps: float, n: int = 1) -> tuple[int, int, float]:
    """``c2 = 3n + 20`` and the dyadic step ``dt = 2^-p`` in ``(eps^c2 / 2, eps^c2]``."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    c2 = 3 * int(n) + 20
    target = c2 * math.log2(eps)  # log2(eps^c2)
    p = math.ceil(-target)
    # guard against round-off in the logarithm; the check below is exact for dyadic eps
    while 2.0 ** -p > eps**c2:
        p += 1
    while 2.0 ** -(p - 1) <= eps**c2:
        p -= 1
    return c2, p, 2.0 ** -p


# --- one step -----------------------------------------------------------------

@dataclass
class Motion:
    velocity: np.ndarray  # (V, 2)
    atoms: np.ndarray  # (V, 2)
    dual: np.ndarray  # (V,)
    moving: np.ndarray  # bool (V,)
    h: np.ndarray  # (V, 2) curvature used per moving vertex
    u_normal: np.ndarray  # (V, 2) forcing actually applied


def vertex_motion(net: nw.CurveNetwork, u: ForcingField, t: float, opts: FlowOptions) -> Motion:
    top = net.topology
    x = net.vertices
    nv = len(x)
    atoms, dual = nw.vertex_atoms(net)
    h = np.zeros((nv, 2))
    un = np.zeros((nv, 2))
    moving = np.zeros(nv, dtype=bool)
    uval = u.eval(x, t) if not u.is_zero else np.zeros((nv, 2))
    ii = top.interior
    if len(ii):
        if opts.curvature_mode == "direct":
            h[ii] = atoms[ii] / dual[ii, None]
        else:
            h[ii] = vf.smoothed_curvature(vf.from_network(net), x[ii], opts.eps)
        if not u.is_zero:
            un[ii] = perp_project(uval[ii], nw.vertex_tangents(net))
        moving[ii] = True
    jv = np.unique(top.junction_vertex)
    if len(jv):
        h[jv] = atoms[jv] / dual[jv, None]
        un[jv] = uval[jv]
        moving[jv] = True
    return Motion(h + un, atoms, dual, moving, h, un)


def step(network: nw.CurveNetwork, u: ForcingField, t: float, dt: float,
         options: FlowOptions | None = None) -> tuple[nw.CurveNetwork, dict]:
    """Advance one explicit step and return ``(new_network, ledger_entry)``.

    The ledger entry is evaluated on the configuration at the start of the
    step; ``dmass`` is measured after remeshing and topology events so that
    masses telescope along a run.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    opts = (options or FlowOptions()).resolved(network)
    if network.is_empty:
        return network, _entry(t, dt, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, [])
    mot = vertex_motion(network, u, t, opts)
    m = mot.moving
    mass0 = network.length()
    hh = np.einsum("ij,ij->i", mot.h, mot.h)
    dissipation = float(np.sum(hh[m] * mot.dual[m]))
    cross = float(np.sum(np.einsum("ij,ij->i", mot.h, mot.u_normal)[m] * mot.dual[m]))
    uu = np.einsum("ij,ij->i", mot.u_normal, mot.u_normal)
    u_perp_l2 = float(np.sum(uu[m] * mot.dual[m]))
    forcing_work = cross + u_perp_l2

    disp = mot.velocity * dt
    _guard(network, disp, opts.max_displacement)
    remainder = _length_remainder_bound(network, disp)
    moved = network.with_vertices(network.vertices + disp)
    mass_moved = moved.length()
    new = moved
    events: list[dict] = []
    if opts.remesh:
        new = nw.remesh(new, opts.remesh_spacing)
    new, events = nw.topology_events(new, opts.length_tol, opts.junction_tol)
    for ev in events:
        ev["t"] = t + dt
    if opts.crossing_check == "step" and not new.is_empty:
        _check_crossings(new, t + dt)
    mass1 = new.length() if not new.is_empty else 0.0
    entry = _entry(t, dt, mass0, mass1 - mass0, mass_moved - mass0, dissipation * dt,
                   forcing_work * dt, cross * dt, u_perp_l2, dissipation, events, remainder)
    return new, entry


def _entry(t, dt, mass, dmass, dmass_motion, dissipation, forcing_work, cross_work, u_perp_l2, l2_curv, events,
           remainder=0.0):
    return {"t": t, "dt": dt, "mass": mass, "dmass": dmass, "dmass_motion": dmass_motion,
            "dissipation": dissipation, "forcing_work": forcing_work, "cross_work": cross_work,
            "u_perp_l2": u_perp_l2, "l2_curvature": l2_curv, "remainder_bound": remainder, "events": events}


def _length_remainder_bound(net: nw.CurveNetwork, disp: np.ndarray) -> float:
    """Upper bound on ``L(x + d) - L(x) - dL(x)[d]``, which is itself nonnegative.

    Per segment with edge ``e`` and relative displacement ``w``: ``|e + w| - |e| - e.w/|e|``
    is at most ``q^2 / (2(|e| + p))`` where ``p`` and ``q`` are the parallel and normal parts of ``w``.
    """
    seg = net.segments
    e = net.segment_vectors()
    ln = net.segment_lengths()
    w = disp[seg[:, 1]] - disp[seg[:, 0]]
    p = np.einsum("ij,ij->i", e, w) / ln
    q2 = np.maximum(np.einsum("ij,ij->i", w, w) - p * p, 0.0)
    base = ln + p
    safe = base > 0.5 * ln
    out = np.where(safe, q2 / (2.0 * np.where(safe, base, 1.0)), 2.0 * np.sqrt(q2 + p * p))
    return float(np.sum(out))


def _guard(net: nw.CurveNetwork, disp: np.ndarray, limit: float) -> None:
    seg = net.segments
    if len(seg) == 0:
        return
    ln = net.segment_lengths()
    local = np.full(len(net.vertices), np.inf)
    np.minimum.at(local, seg[:, 0], ln)
    np.minimum.at(local, seg[:, 1], ln)
    move = np.hypot(disp[:, 0], disp[:, 1])
    bad = move > limit * local
    if np.any(bad):
        k = int(np.argmax(np.where(bad, move / local, 0.0)))
        raise StepError(f"vertex {k} moves {move[k]:.3g}, more than {limit} of its shortest edge "
                        f"{local[k]:.3g}; reduce dt")


def _check_crossings(net: nw.CurveNetwork, t: float) -> None:
    hits = nw.find_crossings(net)
    if hits:
        raise StepError(f"segments {hits[0]} cross at t={t:.6g}; reduce dt")


# --- traces -------------------------------------------------------------------

@dataclass(eq=False)
class Snapshot:
    t: float
    step: int
    network: nw.CurveNetwork
    density: float | None = None

    @cached_property
    def varifold(self) -> vf.DiscreteVarifold:
        return vf.from_network(self.network)

    @property
    def mass(self) -> float:
        return 0.0 if self.network.is_empty else self.network.length()

    def phase_areas(self) -> list[float]:
        if self.network.is_empty:
            return [0.0] * self.network.phase_count
        return [nw.phase_area(self.network, i) for i in range(1, self.network.phase_count + 1)]


@dataclass(eq=False)
class FlowTrace:
    """Snapshots, per-step ledger and the bookkeeping series of a run."""

    snapshots: list[Snapshot]
    ledger: list[dict]
    events: list[dict]
    options: FlowOptions
    forcing: ForcingField
    T: float
    budget: SobolevBudget | None = None
    failed: bool = False
    error: str = ""
    extinct_at: float | None = None
    series: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def initial_mass(self) -> float:
        return self.snapshots[0].mass

    def snapshot_at(self, t: float) -> Snapshot:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[k]

    def summary(self) -> dict:
        return {"T": self.T, "failed": self.failed, "error": self.error, "extinct_at": self.extinct_at,
                "steps": len(self.ledger), "snapshots": len(self.snapshots),
                "options": self.options.to_dict(), "forcing": self.forcing.to_dict(),
                "budget": None if self.budget is None else self.budget.to_dict(),
                "series": self.series, "events": self.events}


def _bookkeeping(ledger: list[dict], mass0: float, u: ForcingField, budget: SobolevBudget | None,
                 C: float) -> dict:
    """``Phi = mass``, ``H = 1/4 int int |h|^2`` and ``U = C^2 sup_l2 int mass int |grad u|^2``."""
    t = [0.0]
    phi = [mass0]
    H = [0.0]
    U = [0.0]
    sup_l2 = 0.0 if budget is None else budget.sup_l2
    static = u.time_independent
    d_static = u.dirichlet_density(0.0) if (static and not u.is_zero and sup_l2 > 0) else None
    for e in ledger:
        t.append(e["t"] + e["dt"])
        phi.append(phi[-1] + e["dmass"])
        H.append(H[-1] + 0.25 * e["dissipation"])
        if sup_l2 == 0.0 or u.is_zero:
            U.append(U[-1])
            continue
        dens = d_static if d_static is not None else u.dirichlet_density(e["t"])
        U.append(U[-1] + C * C * sup_l2 * e["mass"] * dens * e["dt"])
    return {"t": t, "Phi": phi, "H": H, "U": U}


def run(initial: nw.CurveNetwork, u: ForcingField | None, T: float, options: FlowOptions | None = None,
        budget: SobolevBudget | None = None) -> FlowTrace:
    """Iterate :func:`step` until ``T`` or extinction.

    Snapshots are kept at ``t = 0``, every ``record_every`` steps and at the
    final time.  A failing step stops the run and returns the partial trace
    with ``failed`` set.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    nw.validate(initial)
    u = u if u is not None else zero_field()
    opts = (options or FlowOptions()).resolved(initial)
    if budget is None and not u.is_zero:
        horizon = min(T, u.horizon)
        budget = sobolev_budget(u, horizon) if horizon > 0 else None
    elif budget is None:
        budget = SobolevBudget(0.0, 0.0, T)

    net = initial
    t = 0.0
    snaps = [_snapshot(0.0, 0, net, opts)]
    ledger: list[dict] = []
    events: list[dict] = []
    failed, error, extinct = False, "", None
    k = 0
    while t < T * (1 - 1e-12) and k < opts.max_steps:
        dt = opts.dt if opts.dt_mode == "fixed" else cfl_dt(net, u, t, opts.c_cfl)
        dt = min(dt, T - t)
        try:
            new, entry = step(net, u, t, dt, opts)
        except (StepError, nw.MeshError, nw.TopologyError) as exc:
            failed, error = True, str(exc)
            log.warning("run aborted at t=%.6g: %s", t, exc)
            break
        k += 1
        t = t + dt
        entry["step"] = k
        ledger.append(entry)
        events.extend(entry["events"])
        net = new
        if net.is_empty:
            extinct = t
            events.append({"t": t, "kind": "extinction"})
            snaps.append(_snapshot(t, k, net, opts))
            break
        if k % opts.record_every == 0 or t >= T * (1 - 1e-12):
            try:
                if opts.crossing_check == "snapshot":
                    _check_crossings(net, t)
            except StepError as exc:
                failed, error = True, str(exc)
                break
            snaps.append(_snapshot(t, k, net, opts))
    if not failed and snaps[-1].step != k:
        snaps.append(_snapshot(t, k, net, opts))
    trace = FlowTrace(snaps, ledger, events, opts, u, T, budget, failed, error, extinct)
    trace.series = _bookkeeping(ledger, initial.length(), u, budget, opts.constant_C)
    return trace


def _snapshot(t: float, k: int, net: nw.CurveNetwork, opts: FlowOptions) -> Snapshot:
    s = Snapshot(t, k, net)
    if opts.record_density and not net.is_empty:
        s.density = vf.density_ratio(s.varifold)[0]
    return s


# --- trace files -------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _unjson(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    if isinstance(v, dict):
        return {k: _unjson(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_unjson(x) for x in v]
    return v


def trace_lines(trace: FlowTrace) -> list[str]:
    """JSON Lines: one record per snapshot, then per-step ledger rows, then the summary."""
    lines = []
    for s in trace.snapshots:
        rec = {"type": "snapshot", "t": s.t, "step": s.step, "network": s.network.to_dict(),
               "ledger": {"mass": s.mass, "density_ratio": s.density, "phase_areas": s.phase_areas()}}
        lines.append(json.dumps(_jsonable(rec)))
    for e in trace.ledger:
        lines.append(json.dumps(_jsonable({"type": "step", **e})))
    lines.append(json.dumps(_jsonable({"type": "summary", **trace.summary()})))
    return lines


def trace_from_lines(lines, forcing: ForcingField | None = None) -> FlowTrace:
    """Rebuild a trace from :func:`trace_lines`.  Raises ``ValueError`` on corrupt input."""
    from .forcing import field_from_dict
    snaps, ledger, summary = [], [], None
    for no, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = _unjson(json.loads(line))
            kind = rec["type"]
            if kind == "snapshot":
                net = nw.CurveNetwork.from_dict(rec["network"])
                snaps.append(Snapshot(float(rec["t"]), int(rec["step"]), net, rec["ledger"].get("density_ratio")))
            elif kind == "step":
                rec.pop("type")
                ledger.append(rec)
            elif kind == "summary":
                summary = rec
            else:
                raise ValueError(f"unknown record type {kind!r}")
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"corrupt trace at line {no}: {exc}") from exc
    if summary is None or not snaps:
        raise ValueError("trace lacks snapshots or the summary record")
    times = [s.t for s in snaps]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times are not strictly increasing")
    try:
        opts = FlowOptions.from_dict(summary["options"])
        u = forcing if forcing is not None else field_from_dict(summary["forcing"])
        budget = SobolevBudget.from_dict(summary["budget"]) if summary.get("budget") else None
    except (KeyError, TypeError, ValueError, FileNotFoundError) as exc:
        raise ValueError(f"corrupt trace summary: {exc}") from exc
    tr = FlowTrace(snaps, ledger, summary.get("events", []), opts, u, float(summary["T"]), budget,
                   bool(summary.get("failed")), summary.get("error", ""), summary.get("extinct_at"))
    tr.series = summary.get("series", {})
    return tr
