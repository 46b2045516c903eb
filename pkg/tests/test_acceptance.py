"""The twelve acceptance criteria, each reported as one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from forcedflow import cli
from forcedflow import estimates as es
from forcedflow import flow as fl
from forcedflow import forcing as fo
from forcedflow import generators as gen
from forcedflow import network as nw
from forcedflow import varifold as vf

TWO_PI = 2 * math.pi


def _circle_run(n, T=0.55, **kw):
    t0 = time.perf_counter()
    tr = fl.run(gen.circle(1.0, n), None, T, fl.FlowOptions(record_every=8, record_density=False, **kw))
    return tr, time.perf_counter() - t0


@pytest.fixture(scope="module")
def circle256():
    return _circle_run(256)


@pytest.fixture(scope="module")
def circle362():
    # 256 * sqrt(2) vertices: spacing^2 and the CFL step both halve
    return _circle_run(362)[0]


@pytest.fixture(scope="module")
def suite_densities(suite_traces):
    """Density ratio of every snapshot of every suite run."""
    return {name: [(s, vf.density_ratio(s.varifold)[0]) for s in tr.snapshots if not s.network.is_empty]
            for name, tr in suite_traces.items()}


def test_criterion_01_shrinking_circle(circle256, criterion):
    tr, elapsed = circle256
    live = [s for s in tr.snapshots if not s.network.is_empty and s.t <= 0.45 + 1e-12]
    err = max(abs(np.mean(np.hypot(*s.network.vertices.T)) ** 2 - (1 - 2 * s.t)) for s in live)
    ext = tr.extinct_at
    logged = any(e["kind"] == "extinction" for e in tr.events)
    ok = (err <= 5e-3 and ext is not None and abs(ext - 0.5) <= 0.01 and logged and elapsed <= 30.0
          and not tr.failed)
    assert criterion(1, ok, f"max|R^2-(1-2t)|={err:.2e} extinction={ext:.6f} runtime={elapsed:.1f}s")


def test_criterion_02_grim_reaper_speed(criterion):
    net = gen.grim_reaper(0.05, 0.01)
    tr = fl.run(net, None, 0.5, fl.FlowOptions(record_every=500, record_density=False))

    def tip(s):
        v = s.network.vertices
        return float(np.interp(0.0, *v[np.argsort(v[:, 0])].T))

    speed = (tip(tr.snapshots[-1]) - tip(tr.snapshots[0])) / (tr.times[-1] - tr.times[0])
    ends = [c.ids[0] for c in net.curves] + [c.ids[-1] for c in net.curves]
    pinned = np.array_equal(tr.snapshots[-1].network.vertices[ends], net.vertices[ends])
    ok = abs(speed - 1.0) <= 1e-2 and pinned and tr.times[-1] == pytest.approx(0.5) and not tr.failed
    assert criterion(2, ok, f"tip speed={speed:.5f} over [0, {tr.times[-1]:.2f}], pinned ends fixed={pinned}")


def test_criterion_03_steiner_triod_stationary(criterion):
    net = gen.triod(1.0, 0.05)
    dt, t = 5e-4, 0.0
    u, opts = fo.zero_field(), fl.FlowOptions(dt_mode="fixed", dt=dt)
    worst_disp, worst_angle = 0.0, 0.0
    for k in range(10_000):
        new, _ = fl.step(net, u, t, dt, opts)
        assert new.vertices.shape == net.vertices.shape
        worst_disp = max(worst_disp, float(np.max(np.abs(new.vertices - net.vertices))))
        if k % 500 == 0 or k == 9_999:
            worst_angle = max(worst_angle, max(abs(a - 120.0) for a in nw.junction_balance(new, 0)[1]))
        net, t = new, t + dt
    ok = worst_disp <= 1e-9 and worst_angle <= 1e-6
    assert criterion(3, ok, f"max step displacement={worst_disp:.1e} max |angle-120|={worst_angle:.1e} deg")


def test_criterion_04_density_equality_witnesses(suite_densities, criterion):
    circ = gen.circle(1.0, 256)
    V = vf.from_network(circ)
    d = vf.density_ratio(V)[0]
    root = math.sqrt(vf.mass(V) * vf.l2_curvature(V, circ))
    seg = vf.from_network(gen.segment((0.0, 0.0), (1.0, 0.0)))
    d_seg, tv_seg = vf.density_ratio(seg)[0], vf.total_first_variation(seg)
    worst = math.inf
    count = 0
    for pairs in suite_densities.values():
        for s, dens in pairs:
            Vs = s.varifold
            worst = min(worst, vf.total_first_variation(Vs) - dens)
            if vf._curvature_absolutely_continuous(s.network):
                worst = min(worst, math.sqrt(vf.mass(Vs) * vf.l2_curvature(Vs, s.network)) - dens)
            count += 1
    ok = (abs(d / TWO_PI - 1) <= 0.02 and abs(root / TWO_PI - 1) <= 0.02 and abs(d_seg - 2) <= 1e-12
          and abs(tv_seg - 2) <= 1e-12 and worst >= -1e-9)
    assert criterion(4, ok, f"circle D={d:.4f} sqrt(M*H)={root:.4f}; segment D={d_seg:.12g} |dV|={tv_seg:.12g}; "
                            f"min margin over {count} snapshots={worst:.2e}")


def test_criterion_05_gronwall(suite_traces, circle256, criterion):
    unforced = [tr for tr in suite_traces.values() if tr.forcing.is_zero] + [circle256[0]]
    mono = [es.mass_monotone_check(tr, 1e-9) for tr in unforced]
    gron = [es.gronwall_check(tr, C=1.0) for tr in suite_traces.values()]
    worst_rel = max(r.lhs for r in mono)
    worst_margin = min(r.margin for r in gron)
    ok = all(r.passed for r in mono) and worst_margin >= 0.0
    assert criterion(5, ok, f"max per-step dmass/mass (u=0)={worst_rel:.2e}; "
                            f"min gronwall margin at C=1 over {len(gron)} runs={worst_margin:.3g}")


def test_criterion_06_budgets(suite_traces, circle256, criterion):
    reps = []
    for tr in suite_traces.values():
        reps += [es.curvature_budget_check(tr, C=1.0), es.trace_u_budget_check(tr, C=1.0)]
    tr = circle256[0]
    m0 = tr.initial_mass
    exact = all(es.curvature_budget_rhs(m0, 0.0, C) == 4.0 * m0 for C in (0.1, 1.0, 10.0))
    diss = es.total_dissipation(tr) / tr.initial_mass
    ok = all(r.margin >= 0.0 for r in reps) and exact and abs(diss - 1) <= 0.01
    worst = min(r.margin for r in reps)
    assert criterion(6, ok, f"min budget margin={worst:.3g}; rhs(c1=0)=4*mass(0) exact={exact}; "
                            f"circle dissipation/mass(0)={diss:.4f}")


def test_criterion_07_brakke_residual(circle256, circle362, criterion):
    tr = circle256[0]
    phi = es.covering_plateau([tr.snapshots[0].network])
    coarse = es.brakke_residual(tr, phi, 0.0, 0.45).lhs
    fine = es.brakke_residual(circle362, phi, 0.0, 0.45).lhs
    rel = abs(coarse) / tr.initial_mass
    ratio = coarse / fine
    ok = rel <= 1e-2 and 1.6 <= ratio <= 2.4
    assert criterion(7, ok, f"|residual|/mass(0)={rel:.2e}; refinement ratio={ratio:.3f}")


def _mz_catalog(tr):
    pts = tr.snapshots[0].network.vertices
    c = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    R = float(np.max(np.hypot(*(pts - c).T)))
    return [es.covering_plateau([tr.snapshots[0].network]),
            es.test_function("bump", radius=R, center=tuple(c)),
            es.test_function("tent", radius=0.5 * R, center=tuple(pts[0])),
            es.test_function("plateau", radius=0.4 * R, inner=0.2 * R, center=tuple(pts[len(pts) // 2]))]


def test_criterion_08_meyers_ziemer(suite_traces, suite_densities, criterion):
    tent = es.test_function("tent", radius=1.0)
    closed = es.meyers_ziemer_check(vf.from_network(gen.segment((-1.0, 0.0), (1.0, 0.0))), tent)
    dens, g = closed.witnesses["density"], closed.witnesses["grad_l1"]
    form_ok = (abs(closed.lhs - 1) <= 0.01 and abs(dens - 2) <= 0.02 and abs(g / math.pi - 1) <= 0.01)
    worst, count = math.inf, 0
    for name, tr in suite_traces.items():
        for phi in _mz_catalog(tr):
            for s, d in suite_densities[name]:
                worst = min(worst, es.meyers_ziemer_check(s.varifold, phi, 1.0, 0.0, d).margin)
                count += 1
    ok = form_ok and worst >= 0.0
    assert criterion(8, ok, f"tent: lhs={closed.lhs:.4f} D={dens:.4f} grad_l1={g:.4f}; "
                            f"min margin at C=1 over {count} pairs={worst:.3g}")


def test_criterion_09_clearing_out(criterion):
    tr = fl.run(gen.circle(1.0, 256), None, 0.6, fl.FlowOptions(remesh=False, record_every=10,
                                                                 record_density=False))
    rep = es.clearing_out_sweep(tr, grid=17)
    v = rep.witnesses.get("violations", 0)
    ok = rep.passed and v == 0 and tr.extinct_at is not None
    assert criterion(9, ok, f"violations={v} over {rep.witnesses.get('pairs', 0)} ball/time pairs, "
                            f"{len(tr.snapshots)} snapshots")


def test_criterion_10_mollifier(criterion):
    u, T = fo.gaussian_swirl(1.0, 0.5), 1.0
    ms = (4, 8, 16, 32)
    fields = [fo.mollify(u, m) for m in ms]
    d = [fo.w12_distance(u, v, T) for v in fields]
    sup_u = fo.sobolev_budget(u, T, sup_window=T + 1).sup_l2
    sup_v = max(v.l2_density(t) for v in fields for t in np.linspace(0.0, T, 5))
    ok = all(a > b for a, b in zip(d, d[1:])) and sup_v <= sup_u * (1 + 1e-3)
    assert criterion(10, ok, "w12 distances " + ", ".join(f"{x:.4f}" for x in d)
                     + f"; sup l2(u^m)={sup_v:.5f} <= sup l2(u)={sup_u:.5f}")


def test_criterion_11_structure(suite_traces, criterion):
    worst, count = math.inf, 0
    for tr in suite_traces.values():
        for s in tr.snapshots:
            rep = es.structure_checks(s)
            for p in rep.witnesses.get("parts", []):
                if p["name"].startswith("structure.mass_vs_perimeter"):
                    worst = min(worst, p["margin"])
            count += 1
    verdicts = [es.verify_trace(tr, suite="structure") for tr in suite_traces.values()]
    suites_ok = all(r.passed for reps in verdicts for r in reps)
    gap = 0.0
    for s in suite_traces["triod"].snapshots:
        net = s.network
        per = sum(nw.phase_perimeter(net, i) for i in range(1, net.phase_count + 1))
        gap = max(gap, abs(2 * net.length() - per))
    dbl = gen.doubled_segment()
    theta = int(vf.from_network(dbl).theta[0])
    parity = es.parity_violations(dbl)
    ok = worst >= -1e-9 and suites_ok and gap <= 1e-6 and theta == 2 and parity == 0
    assert criterion(11, ok, f"min mass-perimeter margin over {count} snapshots={worst:.3g}; "
                             f"triod |2M-sum P|={gap:.1e}; doubled segment theta={theta} parity violations={parity}")


@pytest.mark.parametrize("eps", [0.5])
def test_criterion_12_discrete_parameters(eps, criterion):
    checks = []
    for e in (eps, 0.9, 0.3, 0.1, 0.01):
        c2, p, dt = fl.construction_params(e, 1)
        checks.append(c2 == 23 and isinstance(p, int) and dt == 2.0 ** -p and e ** 23 / 2 < dt <= e ** 23)
    c2, p, dt = fl.construction_params(eps, 1)
    ok = all(checks) and (c2, p, dt) == (23, 23, 2.0 ** -23)
    assert criterion(12, ok, f"eps={eps}: c2={c2} p={p} dt=2^-{p}; bracket holds for 5 values of eps")


def test_verify_all_exits_zero(suite_traces, circle256, tmp_path, capsys):
    traces = dict(suite_traces, circle256=circle256[0])
    codes = {}
    for name, tr in traces.items():
        path = tmp_path / f"{name}.jsonl"
        path.write_text("\n".join(fl.trace_lines(tr)) + "\n")
        codes[name] = cli.main(["verify", "--trace", str(path), "--suite", "all", "--quiet"])
    assert codes == {name: 0 for name in traces}
