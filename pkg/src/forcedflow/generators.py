"""Initial networks used by the tests, demos and the command line."""

from __future__ import annotations

import math
import re

import numpy as np

from .network import Curve, CurveNetwork, Junction


def circle(radius: float = 1.0, n: int = 256, center=(0.0, 0.0), phase_inside: int = 1,
           phase_outside: int = 2, phase_count: int = 2) -> CurveNetwork:
    """Regular ``n``-gon inscribed in a circle, counter-clockwise (inside on the left)."""
    if radius <= 0 or n < 3:
        raise ValueError("need radius > 0 and n >= 3")
    theta = 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    seeds = [None] * phase_count
    seeds[phase_inside - 1] = tuple(center)
    seeds[phase_outside - 1] = (center[0] + 2 * radius, center[1])
    return CurveNetwork(pts, [Curve(tuple(range(n)), True, phase_inside, phase_outside)], [],
                        phase_count, seeds)


def square(side: float = 1.0, per_side: int = 1, corner=(0.0, 0.0)) -> CurveNetwork:
    """Axis-aligned square boundary, counter-clockwise, ``per_side`` segments per side."""
    if side <= 0 or per_side < 1:
        raise ValueError("need side > 0 and per_side >= 1")
    c = np.asarray(corner, dtype=float)
    corners = c + side * np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    pts = []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        for i in range(per_side):
            pts.append(a + (b - a) * i / per_side)
    seeds = [tuple(c + 0.5 * side), tuple(c - side)]
    return CurveNetwork(np.array(pts), [Curve(tuple(range(len(pts))), True, 1, 2)], [], 2, seeds)


def two_squares(side: float = 1.0, gap: float = 1.0) -> CurveNetwork:
    a = square(side)
    pts = np.vstack([a.vertices, a.vertices + [side + gap, 0.0]])
    curves = [Curve((0, 1, 2, 3), True, 1, 2), Curve((4, 5, 6, 7), True, 1, 2)]
    return CurveNetwork(pts, curves, [], 2, [(0.5 * side, 0.5 * side), (-side, -side)])


def polyline(points, left: int = 1, right: int = 2, phase_count: int = 2, seeds=None) -> CurveNetwork:
    """Single open curve through ``points`` with pinned ends."""
    pts = np.asarray(points, dtype=float)
    if seeds is None:
        seeds = [None] * phase_count
    return CurveNetwork(pts, [Curve(tuple(range(len(pts))), False, left, right)], [], phase_count, seeds)


def line(length: float = 2.0, spacing: float | None = None, y: float = 0.0) -> CurveNetwork:
    """Horizontal segment centred at the origin, phase 1 above, phase 2 below."""
    if length <= 0:
        raise ValueError("length must be positive")
    n = 1 if spacing is None else max(1, int(math.ceil(length / spacing - 1e-9)))
    x = np.linspace(-0.5 * length, 0.5 * length, n + 1)
    pts = np.column_stack([x, np.full_like(x, y)])
    return polyline(pts, seeds=[(0.0, y + 1.0), (0.0, y - 1.0)])


def segment(a=(0.0, 0.0), b=(1.0, 0.0), n: int = 1) -> CurveNetwork:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pts = a + np.linspace(0.0, 1.0, n + 1)[:, None] * (b - a)
    return polyline(pts)


def doubled_segment(a=(0.0, 0.0), b=(1.0, 0.0)) -> CurveNetwork:
    """Two coincident copies of one segment (multiplicity two, two phases).

    The copies carry opposite labels, so phase 1 sits on both sides and the
    segment is not part of any reduced boundary.
    """
    pts = np.array([a, b, a, b], dtype=float)
    curves = [Curve((0, 1), False, 1, 2), Curve((2, 3), False, 2, 1)]
    return CurveNetwork(pts, curves, [], 2, [(0.5, 1.0), None])


def triod(arm: float = 1.0, spacing: float | None = None, center=(0.0, 0.0),
          angles_deg=(90.0, 210.0, 330.0)) -> CurveNetwork:
    """Three straight arms from a junction with pinned outer ends.

    Arm ``k`` runs outward; the sector counter-clockwise after arm ``k`` is
    phase ``k + 1``.  The default angles give the Steiner (120 degree) triod.
    """
    if arm <= 0:
        raise ValueError("arm must be positive")
    n = 1 if spacing is None else max(1, int(math.ceil(arm / spacing - 1e-9)))
    c = np.asarray(center, dtype=float)
    verts = [c]
    curves, ends = [], []
    m = len(angles_deg)
    for k, ang in enumerate(angles_deg):
        d = np.array([math.cos(math.radians(ang)), math.sin(math.radians(ang))])
        ids = [0]
        for i in range(1, n + 1):
            ids.append(len(verts))
            verts.append(c + arm * d * i / n)
        curves.append(Curve(tuple(ids), False, k + 1, (k - 1) % m + 1))
        ends.append((k, 0))
    seeds = []
    for k in range(m):
        a0 = math.radians(angles_deg[k])
        a1 = math.radians(angles_deg[(k + 1) % m])
        mid = a0 + 0.5 * ((a1 - a0) % (2 * math.pi))
        seeds.append(tuple(c + 0.5 * arm * np.array([math.cos(mid), math.sin(mid)])))
    return CurveNetwork(np.array(verts), curves, [Junction(0, tuple(ends))], m, seeds)


def cross(arm: float = 1.0) -> CurveNetwork:
    """Degree-4 junction with four arms at 90 degrees and four phases."""
    return triod(arm, angles_deg=(0.0, 90.0, 180.0, 270.0))


def grim_reaper(margin: float = 0.05, spacing: float = 0.01, t: float = 0.0) -> CurveNetwork:
    """Translating soliton ``y = t - log cos x`` on ``|x| < pi/2 - margin``.

    Sampled uniformly in arc length ``s`` via ``x = atan(sinh s)``,
    ``y = t + log cosh s``; both ends are pinned.
    """
    s_max = math.asinh(math.tan(0.5 * math.pi - margin))
    n = max(2, int(math.ceil(2 * s_max / spacing)))
    s = np.linspace(-s_max, s_max, n + 1)
    pts = np.column_stack([np.arctan(np.sinh(s)), t + np.log(np.cosh(s))])
    return polyline(pts, seeds=[(0.0, t + 1.0), (0.0, t - 1.0)])


def bridged_triods(bridge: float = 1e-4, arm: float = 1.0, slope: float = 2.0) -> CurveNetwork:
    """Two triple junctions joined by a short horizontal bridge.

    The outer arms leave each junction along ``(-1, +-slope)`` and
    ``(1, +-slope)``; for ``slope > 1/sqrt(3)`` swapping neighbours shortens
    the network.  Phases: 1 above, 2 below, 3 left, 4 right.
    """
    half = 0.5 * bridge
    left = np.array([-half, 0.0])
    right = np.array([half, 0.0])
    dirs = {
        "ul": np.array([-1.0, slope]), "dl": np.array([-1.0, -slope]),
        "ur": np.array([1.0, slope]), "dr": np.array([1.0, -slope]),
    }
    for k in dirs:
        dirs[k] = dirs[k] / np.hypot(*dirs[k])
    verts = [left, right, left + arm * dirs["ul"], left + arm * dirs["dl"],
             right + arm * dirs["ur"], right + arm * dirs["dr"]]
    curves = [
        Curve((0, 1), False, 1, 2),  # bridge, left to right
        Curve((0, 2), False, 3, 1),
        Curve((0, 3), False, 2, 3),
        Curve((1, 4), False, 1, 4),
        Curve((1, 5), False, 4, 2),
    ]
    junctions = [Junction(0, ((0, 0), (1, 0), (2, 0))), Junction(1, ((0, 1), (3, 0), (4, 0)))]
    seeds = [(0.0, 0.5), (0.0, -0.5), (-0.5, 0.0), (0.5, 0.0)]
    return CurveNetwork(np.array(verts), curves, junctions, 4, seeds)


_SPEC = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")

_GENERATORS = {
    "circle": lambda *a: circle(*a[:1], *(int(v) for v in a[1:2])),
    "square": lambda *a: square(*a[:1], *(int(v) for v in a[1:2])),
    "triod": lambda *a: triod(*a),
    "line": lambda *a: line(*a),
    "grim_reaper": lambda *a: grim_reaper(*a),
    "segment": lambda *a: segment(),
}


def from_spec(text: str) -> CurveNetwork:
    """Build a network from a generator call such as ``"circle(1, 256)"``."""
    m = _SPEC.match(text)
    if not m or m.group(1) not in _GENERATORS:
        raise ValueError(f"unknown network generator {text!r}")
    args = [float(v) for v in m.group(2).split(",") if v.strip()]
    if any(a <= 0 for a in args):
        raise ValueError("generator parameters must be positive")
    return _GENERATORS[m.group(1)](*args)
