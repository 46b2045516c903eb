"""Planar polygonal curve networks with junctions and phase labels.

A :class:`CurveNetwork` stores the boundary of a partition of the plane into
``phase_count`` phases.  Curves are vertex-index chains; open curves end
either at a junction (a vertex shared by three or more curve ends) or at a
pinned boundary vertex that never moves.  Every curve carries the pair of
phase ids found on its left and right when walking along it.

Networks are immutable snapshots.  Operations return new networks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class MeshError(ValueError):
    """Raised when a network violates its structural invariants."""


class TopologyError(RuntimeError):
    """Raised when a topology event cannot keep the phase labelling consistent."""


@dataclass(frozen=True)
class Curve:
    ids: tuple[int, ...]
    closed: bool
    left: int
    right: int


@dataclass(frozen=True)
class Junction:
    vertex: int
    ends: tuple[tuple[int, int], ...]  # (curve index, 0 = curve start, 1 = curve end)

    @property
    def degree(self) -> int:
        return len(self.ends)


@dataclass(frozen=True)
class _Topology:
    """Index arrays derived from the curve/junction structure (vertex positions excluded)."""

    segments: np.ndarray  # (S, 2) vertex ids, oriented along the owning curve
    segment_curve: np.ndarray  # (S,)
    interior: np.ndarray  # vertices with exactly two neighbours on one curve
    prev: np.ndarray
    next: np.ndarray
    junction_vertex: np.ndarray  # (E,) one row per junction curve-end
    junction_neighbor: np.ndarray  # (E,)
    junction_index: np.ndarray  # (E,) index into CurveNetwork.junctions
    pinned: np.ndarray  # free (pinned) curve ends
    pinned_neighbor: np.ndarray
    vertex_curve: np.ndarray  # owning curve per vertex, -1 for junction vertices / unused


@dataclass(frozen=True, eq=False)
class CurveNetwork:
    """Immutable polygonal network.

    Parameters
    ----------
    vertices : array_like, shape (V, 2)
        Vertex coordinates.
    curves : sequence of Curve
        Vertex chains.  Closed curves list each vertex once.
    junctions : sequence of Junction
        Vertices where three or more curve ends meet.
    phase_count : int
        Number of phases ``N >= 2``.
    seeds : sequence
        One interior sample point per phase, ``None`` for an empty phase.
    """

    vertices: np.ndarray
    curves: tuple[Curve, ...]
    junctions: tuple[Junction, ...]
    phase_count: int
    seeds: tuple[tuple[float, float] | None, ...] = ()
    _topology: _Topology | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "curves", tuple(self.curves))
        object.__setattr__(self, "junctions", tuple(self.junctions))
        seeds = tuple(None if s is None else (float(s[0]), float(s[1])) for s in self.seeds)
        if len(seeds) < self.phase_count:
            seeds = seeds + (None,) * (self.phase_count - len(seeds))
        object.__setattr__(self, "seeds", seeds)

    # -- structure ---------------------------------------------------------
    @cached_property
    def topology(self) -> _Topology:
        if self._topology is not None:
            return self._topology
        return _build_topology(self)

    @property
    def segments(self) -> np.ndarray:
        return self.topology.segments

    @property
    def is_empty(self) -> bool:
        return len(self.curves) == 0

    def with_vertices(self, vertices: np.ndarray) -> "CurveNetwork":
        """Same topology, new vertex positions."""
        return CurveNetwork(vertices, self.curves, self.junctions, self.phase_count,
                            self.seeds, _topology=self.topology)

    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0)) -> "CurveNetwork":
        c, s = math.cos(rotation), math.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        verts = self.vertices @ rot.T + np.asarray(shift, dtype=float)
        seeds = tuple(None if p is None else tuple(rot @ np.asarray(p) + np.asarray(shift)) for p in self.seeds)
        return CurveNetwork(verts, self.curves, self.junctions, self.phase_count, seeds,
                            _topology=self.topology)

    # -- measurements ------------------------------------------------------
    @cached_property
    def _segment_vectors(self) -> np.ndarray:
        seg = self.segments
        d = self.vertices[seg[:, 1]] - self.vertices[seg[:, 0]]
        d.setflags(write=False)
        return d

    @cached_property
    def _segment_lengths(self) -> np.ndarray:
        d = self._segment_vectors
        ln = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)
        ln.setflags(write=False)
        return ln

    def segment_vectors(self) -> np.ndarray:
        return self._segment_vectors

    def segment_lengths(self) -> np.ndarray:
        return self._segment_lengths

    def curve_lengths(self) -> np.ndarray:
        if not self.curves:
            return np.zeros(0)
        return np.bincount(self.topology.segment_curve, weights=self.segment_lengths(),
                           minlength=len(self.curves))

    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    def junction_id(self, vertex: int) -> int:
        for k, j in enumerate(self.junctions):
            if j.vertex == vertex:
                return k
        raise KeyError(vertex)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
            "curves": [{"ids": list(c.ids), "closed": c.closed, "left": c.left, "right": c.right}
                       for c in self.curves],
            "junctions": [{"vertex": j.vertex, "ends": [list(e) for e in j.ends]} for j in self.junctions],
            "phase_count": self.phase_count,
            "seeds": [None if s is None else [s[0], s[1]] for s in self.seeds],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CurveNetwork":
        curves = [Curve(tuple(int(i) for i in c["ids"]), bool(c["closed"]), int(c["left"]), int(c["right"]))
                  for c in data["curves"]]
        junctions = [Junction(int(j["vertex"]), tuple((int(a), int(b)) for a, b in j["ends"]))
                     for j in data.get("junctions", [])]
        verts = np.array(data["vertices"], dtype=float).reshape(-1, 2)
        return cls(verts, curves, junctions, int(data["phase_count"]), data.get("seeds", []))


def save_network(network: CurveNetwork, path) -> None:
    Path(path).write_text(json.dumps(network.to_dict(), indent=1))


def load_network(path) -> CurveNetwork:
    return CurveNetwork.from_dict(json.loads(Path(path).read_text()))


def _build_topology(net: CurveNetwork) -> _Topology:
    nv = len(net.vertices)
    segs, seg_curve = [], []
    interior, prev, nxt = [], [], []
    vertex_curve = np.full(nv, -1, dtype=int)
    ends_at_junction = {}
    for k, j in enumerate(net.junctions):
        for c, flag in j.ends:
            ends_at_junction[(c, flag)] = k
    jv, jn, jk, pinned, pinned_nb = [], [], [], [], []
    for ci, c in enumerate(net.curves):
        ids = c.ids
        n = len(ids)
        if c.closed:
            for a in range(n):
                segs.append((ids[a], ids[(a + 1) % n]))
                interior.append(ids[a])
                prev.append(ids[a - 1])
                nxt.append(ids[(a + 1) % n])
                vertex_curve[ids[a]] = ci
            seg_curve.extend([ci] * n)
            continue
        for a in range(n - 1):
            segs.append((ids[a], ids[a + 1]))
        seg_curve.extend([ci] * (n - 1))
        for a in range(1, n - 1):
            interior.append(ids[a])
            prev.append(ids[a - 1])
            nxt.append(ids[a + 1])
            vertex_curve[ids[a]] = ci
        for flag, (v, nb) in enumerate(((ids[0], ids[1]), (ids[-1], ids[-2]))):
            if (ci, flag) in ends_at_junction:
                jv.append(v)
                jn.append(nb)
                jk.append(ends_at_junction[(ci, flag)])
            else:
                pinned.append(v)
                pinned_nb.append(nb)
                vertex_curve[v] = ci
    as_int = lambda x: np.asarray(x, dtype=int)  # noqa: E731
    return _Topology(
        segments=as_int(segs).reshape(-1, 2), segment_curve=as_int(seg_curve),
        interior=as_int(interior), prev=as_int(prev), next=as_int(nxt),
        junction_vertex=as_int(jv), junction_neighbor=as_int(jn), junction_index=as_int(jk),
        pinned=as_int(pinned), pinned_neighbor=as_int(pinned_nb), vertex_curve=vertex_curve,
    )


# ---------------------------------------------------------------------------
# validation

def validate(network: CurveNetwork, check_crossings: bool = True) -> None:
    """Raise :class:`MeshError` if ``network`` breaks a structural invariant.

    Exactly coincident segments are allowed (they represent multiplicity);
    any other contact between segments that do not share a vertex is an error.
    """
    net = network
    nv = len(net.vertices)
    if net.phase_count < 2:
        raise MeshError("phase_count must be at least 2")
    if not np.all(np.isfinite(net.vertices)):
        raise MeshError("non-finite vertex coordinates")
    owner: dict[int, int] = {}
    jverts = {j.vertex for j in net.junctions}
    for ci, c in enumerate(net.curves):
        if any(i < 0 or i >= nv for i in c.ids):
            raise MeshError(f"curve {ci} references a missing vertex")
        if c.closed and len(c.ids) < 3:
            raise MeshError(f"closed curve {ci} needs at least 3 vertices")
        if not c.closed and len(c.ids) < 2:
            raise MeshError(f"open curve {ci} needs at least 2 vertices")
        if not (1 <= c.left <= net.phase_count and 1 <= c.right <= net.phase_count):
            raise MeshError(f"curve {ci} has a phase label outside 1..{net.phase_count}")
        for pos, i in enumerate(c.ids):
            inner = c.closed or 0 < pos < len(c.ids) - 1
            if i in jverts:
                if inner:
                    raise MeshError(f"junction vertex {i} appears inside curve {ci}")
                continue
            if i in owner:
                raise MeshError(f"vertex {i} is shared by curves {owner[i]} and {ci} without a junction")
            owner[i] = ci
    registered = set()
    for k, j in enumerate(net.junctions):
        if j.degree < 3:
            raise MeshError(f"junction {k} has degree {j.degree} < 3")
        for c, flag in j.ends:
            if c < 0 or c >= len(net.curves) or net.curves[c].closed:
                raise MeshError(f"junction {k} lists an invalid curve end ({c}, {flag})")
            ids = net.curves[c].ids
            if (ids[0] if flag == 0 else ids[-1]) != j.vertex:
                raise MeshError(f"junction {k} claims end ({c}, {flag}) which does not touch it")
            if (c, flag) in registered:
                raise MeshError(f"curve end ({c}, {flag}) registered twice")
            registered.add((c, flag))
    for ci, c in enumerate(net.curves):
        if c.closed:
            continue
        for flag, v in ((0, c.ids[0]), (1, c.ids[-1])):
            if v in jverts and (ci, flag) not in registered:
                raise MeshError(f"end ({ci}, {flag}) sits on a junction but is not registered")
    if len(net.segments) and np.min(net.segment_lengths()) <= 0.0:
        raise MeshError("zero-length segment")
    for k in range(len(net.junctions)):
        _junction_sectors(net, k)
    if check_crossings:
        bad = find_crossings(net)
        if bad:
            raise MeshError(f"segments {bad[0]} intersect away from shared vertices")


def find_crossings(network: CurveNetwork, limit: int = 1) -> list[tuple[int, int]]:
    """Pairs of segments that touch or cross without sharing a vertex.

    Candidate pairs come from a sort-and-sweep over bounding boxes along the
    axis of larger spread.
    """
    seg = network.segments
    if len(seg) < 2:
        return []
    p = network.vertices[seg[:, 0]]
    q = network.vertices[seg[:, 1]]
    lo = np.minimum(p, q)
    hi = np.maximum(p, q)
    ax = int(np.argmax(hi.max(axis=0) - lo.min(axis=0)))
    order = np.argsort(lo[:, ax], kind="stable")
    lo_s = lo[order, ax]
    # candidates j (later in sweep order) whose interval starts before i's ends
    stop = np.searchsorted(lo_s, hi[order, ax], side="right")
    first = np.arange(len(order)) + 1
    counts = np.maximum(stop - first, 0)
    found: list[tuple[int, int]] = []
    total = int(counts.sum())
    if total == 0:
        return found
    block = 2_000_000
    rows = np.repeat(np.arange(len(order)), counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = np.repeat(first, counts) + offs
    for b0 in range(0, total, block):
        i = order[rows[b0:b0 + block]]
        j = order[cols[b0:b0 + block]]
        keep = np.all(lo[i] <= hi[j], axis=1) & np.all(lo[j] <= hi[i], axis=1)
        share = ((seg[i, 0] == seg[j, 0]) | (seg[i, 0] == seg[j, 1])
                 | (seg[i, 1] == seg[j, 0]) | (seg[i, 1] == seg[j, 1]))
        keep &= ~share
        ii = np.minimum(i[keep], j[keep])
        jj = np.maximum(i[keep], j[keep])
        if ii.size == 0:
            continue
        srt = np.lexsort((jj, ii))
        ii, jj = ii[srt], jj[srt]
        a, b, c, d = p[ii], q[ii], p[jj], q[jj]
        same = (np.all(a == c, axis=1) & np.all(b == d, axis=1)) | (np.all(a == d, axis=1) & np.all(b == c, axis=1))
        o1, o2 = _orient(a, b, c), _orient(a, b, d)
        o3, o4 = _orient(c, d, a), _orient(c, d, b)
        proper = (o1 * o2 < 0) & (o3 * o4 < 0)
        touch = ((o1 == 0) & _on_box(a, b, c)) | ((o2 == 0) & _on_box(a, b, d)) \
            | ((o3 == 0) & _on_box(c, d, a)) | ((o4 == 0) & _on_box(c, d, b))
        hit = (proper | touch) & ~same
        for k in np.nonzero(hit)[0]:
            found.append((int(ii[k]), int(jj[k])))
            if len(found) >= limit:
                return found
    return found


def _orient(a, b, c):
    return np.sign((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _on_box(a, b, c):
    return np.all((np.minimum(a, b) <= c) & (c <= np.maximum(a, b)), axis=1)


# ---------------------------------------------------------------------------
# differential quantities

def _unit(v: np.ndarray) -> np.ndarray:
    n = np.hypot(v[..., 0], v[..., 1])
    if np.any(n <= 0.0):
        raise MeshError("degenerate (zero-length) segment adjacency")
    return v / n[..., None]


def tangent(network: CurveNetwork, curve_id: int, vertex_index: int) -> np.ndarray:
    """Unit tangent of ``curve_id`` at global vertex ``vertex_index``.

    Interior vertices get the normalized average of the two adjacent segment
    directions; curve ends get the direction of their single segment.
    """
    c = network.curves[curve_id]
    ids = c.ids
    try:
        pos = ids.index(vertex_index)
    except ValueError:
        raise MeshError(f"vertex {vertex_index} is not on curve {curve_id}") from None
    x = network.vertices
    n = len(ids)
    if c.closed or 0 < pos < n - 1:
        a, b = ids[pos - 1], ids[(pos + 1) % n]
        t = _unit(x[vertex_index] - x[a]) + _unit(x[b] - x[vertex_index])
        return _unit(t)
    if pos == 0:
        return _unit(x[ids[1]] - x[ids[0]])
    return _unit(x[ids[-1]] - x[ids[-2]])


def vertex_tangents(network: CurveNetwork) -> np.ndarray:
    """Averaged unit tangents at every interior vertex (rows follow ``topology.interior``)."""
    top = network.topology
    x = network.vertices
    t = _unit(x[top.interior] - x[top.prev]) + _unit(x[top.next] - x[top.interior])
    return _unit(t)


def curvature_vectors(network: CurveNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Discrete curvature and dual length at every interior vertex.

    Returns ``(h, dual)`` with rows ordered like ``network.topology.interior``.
    ``h = 2 (e+/|e+| - e-/|e-|) / (|e+| + |e-|)`` and ``dual = (|e+| + |e-|) / 2``.
    """
    top = network.topology
    x = network.vertices
    em = x[top.interior] - x[top.prev]
    ep = x[top.next] - x[top.interior]
    lm = np.hypot(em[:, 0], em[:, 1])
    lp = np.hypot(ep[:, 0], ep[:, 1])
    if lm.size and (np.min(lm) <= 0.0 or np.min(lp) <= 0.0):
        raise MeshError("degenerate (zero-length) segment adjacency")
    dual = 0.5 * (lm + lp)
    turn = ep / lp[:, None] - em / lm[:, None]
    return turn / dual[:, None], dual


def discrete_curvature(network: CurveNetwork, vertex_index: int) -> np.ndarray:
    top = network.topology
    if vertex_index in set(top.junction_vertex.tolist()):
        raise MeshError("curvature is undefined at a junction; use junction_balance")
    hits = np.nonzero(top.interior == vertex_index)[0]
    if hits.size == 0:
        raise MeshError(f"vertex {vertex_index} is not interior to any curve")
    k = int(hits[0])
    x = network.vertices
    em = x[vertex_index] - x[top.prev[k]]
    ep = x[top.next[k]] - x[vertex_index]
    lm, lp = math.hypot(*em), math.hypot(*ep)
    if lm <= 0.0 or lp <= 0.0:
        raise MeshError("degenerate (zero-length) segment adjacency")
    return 2.0 * (ep / lp - em / lm) / (lm + lp)


def vertex_atoms(network: CurveNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Sum of outgoing unit edge vectors at every used vertex.

    Returns ``(atoms, dual)``, both indexed by vertex id.  The first variation
    of the unit-density varifold is ``-sum_v atoms[v] * g(x_v)``.
    """
    x = network.vertices
    seg = network.segments
    nv = len(x)
    atoms = np.zeros((nv, 2))
    dual = np.zeros(nv)
    if len(seg) == 0:
        return atoms, dual
    d = network.segment_vectors()
    ln = network.segment_lengths()
    if np.min(ln) <= 0.0:
        raise MeshError("degenerate (zero-length) segment adjacency")
    u = d / ln[:, None]
    a, b = seg[:, 0], seg[:, 1]
    for k in range(2):
        atoms[:, k] = np.bincount(a, u[:, k], nv) - np.bincount(b, u[:, k], nv)
    dual = 0.5 * (np.bincount(a, ln, nv) + np.bincount(b, ln, nv))
    return atoms, dual


def _end_directions(network: CurveNetwork, junction_id: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    j = network.junctions[junction_id]
    x = network.vertices
    dirs = []
    for c, flag in j.ends:
        ids = network.curves[c].ids
        nb = ids[1] if flag == 0 else ids[-2]
        dirs.append(x[nb] - x[j.vertex])
    return _unit(np.array(dirs)), list(j.ends)


def junction_balance(network: CurveNetwork, junction_id: int) -> tuple[np.ndarray, list[float]]:
    """Residual of the unit conormals and the angular gaps between them.

    Returns
    -------
    residual : ndarray, shape (2,)
        Sum of the unit tangents pointing from the junction into each incident curve.
    angles : list of float
        Gaps (degrees) between angularly consecutive incident directions, sorted ascending.
    """
    dirs, _ = _end_directions(network, junction_id)
    residual = dirs.sum(axis=0)
    theta = np.sort(np.arctan2(dirs[:, 1], dirs[:, 0]))
    gaps = np.diff(np.concatenate([theta, theta[:1] + 2 * np.pi]))
    return residual, sorted(np.degrees(gaps).tolist())


def _junction_sectors(network: CurveNetwork, junction_id: int):
    """Ends in counter-clockwise order and the phase of the sector following each end."""
    dirs, ends = _end_directions(network, junction_id)
    theta = np.arctan2(dirs[:, 1], dirs[:, 0])
    order = np.argsort(theta, kind="stable")
    after, before = [], []
    for k in order:
        c, flag = ends[k]
        cv = network.curves[c]
        if flag == 0:
            after.append(cv.left)
            before.append(cv.right)
        else:
            after.append(cv.right)
            before.append(cv.left)
    m = len(order)
    for a in range(m):
        if after[a] != before[(a + 1) % m]:
            raise MeshError(f"phase labels are inconsistent around junction {junction_id}")
    return [ends[k] for k in order], dirs[order], theta[order], after


# ---------------------------------------------------------------------------
# remeshing

def _decompose(network: CurveNetwork):
    """Split a network into node points and per-curve polylines.

    Nodes are junction vertices and pinned curve ends.  Each curve record is
    ``[start_node, interior_points, end_node, left, right]`` with nodes ``None``
    for closed curves.
    """
    x = network.vertices
    node_of: dict[int, int] = {}
    nodes: list[np.ndarray] = []
    kinds: list[str] = []
    for j in network.junctions:
        node_of[j.vertex] = len(nodes)
        nodes.append(x[j.vertex].copy())
        kinds.append("junction")
    records = []
    for c in network.curves:
        if c.closed:
            records.append([None, x[list(c.ids)].copy(), None, c.left, c.right])
            continue
        ends = []
        for v in (c.ids[0], c.ids[-1]):
            if v not in node_of:
                node_of[v] = len(nodes)
                nodes.append(x[v].copy())
                kinds.append("pinned")
            ends.append(node_of[v])
        records.append([ends[0], x[list(c.ids[1:-1])].copy().reshape(-1, 2), ends[1], c.left, c.right])
    return nodes, kinds, records


def _assemble(nodes, records, phase_count, seeds) -> CurveNetwork:
    """Inverse of :func:`_decompose`; nodes of degree >= 2 become junctions."""
    degree = [0] * len(nodes)
    for s, _, e, _, _ in records:
        if s is not None:
            degree[s] += 1
            degree[e] += 1
    verts: list = []
    vid: dict[int, int] = {}
    for k, p in enumerate(nodes):
        if degree[k] > 0:
            vid[k] = len(verts)
            verts.append(np.asarray(p, dtype=float))
    curves, jends = [], {}
    for ci, (s, pts, e, left, right) in enumerate(records):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        base = len(verts)
        verts.extend(list(pts))
        inner = list(range(base, base + len(pts)))
        if s is None:
            curves.append(Curve(tuple(inner), True, left, right))
            continue
        curves.append(Curve(tuple([vid[s]] + inner + [vid[e]]), False, left, right))
        for flag, node in ((0, s), (1, e)):
            if degree[node] >= 2:
                jends.setdefault(node, []).append((ci, flag))
    junctions = [Junction(vid[k], tuple(v)) for k, v in sorted(jends.items())]
    arr = np.array(verts, dtype=float).reshape(-1, 2)
    return CurveNetwork(arr, curves, junctions, phase_count, seeds)


def _resample(poly: np.ndarray, closed: bool, spacing: float) -> np.ndarray:
    """Equal arc-length resampling of a polyline on itself.

    For open polylines the returned points exclude both ends; for closed ones
    the first point is kept.
    """
    pts = np.vstack([poly, poly[:1]]) if closed else poly
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = max(3 if closed else 1, int(math.ceil(total / spacing - 1e-9)))
    targets = np.arange(1, n) * total / n
    if closed:
        targets = np.concatenate([[0.0], targets])
    k = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    frac = (targets - s[k]) / np.where(seg[k] > 0, seg[k], 1.0)
    return pts[k] + frac[:, None] * (pts[k + 1] - pts[k])


def remesh(network: CurveNetwork, target_spacing: float, band: tuple[float, float] = (0.5, 1.5)) -> CurveNetwork:
    """Resample every curve whose segments leave ``band * target_spacing``.

    Curves already inside the band are left untouched, so a network that needs
    no work is returned as the same object.  Resampling happens on the polygon
    itself: junctions and pinned ends do not move and the length cannot grow.
    """
    if target_spacing <= 0:
        raise ValueError("target_spacing must be positive")
    if network.is_empty:
        return network
    lengths = network.segment_lengths()
    lo, hi = band[0] * target_spacing, band[1] * target_spacing
    seg_curve = network.topology.segment_curve
    bad = np.zeros(len(network.curves), dtype=bool)
    out = (lengths < lo) | (lengths > hi)
    bad[seg_curve[out]] = True
    # single-segment open curves shorter than the spacing cannot be fixed
    n_seg = np.bincount(seg_curve, minlength=len(network.curves))
    curve_len = network.curve_lengths()
    for ci, c in enumerate(network.curves):
        if bad[ci] and not c.closed and n_seg[ci] == 1 and curve_len[ci] < hi:
            bad[ci] = False
        if bad[ci] and c.closed and n_seg[ci] == 3 and curve_len[ci] < 3 * lo:
            bad[ci] = False
    if not bad.any():
        return network
    nodes, _, records = _decompose(network)
    for ci, rec in enumerate(records):
        if not bad[ci]:
            continue
        s, pts, e, _, _ = rec
        if s is None:
            rec[1] = _resample(pts, True, target_spacing)
        else:
            poly = np.vstack([nodes[s][None, :], pts, nodes[e][None, :]])
            rec[1] = _resample(poly, False, target_spacing)
    return _assemble(nodes, records, network.phase_count, network.seeds)


# ---------------------------------------------------------------------------
# phases

def _curve_shoelace(network: CurveNetwork) -> np.ndarray:
    x = network.vertices
    seg = network.segments
    a, b = x[seg[:, 0]], x[seg[:, 1]]
    cross = a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]
    return 0.5 * np.bincount(network.topology.segment_curve, weights=cross, minlength=len(network.curves))


def _phase_sign(network: CurveNetwork, phase_id: int) -> np.ndarray:
    """+1 where the phase is on a curve's left, -1 on its right, 0 otherwise."""
    sign = np.zeros(len(network.curves))
    for ci, c in enumerate(network.curves):
        if c.left == c.right:
            continue
        if c.left == phase_id:
            sign[ci] = 1.0
        elif c.right == phase_id:
            sign[ci] = -1.0
    return sign


def phase_area(network: CurveNetwork, phase_id: int) -> float:
    """Area of phase ``phase_id`` from the oriented shoelace formula.

    Returns ``inf`` for the unbounded phase and ``nan`` when the phase
    boundary ends at pinned curve ends, where the area is undefined.  A phase
    without boundary is the whole plane if it still has a seed point and
    empty otherwise.
    """
    if not 1 <= phase_id <= network.phase_count:
        raise ValueError(f"phase id {phase_id} outside 1..{network.phase_count}")
    sign = _phase_sign(network, phase_id)
    if not np.any(sign):
        return math.inf if network.seeds[phase_id - 1] is not None else 0.0
    flow = np.zeros(len(network.vertices))
    for ci, c in enumerate(network.curves):
        if sign[ci] and not c.closed:
            flow[c.ids[0]] -= sign[ci]
            flow[c.ids[-1]] += sign[ci]
    if np.any(flow != 0):
        return math.nan
    area = float(np.dot(sign, _curve_shoelace(network)))
    return math.inf if area < 0 else area


def phase_perimeter(network: CurveNetwork, phase_id: int, tol: float = 1e-12) -> float:
    """Perimeter of a phase with coincident boundary pieces cancelled by orientation."""
    sign = _phase_sign(network, phase_id)
    if not np.any(sign) or network.is_empty:
        return 0.0
    seg = network.segments
    s = sign[network.topology.segment_curve]
    keep = s != 0
    if not np.any(keep):
        return 0.0
    a = network.vertices[seg[keep, 0]]
    b = network.vertices[seg[keep, 1]]
    vec = (b - a) * s[keep][:, None]
    keys, flip = _segment_keys(a, b, tol)
    vec = np.where(flip[:, None], -vec, vec)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    summed = np.zeros((inv.max() + 1, 2))
    np.add.at(summed, inv, vec)
    return float(np.sum(np.hypot(summed[:, 0], summed[:, 1])))


def _segment_keys(a: np.ndarray, b: np.ndarray, tol: float):
    """Orientation-free integer keys for coincident-segment detection."""
    ka = np.round(a / tol).astype(np.int64)
    kb = np.round(b / tol).astype(np.int64)
    flip = (ka[:, 0] > kb[:, 0]) | ((ka[:, 0] == kb[:, 0]) & (ka[:, 1] > kb[:, 1]))
    lo = np.where(flip[:, None], kb, ka)
    hi = np.where(flip[:, None], ka, kb)
    return np.hstack([lo, hi]), flip


def phase_mask(network: CurveNetwork, phase_id: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Boolean membership of the grid points ``(xs[j], ys[i])`` in a phase.

    Uses signed ray crossings (winding number) of the phase's oriented boundary.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    sign = _phase_sign(network, phase_id)
    if not np.any(sign):
        full = network.seeds[phase_id - 1] is not None
        return np.full((len(ys), len(xs)), full)
    area = phase_area(network, phase_id)
    if math.isnan(area):
        raise MeshError(f"boundary of phase {phase_id} ends at pinned curve ends")
    bounded = math.isfinite(area)
    seg = network.segments
    s = sign[network.topology.segment_curve]
    keep = s != 0
    a = network.vertices[seg[keep, 0]]
    b = network.vertices[seg[keep, 1]]
    s = s[keep]
    up = b[:, 1] > a[:, 1]
    y0 = np.where(up, a[:, 1], b[:, 1])
    y1 = np.where(up, b[:, 1], a[:, 1])
    w = np.where(up, s, -s)
    r0 = np.searchsorted(ys, y0, side="left")
    r1 = np.searchsorted(ys, y1, side="left")
    counts = r1 - r0
    diff = np.zeros((len(ys), len(xs) + 1))
    if counts.sum() > 0:
        idx = np.repeat(np.arange(len(a)), counts)
        rows = np.concatenate([np.arange(lo, hi) for lo, hi in zip(r0, r1) if hi > lo])
        yy = ys[rows]
        t = (yy - a[idx, 1]) / (b[idx, 1] - a[idx, 1])
        xc = a[idx, 0] + t * (b[idx, 0] - a[idx, 0])
        col = np.searchsorted(xs, xc, side="left")
        np.add.at(diff, (rows, np.zeros_like(rows)), w[idx])
        np.add.at(diff, (rows, col), -w[idx])
    winding = np.rint(np.cumsum(diff, axis=1)[:, :-1]).astype(int)
    return winding == 1 if bounded else winding == 0


def _grid(networks: Iterable[CurveNetwork], resolution: float, pad: float = 0.0):
    pts = [n.vertices for n in networks if len(n.vertices)]
    if not pts:
        return np.zeros(0), np.zeros(0)
    allp = np.vstack(pts)
    lo = allp.min(axis=0) - pad
    hi = allp.max(axis=0) + pad
    nx = max(1, int(math.ceil((hi[0] - lo[0]) / resolution)))
    ny = max(1, int(math.ceil((hi[1] - lo[1]) / resolution)))
    xs = lo[0] + (np.arange(nx) + 0.5) * resolution
    ys = lo[1] + (np.arange(ny) + 0.5) * resolution
    return xs, ys


def symmetric_difference_area(network_a: CurveNetwork, network_b: CurveNetwork, phase_id: int,
                              resolution: float) -> float:
    """Raster estimate of ``|A triangle B|`` for one phase on a cell-centred grid."""
    if network_a.phase_count != network_b.phase_count:
        raise ValueError("networks must share phase_count")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    xs, ys = _grid((network_a, network_b), resolution, pad=resolution)
    if xs.size == 0:
        return 0.0
    ma = phase_mask(network_a, phase_id, xs, ys)
    mb = phase_mask(network_b, phase_id, xs, ys)
    return float(np.count_nonzero(ma ^ mb)) * resolution * resolution


# ---------------------------------------------------------------------------
# topology events

def topology_events(network: CurveNetwork, length_tol: float, junction_tol: float,
                    max_rounds: int = 50) -> tuple[CurveNetwork, list[dict]]:
    """Apply the desk-scale topology changes.

    * closed curves shorter than ``length_tol`` are deleted and the enclosed
      phase is absorbed by its surroundings;
    * open curves shorter than ``length_tol`` joining two distinct junctions
      are collapsed and the junctions merged at the curve midpoint;
    * degree-4 junctions are split into two triple junctions joined by a new
      curve of length ``junction_tol`` using the pairing with the least total
      length (kept as degree 4 if neither pairing shortens the network);
    * degree-2 nodes left behind are dissolved by joining their two curves.

    Returns the new network and the list of events; every event has a ``t``
    slot for the caller to fill in.
    """
    if length_tol <= 0 or junction_tol <= 0:
        raise ValueError("tolerances must be positive")
    if network.is_empty:
        return network, []
    lengths = network.curve_lengths()
    jverts = {j.vertex for j in network.junctions}
    short_closed = any(c.closed and lengths[i] < length_tol for i, c in enumerate(network.curves))
    short_bridge = any(
        (not c.closed) and lengths[i] < length_tol and c.ids[0] in jverts and c.ids[-1] in jverts
        for i, c in enumerate(network.curves))
    high_degree = any(j.degree == 4 for j in network.junctions)
    if not (short_closed or short_bridge or high_degree):
        return network, []

    nodes, kinds, records = _decompose(network)
    nodes = [np.asarray(p, dtype=float) for p in nodes]
    seeds = list(network.seeds)
    events: list[dict] = []
    retained: set[int] = set()

    for _ in range(max_rounds):
        changed = False
        # (a) short closed curves
        for ci, rec in enumerate(records):
            if rec is None or rec[0] is not None:
                continue
            pts = rec[1]
            length = _poly_length(pts, True)
            if length < length_tol:
                area = _poly_signed_area(pts)
                inside = rec[3] if area >= 0 else rec[4]
                records[ci] = None
                if not any(r is not None and inside in (r[3], r[4]) for r in records):
                    seeds[inside - 1] = None
                events.append({"t": None, "kind": "delete_loop", "curve": ci, "length": length,
                               "absorbed_phase": inside,
                               "position": [float(v) for v in pts.mean(axis=0)]})
                changed = True
        # (b) short curves between two junctions
        for ci, rec in enumerate(records):
            if rec is None or rec[0] is None:
                continue
            s, pts, e, _, _ = rec
            poly = np.vstack([nodes[s][None], pts, nodes[e][None]])
            length = _poly_length(poly, False)
            if length >= length_tol or kinds[s] != "junction" or kinds[e] != "junction":
                continue
            records[ci] = None
            if s == e:
                events.append({"t": None, "kind": "delete_loop", "curve": ci, "length": length,
                               "position": nodes[s].tolist()})
            else:
                mid = 0.5 * (nodes[s] + nodes[e])
                nodes[s] = mid
                for r in records:
                    if r is None or r[0] is None:
                        continue
                    if r[0] == e:
                        r[0] = s
                    if r[2] == e:
                        r[2] = s
                events.append({"t": None, "kind": "collapse_curve", "curve": ci, "length": length,
                               "position": mid.tolist()})
            changed = True
        # node degrees
        ends_at: dict[int, list[tuple[int, int]]] = {}
        for ci, rec in enumerate(records):
            if rec is None or rec[0] is None:
                continue
            ends_at.setdefault(rec[0], []).append((ci, 0))
            ends_at.setdefault(rec[2], []).append((ci, 1))
        for node, ends in ends_at.items():
            if kinds[node] != "junction":
                continue
            deg = len(ends)
            if deg == 2:
                _dissolve(nodes, records, node, ends)
                events.append({"t": None, "kind": "dissolve_junction", "position": nodes[node].tolist()})
                changed = True
                break
            if deg == 1:
                raise TopologyError(f"junction at {nodes[node].tolist()} would be left with a single curve")
            if deg == 4 and node not in retained:
                ev = _split_degree4(nodes, kinds, records, node, ends, junction_tol)
                events.append(ev)
                if ev["kind"] == "retain_degree4":
                    retained.add(node)
                changed = True
                break
        if not changed:
            break
    records = [r for r in records if r is not None]
    new = _assemble(nodes, records, network.phase_count, seeds)
    validate(new, check_crossings=False)
    return new, events


def _poly_length(pts: np.ndarray, closed: bool) -> float:
    p = np.vstack([pts, pts[:1]]) if closed else pts
    return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))


def _poly_signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _first_point(nodes, rec, flag):
    s, pts, e = rec[0], rec[1], rec[2]
    if len(pts):
        return pts[0] if flag == 0 else pts[-1]
    return nodes[e] if flag == 0 else nodes[s]


def _sector_phases(nodes, records, node, ends):
    """Ends sorted counter-clockwise with the phase found after each end."""
    p = nodes[node]
    dirs = np.array([_first_point(nodes, records[c], f) - p for c, f in ends])
    theta = np.arctan2(dirs[:, 1], dirs[:, 0])
    order = np.argsort(theta, kind="stable")
    after, before = [], []
    for k in order:
        c, f = ends[k]
        left, right = records[c][3], records[c][4]
        after.append(left if f == 0 else right)
        before.append(right if f == 0 else left)
    m = len(order)
    for a in range(m):
        if after[a] != before[(a + 1) % m]:
            raise TopologyError(f"inconsistent phase labels around node at {p.tolist()}")
    return [ends[k] for k in order], dirs[order] / np.hypot(*dirs[order].T)[:, None], theta[order], after


def _dissolve(nodes, records, node, ends):
    (c1, f1), (c2, f2) = ends
    if c1 == c2:
        rec = records[c1]
        pts = np.vstack([nodes[node][None], rec[1]])
        records[c1] = [None, pts, None, rec[3], rec[4]]
        return
    r1, r2 = records[c1], records[c2]

    def oriented(rec, flag_at_node, node_last):
        # polyline of rec without the node, oriented so that the node comes last if node_last
        s, pts, e, left, right = rec
        if (flag_at_node == 1) == node_last:
            return s if node_last else e, pts, left, right
        other = e if node_last else s
        return other, pts[::-1], right, left

    start, p1, l1, rr1 = oriented(r1, f1, True)
    end, p2, l2, rr2 = oriented(r2, f2, False)
    if (l1, rr1) != (l2, rr2):
        raise TopologyError("cannot join curves with different phase labels")
    pts = np.vstack([p1, nodes[node][None], p2])
    records[c1] = [start, pts, end, l1, rr1]
    records[c2] = None


def _split_degree4(nodes, kinds, records, node, ends, bridge):
    ordered, dirs, theta, after = _sector_phases(nodes, records, node, ends)
    p = nodes[node].copy()
    old = {}
    for c, f in ordered:
        old[(c, f)] = float(np.hypot(*(_first_point(nodes, records[c], f) - p)))
    half = min(0.5 * bridge, 0.45 * min(old.values()))
    best = None
    for shift in (0, 1):
        pa = [(shift) % 4, (shift + 1) % 4]
        pb = [(shift + 2) % 4, (shift + 3) % 4]
        d = dirs[pa].sum(axis=0) - dirs[pb].sum(axis=0)
        nd = math.hypot(*d)
        if nd < 1e-12:
            mid = theta[pa[0]] + 0.5 * ((theta[pa[1]] - theta[pa[0]]) % (2 * np.pi))
            d = np.array([math.cos(mid), math.sin(mid)])
        else:
            d = d / nd
        qa, qb = p + half * d, p - half * d
        change = 2 * half
        for k in pa:
            c, f = ordered[k]
            change += math.hypot(*(_first_point(nodes, records[c], f) - qa)) - old[(c, f)]
        for k in pb:
            c, f = ordered[k]
            change += math.hypot(*(_first_point(nodes, records[c], f) - qb)) - old[(c, f)]
        if best is None or change < best[0]:
            best = (change, shift, pa, pb, qa, qb, d)
    change, shift, pa, pb, qa, qb, d = best
    if change >= 0:
        return {"t": None, "kind": "retain_degree4", "position": p.tolist(), "length_change": 0.0}
    # sectors split by the bridge: the one after pa[1] and the one after pb[1]
    s1 = after[pa[1]]
    s2 = after[pb[1]]
    mid1 = theta[pa[1]] + 0.5 * ((theta[pb[0]] - theta[pa[1]]) % (2 * np.pi))
    bis1 = np.array([math.cos(mid1), math.sin(mid1)])
    # bridge runs from qb to qa, i.e. along +d
    left, right = (s1, s2) if d[0] * bis1[1] - d[1] * bis1[0] > 0 else (s2, s1)
    nodes[node] = qa
    nodes.append(qb)
    kinds.append("junction")
    nb = len(nodes) - 1
    for k in pb:
        c, f = ordered[k]
        records[c][0 if f == 0 else 2] = nb
    records.append([nb, np.zeros((0, 2)), node, left, right])
    return {"t": None, "kind": "split_junction", "position": p.tolist(), "length_change": float(change),
            "bridge": float(2 * half)}


def junction_angle_report(network: CurveNetwork) -> list[dict]:
    out = []
    for k, j in enumerate(network.junctions):
        res, angles = junction_balance(network, k)
        out.append({"junction": k, "vertex": j.vertex, "residual": res.tolist(), "angles": angles})
    return out


def merged_segments(networks: Sequence[CurveNetwork] | CurveNetwork, tol: float = 1e-12):
    """Segments of one or more networks with coincident copies merged.

    Returns ``(a, b, theta)``: endpoints and integer multiplicities.
    """
    if isinstance(networks, CurveNetwork):
        networks = [networks]
    a_list, b_list = [], []
    for n in networks:
        if n.is_empty:
            continue
        seg = n.segments
        a_list.append(n.vertices[seg[:, 0]])
        b_list.append(n.vertices[seg[:, 1]])
    if not a_list:
        return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int)
    a = np.vstack(a_list)
    b = np.vstack(b_list)
    keys, _ = _segment_keys(a, b, tol)
    _, first, inv, counts = np.unique(keys, axis=0, return_index=True, return_inverse=True, return_counts=True)
    order = np.argsort(first)
    return a[first[order]], b[first[order]], counts[order].astype(int)
