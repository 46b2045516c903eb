"""Forcing fields ``u(x, t)``: analytic catalog, sampled grids, budgets and mollification.

Every field exposes ``eval(x, t)`` returning vectors of shape ``(N, 2)`` (or
``(2,)`` for a single point) and ``grad(x, t)`` returning Jacobians with
``G[..., i, j] = du_i/dx_j``.  Fields vanish for ``|x| > support_radius``,
for ``t < 0`` and for ``t > horizon``.

Most fields are *separable*, ``u(x, t) = tau(t) S(x)``.  Budget and distance
quadratures exploit this so that only one spatial integral is needed.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from ._kernels import (BUMP1_NORM, bump1, bump2, bump2_grad_factor, plateau, smooth_step)
from ._quadrature import gauss_legendre

CATALOG = ("zero", "constant-patch", "gaussian-swirl", "shear-patch")

_J = np.array([[0.0, -1.0], [1.0, 0.0]])
_CHUNK = 4096

Spatial = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class GridError(ValueError):
    """Malformed sampled-grid field."""


@dataclass(frozen=True, eq=False)
class ForcingField:
    """A planar vector field on space-time.

    Exactly one of ``spatial`` (with ``time_factor``) or ``full`` is set.
    ``spatial(x)`` returns ``(values, jacobians)`` for points ``(N, 2)``;
    ``full(x, t)`` does the same at scalar time ``t``.
    """

    kind: str
    params: dict
    support_radius: float
    horizon: float = math.inf
    feature_width: float = math.inf
    spatial: Spatial | None = field(default=None, repr=False)
    time_factor: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    full: Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray]] | None = field(default=None, repr=False)
    time_breaks: tuple[float, ...] = ()

    @property
    def separable(self) -> bool:
        return self.spatial is not None

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def time_independent(self) -> bool:
        """True when ``tau`` is constant on ``[0, horizon]``."""
        return self.separable and self.params.get("_static", False)

    def _both(self, x, t: float):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        val = np.zeros((len(pts), 2))
        jac = np.zeros((len(pts), 2, 2))
        t = float(t)
        if self.is_zero or t < 0.0 or t > self.horizon or len(pts) == 0:
            return (val[0], jac[0]) if single else (val, jac)
        inside = np.einsum("ij,ij->i", pts, pts) <= self.support_radius**2
        if np.any(inside):
            q = pts[inside]
            if self.separable:
                s = float(self.time_factor(np.array([t]))[0])
                if s != 0.0:
                    v, g = _chunked(self.spatial, q)
                    val[inside], jac[inside] = s * v, s * g
            else:
                v, g = _chunked(lambda y: self.full(y, t), q)
                val[inside], jac[inside] = v, g
        return (val[0], jac[0]) if single else (val, jac)

    def eval(self, x, t: float) -> np.ndarray:
        return self._both(x, t)[0]

    def grad(self, x, t: float) -> np.ndarray:
        return self._both(x, t)[1]

    def eval_and_grad(self, x, t: float):
        return self._both(x, t)

    def dirichlet_density(self, t: float, resolution: float | None = None) -> float:
        """``int |grad u(., t)|^2 dx`` by midpoint quadrature."""
        return _slice_integrals(self, t, resolution)[1]

    def l2_density(self, t: float, resolution: float | None = None) -> float:
        return _slice_integrals(self, t, resolution)[0]

    def to_dict(self) -> dict:
        if self.kind == "grid":
            return {"kind": "grid", "path": self.params.get("path")}
        out = {"kind": self.kind}
        out.update({k: v for k, v in self.params.items() if not k.startswith("_")})
        return out


def _chunked(fn: Spatial, pts: np.ndarray):
    if len(pts) <= _CHUNK:
        return fn(pts)
    vals, jacs = [], []
    for k in range(0, len(pts), _CHUNK):
        v, g = fn(pts[k:k + _CHUNK])
        vals.append(v)
        jacs.append(g)
    return np.concatenate(vals), np.concatenate(jacs)


def _catalog_time(decay: float, horizon: float):
    def tau(t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= horizon), np.exp(-decay * np.maximum(t, 0.0)), 0.0)
    return tau


def _radial_unit(y: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return y / np.where(rho > 0, rho, 1.0)[:, None]


def zero_field() -> ForcingField:
    return ForcingField("zero", {}, 0.0, math.inf, math.inf,
                        spatial=lambda x: (np.zeros((len(x), 2)), np.zeros((len(x), 2, 2))),
                        time_factor=lambda t: np.zeros(np.shape(t)))


def constant_patch(vector=(0.0, 1.0), radius: float = 1.0, center=(0.0, 0.0), ramp: float | None = None,
                   decay: float = 0.0, horizon: float = math.inf) -> ForcingField:
    """Constant vector on ``B_radius(center)`` with a C^1 ramp to zero over ``ramp``."""
    v = np.asarray(vector, dtype=float)
    c = np.asarray(center, dtype=float)
    w = 0.5 * radius if ramp is None else float(ramp)
    if radius <= 0 or w <= 0:
        raise ValueError("radius and ramp must be positive")

    def spatial(x):
        y = x - c
        rho = np.hypot(y[:, 0], y[:, 1])
        chi, dchi = plateau(rho, radius, radius + w)
        val = chi[:, None] * v[None, :]
        jac = v[None, :, None] * (dchi[:, None] * _radial_unit(y, rho))[:, None, :]
        return val, jac

    params = {"vector": v.tolist(), "radius": radius, "center": c.tolist(), "ramp": w, "decay": decay,
              "horizon": horizon, "_static": decay == 0.0}
    return ForcingField("constant-patch", params, float(np.hypot(*c)) + radius + w, horizon, w,
                        spatial=spatial, time_factor=_catalog_time(decay, horizon))


def gaussian_swirl(amplitude: float = 1.0, width: float = 0.5, center=(0.0, 0.0), decay: float = 0.0,
                   horizon: float = math.inf, cut: tuple[float, float] = (5.0, 6.0)) -> ForcingField:
    """Divergence-free swirl ``(A / s) exp(-|y|^2 / 2 s^2) J y`` with ``y = x - center``.

    Cut off smoothly between ``cut[0] * s`` and ``cut[1] * s``.  Untruncated
    closed forms: ``int |u|^2 = pi A^2 s^2`` and ``int |grad u|^2 = 2 pi A^2``.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    A, s = float(amplitude), float(width)
    c = np.asarray(center, dtype=float)
    r0, r1 = cut[0] * s, cut[1] * s

    def spatial(x):
        y = x - c
        rho = np.hypot(y[:, 0], y[:, 1])
        f = (A / s) * np.exp(-0.5 * (rho / s) ** 2)
        chi, dchi = plateau(rho, r0, r1)
        k = f * chi
        jy = y @ _J.T
        dk = (-(k / s**2))[:, None] * y + (f * dchi)[:, None] * _radial_unit(y, rho)
        val = k[:, None] * jy
        jac = k[:, None, None] * _J[None] + jy[:, :, None] * dk[:, None, :]
        return val, jac

    params = {"amplitude": A, "width": s, "center": c.tolist(), "decay": decay, "horizon": horizon,
              "_static": decay == 0.0}
    return ForcingField("gaussian-swirl", params, float(np.hypot(*c)) + r1, horizon, s,
                        spatial=spatial, time_factor=_catalog_time(decay, horizon))


def shear_patch(amplitude: float = 1.0, wavelength: float = 0.5, radius: float = 1.0, center=(0.0, 0.0),
                ramp: float | None = None, decay: float = 0.0, horizon: float = math.inf) -> ForcingField:
    """Horizontal shear ``(A sin(y'/w), 0)`` on a disk, ramped to zero like :func:`constant_patch`."""
    c = np.asarray(center, dtype=float)
    w = 0.5 * radius if ramp is None else float(ramp)
    A, lam = float(amplitude), float(wavelength)
    if radius <= 0 or w <= 0 or lam <= 0:
        raise ValueError("radius, ramp and wavelength must be positive")

    def spatial(x):
        y = x - c
        rho = np.hypot(y[:, 0], y[:, 1])
        chi, dchi = plateau(rho, radius, radius + w)
        prof = A * np.sin(y[:, 1] / lam)
        val = np.zeros((len(x), 2))
        val[:, 0] = prof * chi
        jac = np.zeros((len(x), 2, 2))
        jac[:, 0, :] = (prof * dchi)[:, None] * _radial_unit(y, rho)
        jac[:, 0, 1] += A * np.cos(y[:, 1] / lam) / lam * chi
        return val, jac

    params = {"amplitude": A, "wavelength": lam, "radius": radius, "center": c.tolist(), "ramp": w,
              "decay": decay, "horizon": horizon, "_static": decay == 0.0}
    return ForcingField("shear-patch", params, float(np.hypot(*c)) + radius + w, horizon, min(lam, w),
                        spatial=spatial, time_factor=_catalog_time(decay, horizon))


_BUILDERS = {
    "zero": lambda **kw: zero_field(),
    "constant-patch": constant_patch,
    "gaussian-swirl": gaussian_swirl,
    "shear-patch": shear_patch,
}


def catalog(name: str, **params) -> ForcingField:
    """Build a catalog field by name, e.g. ``catalog("gaussian-swirl", amplitude=2.0)``."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown forcing kind {name!r}; choose from {CATALOG}")
    return _BUILDERS[name](**params)


# --- transformations -------------------------------------------------------

def scaled(u: ForcingField, factor: float) -> ForcingField:
    """``factor * u``."""
    if u.separable:
        sp = u.spatial
        return replace(u, spatial=lambda x: tuple(factor * a for a in sp(x)),
                       params={**u.params, "_scale": factor * u.params.get("_scale", 1.0)})
    fu = u.full
    return replace(u, full=lambda x, t: tuple(factor * a for a in fu(x, t)))


def rescaled(u: ForcingField, lam: float) -> ForcingField:
    """Parabolic rescaling ``lam * u(lam x, lam^2 t)``."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    breaks = tuple(b / lam**2 for b in u.time_breaks)
    common = dict(support_radius=u.support_radius / lam, horizon=u.horizon / lam**2,
                  feature_width=u.feature_width / lam, time_breaks=breaks,
                  params={**u.params, "_rescale": lam})
    if u.is_zero:
        return u
    if u.separable:
        sp, tf = u.spatial, u.time_factor

        def spatial(x):
            v, g = sp(lam * x)
            return lam * v, lam**2 * g
        return replace(u, spatial=spatial, time_factor=lambda t: tf(lam**2 * np.asarray(t)), **common)
    fu = u.full

    def full(x, t):
        v, g = fu(lam * x, lam**2 * t)
        return lam * v, lam**2 * g
    return replace(u, full=full, **common)


def translated(u: ForcingField, shift) -> ForcingField:
    """``u(x - shift, t)``."""
    sh = np.asarray(shift, dtype=float)
    common = dict(support_radius=u.support_radius + float(np.hypot(*sh)))
    if u.is_zero:
        return u
    if u.separable:
        sp = u.spatial
        return replace(u, spatial=lambda x: sp(x - sh), **common)
    fu = u.full
    return replace(u, full=lambda x, t: fu(x - sh, t), **common)


# --- sampled grids -----------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    nx: int
    ny: int
    nt: int
    x0: float
    y0: float
    t0: float
    dx: float
    dy: float
    dt: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2 or self.nt < 1:
            raise GridError("lattice needs nx, ny >= 2 and nt >= 1")
        if self.dx <= 0 or self.dy <= 0 or (self.nt > 1 and self.dt <= 0):
            raise GridError("lattice spacings must be positive")

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def ts(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("nx", "ny", "nt", "x0", "y0", "t0", "dx", "dy", "dt")}


def _bilinear(lat: Lattice, arr: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Interpolate ``arr`` of shape (ny, nx, ...) at points (N, 2); zero outside."""
    fx = (x[:, 0] - lat.x0) / lat.dx
    fy = (x[:, 1] - lat.y0) / lat.dy
    tol = 1e-9
    inside = (fx >= -tol) & (fx <= lat.nx - 1 + tol) & (fy >= -tol) & (fy <= lat.ny - 1 + tol)
    i = np.clip(np.floor(fx).astype(int), 0, lat.nx - 2)
    j = np.clip(np.floor(fy).astype(int), 0, lat.ny - 2)
    ax = np.clip(fx - i, 0.0, 1.0)
    ay = np.clip(fy - j, 0.0, 1.0)
    shape = (-1,) + (1,) * (arr.ndim - 2)
    ax = ax.reshape(shape)
    ay = ay.reshape(shape)
    out = ((1 - ax) * (1 - ay) * arr[j, i] + ax * (1 - ay) * arr[j, i + 1]
           + (1 - ax) * ay * arr[j + 1, i] + ax * ay * arr[j + 1, i + 1])
    return out * inside.reshape(shape)


def grid_field(lattice: Lattice, values: np.ndarray, gradients: np.ndarray | None = None,
               horizon: float | None = None, path: str | None = None) -> ForcingField:
    """Field from samples ``values[k, j, i] = u(x_i, y_j, t_k)``.

    Bilinear in space and linear in time; zero outside the lattice.  Without
    explicit ``gradients`` the node Jacobians come from central differences.
    A single frame (``nt == 1``) is held constant from ``t0`` to ``horizon``.
    """
    lat = lattice
    vals = np.asarray(values, dtype=float)
    if vals.shape != (lat.nt, lat.ny, lat.nx, 2) or not np.all(np.isfinite(vals)):
        raise GridError(f"values must be finite with shape {(lat.nt, lat.ny, lat.nx, 2)}")
    if gradients is None:
        gx = np.gradient(vals, lat.dx, axis=2)
        gy = np.gradient(vals, lat.dy, axis=1)
        grads = np.stack([gx, gy], axis=-1)
    else:
        grads = np.asarray(gradients, dtype=float)
        if grads.shape != (lat.nt, lat.ny, lat.nx, 2, 2):
            raise GridError("gradient channels have the wrong shape")
    corners = np.array([[lat.x0, lat.y0], [lat.xs[-1], lat.y0], [lat.x0, lat.ys[-1]], [lat.xs[-1], lat.ys[-1]]])
    support = float(np.max(np.hypot(corners[:, 0], corners[:, 1])))
    end = lat.ts[-1] if lat.nt > 1 else (math.inf if horizon is None else horizon)
    hor = end if horizon is None else min(horizon, end)
    params = {"lattice": lat.to_dict(), "path": path, "_static": lat.nt == 1}
    feature = 8.0 * min(lat.dx, lat.dy)
    if lat.nt == 1:
        t0 = lat.t0
        return ForcingField("grid", params, support, hor, feature,
                            spatial=lambda x: (_bilinear(lat, vals[0], x), _bilinear(lat, grads[0], x)),
                            time_factor=lambda t: np.where(np.asarray(t) >= t0, 1.0, 0.0),
                            time_breaks=(t0,))

    def full(x, t):
        ft = (t - lat.t0) / lat.dt
        if ft < -1e-12 or ft > lat.nt - 1 + 1e-12:
            return np.zeros((len(x), 2)), np.zeros((len(x), 2, 2))
        k = min(max(int(math.floor(ft)), 0), lat.nt - 2)
        a = min(max(ft - k, 0.0), 1.0)
        v = (1 - a) * _bilinear(lat, vals[k], x) + a * _bilinear(lat, vals[k + 1], x)
        g = (1 - a) * _bilinear(lat, grads[k], x) + a * _bilinear(lat, grads[k + 1], x)
        return v, g

    return ForcingField("grid", params, support, hor, feature, full=full, time_breaks=tuple(lat.ts))


def sample(u: ForcingField, lattice: Lattice, with_gradient: bool = True) -> ForcingField:
    """Sample ``u`` on ``lattice`` and return the resulting grid field."""
    X, Y = np.meshgrid(lattice.xs, lattice.ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = np.zeros((lattice.nt, lattice.ny, lattice.nx, 2))
    grads = np.zeros((lattice.nt, lattice.ny, lattice.nx, 2, 2))
    for k, t in enumerate(lattice.ts):
        v, g = u.eval_and_grad(pts, float(t))
        vals[k] = v.reshape(lattice.ny, lattice.nx, 2)
        grads[k] = g.reshape(lattice.ny, lattice.nx, 2, 2)
    return grid_field(lattice, vals, grads if with_gradient else None,
                      horizon=u.horizon if lattice.nt == 1 else None)


def save_grid(u: ForcingField, path, include_gradient: bool = True) -> None:
    """Write a grid field as CSV plus a sidecar JSON lattice (``<path>.json``)."""
    if u.kind != "grid":
        raise GridError("only grid fields can be saved; use sample() first")
    lat = Lattice(**u.params["lattice"])
    X, Y = np.meshgrid(lat.xs, lat.ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t", "x", "y", "ux", "uy"] + (["gxx", "gxy", "gyx", "gyy"] if include_gradient else [])
        w.writerow(header)
        for t in lat.ts:
            # nt == 1 grids are constant in time; evaluate at their start
            v, g = (u.spatial(pts) if u.separable else u.full(pts, float(t)))
            for p, vv, gg in zip(pts, v, g):
                row = [float(t), p[0], p[1], vv[0], vv[1]]
                if include_gradient:
                    row += [gg[0, 0], gg[0, 1], gg[1, 0], gg[1, 1]]
                w.writerow([repr(float(z)) for z in row])
    meta = lat.to_dict()
    if math.isfinite(u.horizon) and lat.nt == 1:
        meta["horizon"] = u.horizon
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=1))


def load_grid(path) -> ForcingField:
    """Read a grid field written by :func:`save_grid` (or by an external solver)."""
    path = Path(path)
    side = Path(str(path) + ".json")
    if not path.exists() or not side.exists():
        raise FileNotFoundError(f"grid field needs {path} and {side}")
    try:
        meta = json.loads(side.read_text())
        horizon = meta.pop("horizon", None)
        lat = Lattice(**{k: (int(meta[k]) if k in ("nx", "ny", "nt") else float(meta[k]))
                         for k in ("nx", "ny", "nt", "x0", "y0", "t0", "dx", "dy", "dt")})
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise GridError(f"bad lattice sidecar: {exc}") from exc
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = [r for r in reader if r]
    base = ["t", "x", "y", "ux", "uy"]
    if header is None or header[:5] != base or len(header) not in (5, 9):
        raise GridError("grid CSV header must be t,x,y,ux,uy[,gxx,gxy,gyx,gyy]")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise GridError(f"non-numeric grid entry: {exc}") from exc
    n = lat.nt * lat.ny * lat.nx
    if data.ndim != 2 or data.shape != (n, len(header)):
        raise GridError(f"expected {n} rows of {len(header)} columns")
    X, Y = np.meshgrid(lat.xs, lat.ys)
    expect = np.column_stack([np.repeat(lat.ts, lat.nx * lat.ny), np.tile(X.ravel(), lat.nt),
                              np.tile(Y.ravel(), lat.nt)])
    if not np.allclose(data[:, :3], expect, rtol=1e-9, atol=1e-9):
        raise GridError("grid rows do not follow the declared lattice (row-major t, y, x)")
    vals = data[:, 3:5].reshape(lat.nt, lat.ny, lat.nx, 2)
    grads = data[:, 5:9].reshape(lat.nt, lat.ny, lat.nx, 2, 2) if len(header) == 9 else None
    return grid_field(lat, vals, grads, horizon=horizon, path=str(path))


def field_from_dict(spec: dict, base_dir: Path | None = None) -> ForcingField:
    """Inverse of :meth:`ForcingField.to_dict` for catalog and grid fields."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "grid":
        p = Path(spec["path"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return load_grid(p)
    if kind is None:
        raise ValueError("forcing spec needs a 'kind'")
    if "horizon" in spec and spec["horizon"] in ("inf", None):
        spec["horizon"] = math.inf
    for key in ("vector", "center"):
        if key in spec:
            spec[key] = tuple(spec[key])
    return catalog(kind, **spec)


def load_field(path) -> ForcingField:
    path = Path(path)
    data = json.loads(path.read_text())
    return field_from_dict(data, path.parent)


# --- budgets -----------------------------------------------------------------

@dataclass(frozen=True)
class SobolevBudget:
    """``sup_l2 = sup_t int |u|^2``, ``dirichlet = int_0^T int |grad u|^2`` and ``c1`` their product."""

    sup_l2: float
    dirichlet: float
    T: float
    resolution: float = math.nan
    sup_window: float = math.nan
    coarse: bool = False
    c1: float = field(init=False)

    def __post_init__(self):
        if self.sup_l2 < 0 or self.dirichlet < 0:
            raise ValueError("budget factors must be nonnegative")
        object.__setattr__(self, "c1", self.sup_l2 * self.dirichlet)

    def to_dict(self) -> dict:
        return {"sup_l2": self.sup_l2, "dirichlet": self.dirichlet, "c1": self.c1, "T": self.T,
                "resolution": self.resolution, "sup_window": self.sup_window, "coarse": self.coarse}

    @classmethod
    def from_dict(cls, d: dict) -> "SobolevBudget":
        return cls(float(d["sup_l2"]), float(d["dirichlet"]), float(d["T"]),
                   float(d.get("resolution", math.nan)), float(d.get("sup_window", d["T"])),
                   bool(d.get("coarse", False)))


def _space_grid(radius: float, resolution: float) -> tuple[np.ndarray, float]:
    n = max(2, int(math.ceil(2.0 * radius / resolution)))
    n = min(n, 2400)
    h = 2.0 * radius / n
    mid = -radius + h * (np.arange(n) + 0.5)
    X, Y = np.meshgrid(mid, mid)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, h * h


def _default_resolution(u: ForcingField) -> float:
    if math.isfinite(u.feature_width):
        return u.feature_width / 10.0
    return max(u.support_radius, 1.0) / 200.0


def _spatial_sums(fn: Spatial, pts: np.ndarray, area: float) -> tuple[float, float]:
    l2 = 0.0
    d2 = 0.0
    for k in range(0, len(pts), _CHUNK):
        v, g = fn(pts[k:k + _CHUNK])
        l2 += float(np.sum(v * v))
        d2 += float(np.sum(g * g))
    return l2 * area, d2 * area


def _slice_integrals(u: ForcingField, t: float, resolution: float | None) -> tuple[float, float]:
    if u.is_zero or t < 0 or t > u.horizon:
        return 0.0, 0.0
    res = _default_resolution(u) if resolution is None else resolution
    if u.separable:
        a, b = _separable_integrals(u, res)
        s = float(u.time_factor(np.array([t]))[0])
        return s * s * a, s * s * b
    pts, area = _space_grid(u.support_radius, res)
    return _spatial_sums(lambda x: u.full(x, t), pts, area)


_SEP_CACHE: dict = {}


def _separable_integrals(u: ForcingField, res: float) -> tuple[float, float]:
    key = (id(u.spatial), u.support_radius, res)
    hit = _SEP_CACHE.get(key)
    if hit is not None and hit[0] is u.spatial:
        return hit[1]
    pts, area = _space_grid(u.support_radius, res)
    out = _spatial_sums(u.spatial, pts, area)
    if len(_SEP_CACHE) > 64:
        _SEP_CACHE.clear()
    _SEP_CACHE[key] = (u.spatial, out)
    return out


def _time_panels(u: ForcingField, T: float, extra=()) -> np.ndarray:
    cuts = {0.0, T}
    for b in tuple(u.time_breaks) + tuple(extra):
        if 0.0 < b < T:
            cuts.add(float(b))
    if math.isfinite(u.horizon) and 0 < u.horizon < T:
        cuts.add(u.horizon)
    return np.array(sorted(cuts))


def _time_nodes(u: ForcingField, T: float, order: int, extra=()):
    panels = _time_panels(u, T, extra)
    ts, ws = [], []
    for a, b in zip(panels[:-1], panels[1:]):
        x, w = gauss_legendre(a, b, order)
        ts.append(x)
        ws.append(w)
    return np.concatenate(ts), np.concatenate(ws)


def sobolev_budget(u: ForcingField, T: float, quad_resolution: float | None = None, time_order: int = 8,
                   sup_window: float | None = None) -> SobolevBudget:
    """Quadrature of the critical budget ``c1(u, T)``.

    Space: midpoint rule on a square around the support with spacing
    ``quad_resolution``.  Time: Gauss-Legendre panels split at the field's
    break points.  The supremum is a maximum over the time nodes plus the
    window end points; ``sup_window`` (default ``T``) sets the window.
    ``coarse`` is set, with a warning, when fewer than 8 nodes span the
    field's feature width.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if T > u.horizon and not u.is_zero:
        raise ValueError("T exceeds the field horizon")
    res = _default_resolution(u) if quad_resolution is None else float(quad_resolution)
    window = T if sup_window is None else float(sup_window)
    coarse = bool(math.isfinite(u.feature_width) and u.feature_width / res < 8.0)
    if coarse:
        warnings.warn("budget resolution below 8 nodes per feature width", RuntimeWarning, stacklevel=2)
    if u.is_zero:
        return SobolevBudget(0.0, 0.0, T, res, window, coarse)
    ts, ws = _time_nodes(u, T, time_order)
    sup_ts = np.unique(np.concatenate([_time_nodes(u, window, time_order)[0], [0.0, window],
                                       [b for b in u.time_breaks if 0 <= b <= window]]))
    if u.separable:
        a, b = _separable_integrals(u, res)
        tau_d = u.time_factor(ts)
        tau_s = u.time_factor(sup_ts)
        return SobolevBudget(float(np.max(tau_s**2) * a), float(np.dot(ws, tau_d**2) * b), T, res, window, coarse)
    dir_vals = np.array([_slice_integrals(u, float(t), res)[1] for t in ts])
    sup = max(_slice_integrals(u, float(t), res)[0] for t in sup_ts)
    return SobolevBudget(float(sup), float(np.dot(ws, dir_vals)), T, res, window, coarse)


def sup_norm(u: ForcingField, lo, hi, times, resolution: float) -> float:
    """Max of ``|u|`` over a grid on the box ``[lo, hi]`` at the given times."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if u.is_zero:
        return 0.0
    nx = max(2, int(math.ceil((hi[0] - lo[0]) / resolution)) + 1)
    ny = max(2, int(math.ceil((hi[1] - lo[1]) / resolution)) + 1)
    X, Y = np.meshgrid(np.linspace(lo[0], hi[0], nx), np.linspace(lo[1], hi[1], ny))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    best = 0.0
    for t in times:
        v = u.eval(pts, float(t))
        if len(v):
            best = max(best, float(np.max(np.hypot(v[:, 0], v[:, 1]))))
    return best


# --- mollification -------------------------------------------------------------

@dataclass(frozen=True)
class MollifierParams:
    """Kernel widths ``1/m`` and quadrature orders for :func:`mollify`."""

    m: int
    radial_nodes: int = 8
    angular_nodes: int = 16
    time_nodes: int = 8

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if min(self.radial_nodes, self.angular_nodes, self.time_nodes) < 2:
            raise ValueError("quadrature orders must be at least 2")

    def spatial_rule(self):
        """Nodes ``y``, kernel weights ``zeta(y) dy`` and kernel-gradient weights ``grad zeta(y) dy``."""
        eps = 1.0 / self.m
        r, wr = gauss_legendre(0.0, eps, self.radial_nodes)
        th = 2 * np.pi * np.arange(self.angular_nodes) / self.angular_nodes
        R, TH = np.meshgrid(r, th, indexing="ij")
        y = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
        area = (np.outer(wr * r, np.full(self.angular_nodes, 2 * np.pi / self.angular_nodes))).ravel()
        r2 = np.einsum("ij,ij->i", y, y) / eps**2
        zeta = bump2(r2) / eps**2 * area
        dzeta = (bump2_grad_factor(r2) / eps**4)[:, None] * y * area[:, None]
        return y, zeta, dzeta

    def kernel_integrals(self) -> tuple[float, float]:
        """Quadrature integrals of the spatial and temporal kernels (both should be 1)."""
        _, zeta, _ = self.spatial_rule()
        eps = 1.0 / self.m
        s, w = gauss_legendre(-eps, eps, self.time_nodes)
        return float(np.sum(zeta)), float(np.dot(w, bump1(s / eps) / eps))


def _bump1_cdf(s):
    """``int_{-1}^{s} bump1``, clamped."""
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    # antiderivative of (1 - s^2)^4 = 1 - 4 s^2 + 6 s^4 - 4 s^6 + s^8
    def F(x):
        return x - 4 * x**3 / 3 + 6 * x**5 / 5 - 4 * x**7 / 7 + x**9 / 9
    return BUMP1_NORM * (F(s) - F(-1.0))


def mollify(u: ForcingField, params: MollifierParams | int) -> ForcingField:
    """``u^(m) = (zeta_{1/m} * rho_{1/m} * u) eta(|x| / m)``, evaluated lazily by quadrature.

    ``u`` is extended by zero outside ``[0, m]`` in time.  The Jacobian is the
    convolution with the differentiated spatial kernel plus the cutoff term.
    Use :func:`sample` to materialize the result on a lattice.
    """
    p = params if isinstance(params, MollifierParams) else MollifierParams(int(params))
    m = p.m
    eps = 1.0 / m
    if u.is_zero:
        return zero_field()
    y, zeta, dzeta = p.spatial_rule()
    t_end = min(float(m), u.horizon)

    def conv(fn_val, x):
        # zeta * f and grad(zeta * f) at points x (N, 2)
        pts = (x[:, None, :] - y[None, :, :]).reshape(-1, 2)
        v = fn_val(pts).reshape(len(x), len(y), 2)
        val = np.einsum("nkj,k->nj", v, zeta)
        jac = np.einsum("nki,kj->nij", v, dzeta)
        return val, jac

    def cutoff(x, val, jac):
        rho = np.hypot(x[:, 0], x[:, 1])
        eta, deta = smooth_step(rho / m)
        unit = _radial_unit(x, rho)
        jac = eta[:, None, None] * jac + val[:, :, None] * (deta / m)[:, None, None] * unit[:, None, :]
        return eta[:, None] * val, jac

    def _base_spatial(q):
        v, _ = u.spatial(q)
        inside = np.einsum("ij,ij->i", q, q) <= u.support_radius**2
        return v * inside[:, None]

    support = min(u.support_radius + eps, 2.0 * m)
    breaks = tuple(sorted({b for b in (eps, t_end - eps, t_end + eps, *u.time_breaks) if b >= 0 and math.isfinite(b)}))
    mp = {"m": m, "base": u.to_dict(), "_static": False}
    feature = u.feature_width

    if u.separable:
        tf = u.time_factor
        static = u.time_independent

        def tau(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            out = np.empty(len(t))
            for k, tk in enumerate(t):
                lo, hi = max(-eps, tk - t_end), min(eps, tk)
                if hi <= lo:
                    out[k] = 0.0
                elif static:
                    out[k] = float(_bump1_cdf(hi / eps) - _bump1_cdf(lo / eps)) * float(tf(np.array([0.0]))[0])
                else:
                    s, w = gauss_legendre(lo, hi, p.time_nodes)
                    out[k] = float(np.dot(w * bump1(s / eps) / eps, tf(tk - s)))
            return out

        def spatial(x):
            val, jac = conv(_base_spatial, x)
            return cutoff(x, val, jac)

        return ForcingField("mollified", mp, support, t_end + eps, feature, spatial=spatial,
                            time_factor=tau, time_breaks=breaks)

    def full(x, t):
        lo, hi = max(-eps, t - t_end), min(eps, t)
        val = np.zeros((len(x), 2))
        jac = np.zeros((len(x), 2, 2))
        if hi <= lo:
            return val, jac
        s, w = gauss_legendre(lo, hi, p.time_nodes)
        ws = w * bump1(s / eps) / eps
        for sk, wk in zip(s, ws):
            v, g = conv(lambda q: u.eval(q, t - sk), x)
            val += wk * v
            jac += wk * g
        return cutoff(x, val, jac)

    return ForcingField("mollified", mp, support, t_end + eps, feature, full=full, time_breaks=breaks)


def w12_distance(u: ForcingField, v: ForcingField, T: float, quad_resolution: float | None = None,
                 time_order: int = 8) -> float:
    """``int_0^T (||u - v||_{L^2}^2 + ||grad u - grad v||_{L^2}^2) dt`` by quadrature."""
    if T <= 0:
        raise ValueError("T must be positive")
    res = quad_resolution
    if res is None:
        res = min(_default_resolution(u), _default_resolution(v))
    radius = max(u.support_radius, v.support_radius)
    if radius == 0.0:
        return 0.0
    pts, area = _space_grid(radius, res)
    ts, ws = _time_nodes(u, T, time_order, extra=v.time_breaks)
    if (u.separable or u.is_zero) and (v.separable or v.is_zero):
        # |a S - b R|^2 = a^2 <S,S> - 2ab <S,R> + b^2 <R,R>
        gram = np.zeros((2, 2))
        zero = lambda x: (np.zeros((len(x), 2)), np.zeros((len(x), 2, 2)))
        fu = zero if u.is_zero else u.spatial
        fv = zero if v.is_zero else v.spatial
        for k in range(0, len(pts), _CHUNK):
            q = pts[k:k + _CHUNK]
            mu = np.einsum("ij,ij->i", q, q) <= u.support_radius**2
            mv = np.einsum("ij,ij->i", q, q) <= v.support_radius**2
            a, ga = fu(q)
            b, gb = fv(q)
            a, ga = a * mu[:, None], ga * mu[:, None, None]
            b, gb = b * mv[:, None], gb * mv[:, None, None]
            gram[0, 0] += np.sum(a * a) + np.sum(ga * ga)
            gram[1, 1] += np.sum(b * b) + np.sum(gb * gb)
            gram[0, 1] += np.sum(a * b) + np.sum(ga * gb)
        gram *= area
        tu = np.zeros_like(ts) if u.is_zero else u.time_factor(ts) * ((ts >= 0) & (ts <= u.horizon))
        tv = np.zeros_like(ts) if v.is_zero else v.time_factor(ts) * ((ts >= 0) & (ts <= v.horizon))
        dens = tu**2 * gram[0, 0] - 2 * tu * tv * gram[0, 1] + tv**2 * gram[1, 1]
        return float(max(0.0, np.dot(ws, dens)))
    total = 0.0
    for t, w in zip(ts, ws):
        acc = 0.0
        for k in range(0, len(pts), _CHUNK):
            q = pts[k:k + _CHUNK]
            a, ga = u.eval_and_grad(q, float(t))
            b, gb = v.eval_and_grad(q, float(t))
            acc += np.sum((a - b) ** 2) + np.sum((ga - gb) ** 2)
        total += w * acc * area
    return float(total)


def perp_project(u_value, unit_tangent) -> np.ndarray:
    """Normal part ``u - (u . tau) tau``; vectorized over leading axes."""
    u = np.asarray(u_value, dtype=float)
    tau = np.asarray(unit_tangent, dtype=float)
    norm = np.linalg.norm(tau, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise ValueError("tangent must have unit length")
    return u - np.sum(u * tau, axis=-1, keepdims=True) * tau
