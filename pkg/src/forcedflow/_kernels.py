"""Radial profiles: cutoffs, mollifier bumps and the truncated Gaussian."""

from __future__ import annotations

import math

import numpy as np

# (1 - s^2)^4 on [-1, 1]
BUMP1_NORM = 315.0 / 256.0
# (1 - |z|^2)^4 on the unit disk
BUMP2_NORM = 5.0 / math.pi

GAUSS_CUT = 6.0
_GAUSS_MASS = 1.0 - math.exp(-0.5 * GAUSS_CUT**2)


def plateau(rho, inner: float, outer: float):
    """C^1 radial cutoff: 1 on [0, inner], (1 - s^2)^4 with s = (rho-inner)/(outer-inner), 0 beyond.

    Returns ``(value, derivative)`` with respect to ``rho``.
    """
    rho = np.asarray(rho, dtype=float)
    width = outer - inner
    s = np.clip((rho - inner) / width, 0.0, 1.0)
    q = 1.0 - s * s
    val = q**4
    der = np.where((s > 0) & (s < 1), -8.0 * s * q**3 / width, 0.0)
    return val, der


def plateau_second(rho, inner: float, outer: float):
    rho = np.asarray(rho, dtype=float)
    width = outer - inner
    s = np.clip((rho - inner) / width, 0.0, 1.0)
    q = 1.0 - s * s
    return np.where((s > 0) & (s < 1), (-8.0 * q**3 + 48.0 * s * s * q**2) / width**2, 0.0)


def bump1(s):
    """Normalized 1-d kernel (1 - s^2)^4 on [-1, 1]."""
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, BUMP1_NORM * (1.0 - s * s) ** 4, 0.0)


def bump2(r2):
    """Normalized 2-d kernel (1 - |z|^2)^4 on the unit disk, as a function of |z|^2."""
    r2 = np.asarray(r2, dtype=float)
    return np.where(r2 < 1.0, BUMP2_NORM * (1.0 - r2) ** 4, 0.0)


def bump2_grad_factor(r2):
    """d/dz of bump2 equals ``factor * z``."""
    r2 = np.asarray(r2, dtype=float)
    return np.where(r2 < 1.0, -8.0 * BUMP2_NORM * (1.0 - r2) ** 3, 0.0)


def smooth_step(s):
    """C-infinity function equal to 1 for s <= 1 and 0 for s >= 2, with its derivative."""
    s = np.asarray(s, dtype=float)
    x = np.clip(s - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x < 1.0, np.exp(-1.0 / np.where(x < 1.0, 1.0 - x, 1.0)), 0.0)
        b = np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)
        val = a / (a + b)
        da = np.where(x < 1.0, a / np.where(x < 1.0, (1.0 - x) ** 2, 1.0), 0.0)
        db = np.where(x > 0.0, b / np.where(x > 0.0, x * x, 1.0), 0.0)
    der = ((-da) * b - a * db) / (a + b) ** 2
    der = np.where((x > 0) & (x < 1), der, 0.0)
    return val, der


def truncated_gaussian(z2, eps: float):
    """2-d Gaussian of width ``eps`` cut at ``GAUSS_CUT * eps`` and renormalized (argument |z|^2)."""
    z2 = np.asarray(z2, dtype=float)
    inside = z2 < (GAUSS_CUT * eps) ** 2
    norm = 1.0 / (2.0 * math.pi * eps * eps * _GAUSS_MASS)
    return np.where(inside, norm * np.exp(-0.5 * z2 / (eps * eps)), 0.0)
