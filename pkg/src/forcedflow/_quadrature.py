"""Small quadrature helpers shared by the varifold, forcing and estimate modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    s, w = gauss_legendre_unit(order)
    return a + (b - a) * s, (b - a) * w


def composite_gauss(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with ``panels`` equal panels on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    s, w = gauss_legendre_unit(order)
    widths = np.diff(edges)
    nodes = (edges[:-1, None] + widths[:, None] * s[None, :]).ravel()
    weights = (widths[:, None] * w[None, :]).ravel()
    return nodes, weights


def pairwise_sum(values: np.ndarray) -> float:
    """Sum with a fixed reduction order (numpy's pairwise summation on a contiguous copy)."""
    return float(np.sum(np.ascontiguousarray(values, dtype=float)))
