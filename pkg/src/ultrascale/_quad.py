"""Vectorised quadrature helpers."""
from __future__ import annotations

import numpy as np


class QuadratureError(RuntimeError):
    pass


def simpson(g, a: float, b: float, rtol: float = 1e-8, atol: float = 0.0,
            min_level: int = 3, max_level: int = 16, accept_rtol: float | None = None):
    """Composite Simpson rule on [a, b] with panel doubling.

    ``g`` maps a 1-d array of nodes to an array of shape ``(len(nodes), ...)``
    so that a whole batch of integrands is refined together. Refinement stops
    once every batch entry changes by less than ``rtol`` (relative) between
    successive levels. When the finest level is reached, the result is still
    accepted if the last change is within ``accept_rtol``.
    """
    prev = None
    for level in range(min_level, max_level + 1):
        n = 2 ** level
        y = np.linspace(a, b, n + 1)
        vals = np.asarray(g(y), dtype=float)
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= (b - a) / (3 * n)
        cur = np.tensordot(w, vals, axes=(0, 0))
        if prev is not None:
            err = np.abs(cur - prev)
            if np.all(err <= rtol * np.abs(cur) + atol):
                return cur
        prev = cur
    if accept_rtol is not None and np.all(err <= accept_rtol * np.abs(cur) + atol):
        return cur
    raise QuadratureError(f"Simpson rule did not reach rtol={rtol} on [{a}, {b}]")


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Trapezoid weights for a sorted, possibly non-uniform node set."""
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    if x.size < 2:
        return w
    d = np.diff(x)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def log_integral(log_f: np.ndarray, weights: np.ndarray) -> float:
    """log of sum(weights * exp(log_f)) computed without overflow."""
    log_f = np.asarray(log_f, dtype=float)
    mask = (weights > 0) & np.isfinite(log_f)
    if not np.any(mask):
        return -np.inf
    lf = log_f[mask] + np.log(weights[mask])
    m = lf.max()
    return float(m + np.log(np.sum(np.exp(lf - m))))
