"""Small quadrature toolkit: composite Gauss-Legendre panels and friends."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(m)
    return x, w


@lru_cache(maxsize=None)
def gauss_jacobi(m: int, alpha: float, beta: float):
    return roots_jacobi(m, alpha, beta)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


def panels(breaks, m: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite m-point Gauss-Legendre rule on consecutive breakpoints."""
    b = np.asarray(breaks, float)
    x, w = gauss_legendre(m)
    a, c = b[:-1, None], b[1:, None]
    half = 0.5 * (c - a)
    nodes = (0.5 * (a + c) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def geometric_breaks(lo: float, hi: float, per_decade: int, include_zero: bool = True,
                     extra=()) -> np.ndarray:
    """Breakpoints geometric on [lo, hi] (optionally starting with 0) plus extras."""
    n = max(1, int(math.ceil(math.log10(hi / lo) * per_decade)))
    b = np.geomspace(lo, hi, n + 1)
    if include_zero:
        b = np.concatenate([[0.0], b])
    ex = [e for e in extra if (0 < e < hi)]
    if ex:
        b = np.unique(np.concatenate([b, ex]))
    return b


def uniform_breaks(lo: float, hi: float, width: float) -> np.ndarray:
    n = max(1, int(math.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, n + 1)


def power_tail(r: np.ndarray, f: np.ndarray, npts: int = 4):
    """Fit ``|f| ~ C r^-alpha`` on the last nodes; return (alpha, tail integral).

    The tail integral is ``int_R^inf C r^-alpha dr = R f(R) / (alpha - 1)`` and
    is ``inf`` when ``alpha <= 1``.
    """
    rr, ff = np.asarray(r[-npts:], float), np.abs(np.asarray(f[-npts:]))
    if np.all(ff == 0):
        return math.inf, 0.0
    ff = np.maximum(ff, 1e-300)
    slope = np.polyfit(np.log(rr), np.log(ff), 1)[0]
    alpha = -slope
    if alpha <= 1.0:
        return alpha, math.inf
    return alpha, float(rr[-1] * ff[-1] / (alpha - 1.0))


def kahan_sum(values) -> float | complex:
    """Compensated summation in a fixed order (deterministic)."""
    s = 0.0
    c = 0.0
    for v in values:
        y = v - c
        t = s + y
        c = (t - s) - y
        s = t
    return s
