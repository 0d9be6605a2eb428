"""Shared test helpers: independent expectation oracles and small utilities.

Oracles here deliberately avoid the library's own quadrature so reference
values come from a different code path (scipy adaptive integration or plain
Monte Carlo).
"""

import numpy as np
from scipy import integrate
from scipy.stats import norm


def gauss_oracle(f, lo: float = -12.0, hi: float = 12.0) -> float:
    """E f(G), G ~ N(0,1), by scipy adaptive quadrature."""
    val, _ = integrate.quad(lambda x: f(x) * norm.pdf(x), lo, hi, limit=400)
    return val


def mixture_gauss_oracle(f, locations, weights, sigma: float) -> float:
    """E f(V + sigma G) for discrete V independent of G ~ N(0,1)."""
    total = 0.0
    for loc, w in zip(locations, weights):
        total += w * gauss_oracle(lambda g, loc=loc: f(loc + sigma * g))
    return total


def uniform_ks_stat(p_values) -> float:
    """Kolmogorov-Smirnov statistic of a sample against Uniform(0,1)."""
    p = np.sort(np.asarray(p_values, dtype=float))
    n = len(p)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - p), np.max(p - (grid - 1.0 / n))))
