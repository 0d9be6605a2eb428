"""Finite-sample distributional diagnostics and risk metrics.

Exact univariate Wasserstein-2 via quantile coupling, a fixed battery of
pseudo-Lipschitz test functions compared against quadrature-evaluated reference
expectations, and the standard error/correlation summaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .priors import Prior
from .quadrature import GaussQuad, gauss_quad


@dataclass(frozen=True)
class EmpiricalSample:
    """Sorted univariate sample (or paired bivariate columns, unsorted)."""

    values: np.ndarray
    bivariate: bool = False

    @staticmethod
    def univariate(x) -> "EmpiricalSample":
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("sample must be finite")
        return EmpiricalSample(values=np.sort(x))

    @staticmethod
    def paired(x, y) -> "EmpiricalSample":
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.size != y.size or x.size == 0:
            raise ValueError("paired sample needs equal nonzero lengths")
        return EmpiricalSample(values=np.column_stack([x, y]), bivariate=True)


def w2_univariate(a: EmpiricalSample, b) -> float:
    """Exact Wasserstein-2 distance between a sorted sample and either another
    equal-size sorted sample or a quantile function (evaluated at plotting
    positions (i - 1/2)/n)."""
    if a.bivariate:
        raise ValueError("univariate sample required")
    x = a.values
    n = len(x)
    if isinstance(b, EmpiricalSample):
        if b.bivariate or len(b.values) != n:
            raise ValueError("equal-size univariate samples required")
        y = b.values
    else:
        u = (np.arange(n) + 0.5) / n
        y = np.asarray(b(u), dtype=float)
    return float(np.sqrt(np.mean((x - y) ** 2)))


_BATTERY = {
    "x": lambda x, y: x,
    "x2": lambda x, y: x * x,
    "abs_x": lambda x, y: np.abs(x),
    "xy": lambda x, y: x * y,
    "y2": lambda x, y: y * y,
    "tanh_x_y": lambda x, y: np.tanh(x) * y,
    "sq_diff": lambda x, y: (x - y) ** 2,
}
_BATTERY_R3 = {"abs_x3": lambda x, y: np.abs(x) ** 3}


@dataclass(frozen=True)
class PLBattery:
    """Fixed pseudo-Lipschitz test functions of a pair (x, y)."""

    functions: dict
    r: int = 2

    @staticmethod
    def default(r: int = 2) -> "PLBattery":
        funcs = dict(_BATTERY)
        if r >= 3:
            funcs.update(_BATTERY_R3)
        return PLBattery(functions=funcs, r=r)


def pl_battery_report(
    sample: EmpiricalSample,
    mu: float,
    sigma: float,
    prior: Prior,
    battery: PLBattery | None = None,
    quad: GaussQuad | None = None,
) -> dict:
    """Deviations |empirical mean - E psi(mu*V + sigma*G, V)| per test function.

    The sample's first column is compared against the effective observation
    mu*V + sigma*G with V ~ prior in the second column.
    """
    if not sample.bivariate:
        raise ValueError("bivariate sample required")
    b = battery or PLBattery.default()
    q = quad or gauss_quad()
    x, y = sample.values[:, 0], sample.values[:, 1]
    vv, vw = prior.nodes(q)
    xs = mu * vv[:, None] + sigma * q.nodes[None, :]
    out = {}
    for name, psi in b.functions.items():
        emp = float(np.mean(psi(x, y)))
        vals = np.broadcast_to(np.asarray(psi(xs, vv[:, None]), float), xs.shape)
        ref = float(vw @ vals @ q.weights)
        out[name] = abs(emp - ref)
    return out


def risk_metrics(estimate, truth) -> dict:
    """Per-coordinate MSE, normalized correlation, and sign-minimized variants."""
    e = np.asarray(estimate, dtype=float)
    t = np.asarray(truth, dtype=float)
    if e.shape != t.shape:
        raise ValueError("length mismatch")
    n = e.size
    mse = float(np.sum((e - t) ** 2) / n)
    mse_flip = float(np.sum((e + t) ** 2) / n)
    ne, nt = np.linalg.norm(e), np.linalg.norm(t)
    corr = float(e @ t / (ne * nt)) if ne > 0 and nt > 0 else None
    return {
        "mse": mse,
        "mse_sign_min": min(mse, mse_flip),
        "correlation": corr,
        "correlation_abs": abs(corr) if corr is not None else None,
    }
