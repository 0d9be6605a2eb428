"""Convex scalar losses, proximal operators, and Moreau-envelope scores.

prox_{eta M}(z) = argmin_t { eta M(t) + (t - z)^2 / 2 }. The score
S_eta(z) = z - prox_{eta M}(z) is nondecreasing and 1-Lipschitz. Closed forms
are used wherever available; the smooth losses (logistic zeta, pseudo-Huber)
use a safeguarded Newton solve on the prox first-order condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NEWTON_MAX = 200
_NEWTON_TOL = 1e-12


@dataclass(frozen=True)
class Loss:
    kind: str  # square | absolute | huber | pseudo_huber | logistic_zeta | quantile
    b: float | None = None  # Huber/pseudo-Huber scale
    tau: float | None = None  # quantile level

    def __post_init__(self):
        if self.kind in ("huber", "pseudo_huber") and not (self.b and self.b > 0):
            raise ValueError("Huber-type losses need b > 0")
        if self.kind == "quantile" and not (self.tau and 0 < self.tau < 1):
            raise ValueError("quantile level must be in (0,1)")

    def value(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "square":
            return 0.5 * w * w
        if self.kind == "absolute":
            return np.abs(w)
        if self.kind == "huber":
            aw = np.abs(w)
            return np.where(aw <= self.b, w * w, (2 * aw - self.b) * self.b)
        if self.kind == "pseudo_huber":
            return self.b**2 * (np.sqrt(1 + (w / self.b) ** 2) - 1)
        if self.kind == "logistic_zeta":
            return np.logaddexp(0.0, w)
        if self.kind == "quantile":
            return np.where(w >= 0, self.tau * w, (self.tau - 1) * w)
        raise ValueError(self.kind)

    def derivative(self, w):
        """M'(w) where defined (kinks use a subgradient representative)."""
        w = np.asarray(w, dtype=float)
        if self.kind == "square":
            return w
        if self.kind == "absolute":
            return np.sign(w)
        if self.kind == "huber":
            return np.where(np.abs(w) <= self.b, 2 * w, 2 * self.b * np.sign(w))
        if self.kind == "pseudo_huber":
            return w / np.sqrt(1 + (w / self.b) ** 2)
        if self.kind == "logistic_zeta":
            return _sigmoid(w)
        if self.kind == "quantile":
            return np.where(w >= 0, self.tau, self.tau - 1.0)
        raise ValueError(self.kind)


SQUARE = Loss("square")
ABSOLUTE = Loss("absolute")
LOGISTIC_ZETA = Loss("logistic_zeta")


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))  # never overflows
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def soft_threshold(t: float, x):
    """(value, weak derivative) of ST_t(x) = sgn(x)(|x|-t)_+.

    The weak derivative is 1 on {|x| > t} and 0 elsewhere, including the
    boundary |x| = t, matching the support-counting Onsager convention.
    """
    if t <= 0:
        raise ValueError("threshold must be positive")
    x = np.asarray(x, dtype=float)
    value = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    deriv = (np.abs(x) > t).astype(float)
    return value, deriv


def _prox_newton(loss: Loss, eta: float, z: np.ndarray) -> np.ndarray:
    """Solve t - z + eta M'(t) = 0 for smooth convex M, elementwise."""

    def second(t):
        if loss.kind == "logistic_zeta":
            s = _sigmoid(t)
            return s * (1.0 - s)
        if loss.kind == "pseudo_huber":
            return loss.b**3 / (loss.b**2 + t * t) ** 1.5
        raise ValueError(loss.kind)

    z = np.asarray(z, dtype=float)
    zf = z.ravel()
    t = zf.copy()
    # Bisection safeguard brackets: M' monotone, so the root lies between z
    # shifted by the extreme slopes. Converged entries drop out of the active
    # set so a few slow entries do not force full-array iterations.
    dmax = float(np.max(np.abs(loss.derivative(np.array([-1e12, 0.0, 1e12]))))) + 1.0
    lo = zf - eta * dmax
    hi = zf + eta * dmax
    # Last accepted step size per entry; a Newton step must at least halve it
    # or the entry falls back to bisection (guards against cycling across a
    # flat stretch of the derivative).
    dt = hi - lo
    active = np.arange(t.size)
    eps = np.finfo(float).eps
    for _ in range(_NEWTON_MAX):
        ta = t[active]
        f = ta - zf[active] + eta * loss.derivative(ta)
        # An entry is done when its residual is below tolerance or its
        # safeguard bracket has collapsed to rounding width (the residual
        # itself can then no longer be computed more accurately).
        width_tol = 4.0 * eps * (1.0 + np.abs(lo[active]) + np.abs(hi[active]))
        live = (np.abs(f) >= _NEWTON_TOL) & (hi[active] - lo[active] > width_tol)
        if not live.all():
            active = active[live]
            if active.size == 0:
                return t.reshape(z.shape)
            ta = ta[live]
            f = f[live]
        la = np.where(f < 0, ta, lo[active])
        ha = np.where(f > 0, ta, hi[active])
        step = f / (1.0 + eta * second(ta))
        t_new = ta - step
        bisect = (t_new <= la) | (t_new >= ha) | (2.0 * np.abs(step) > dt[active])
        t[active] = np.where(bisect, 0.5 * (la + ha), t_new)
        dt[active] = np.where(bisect, 0.5 * (ha - la), np.abs(step))
        lo[active] = la
        hi[active] = ha
    f = t - zf + eta * loss.derivative(t)
    width_tol = 4.0 * eps * (1.0 + np.abs(lo) + np.abs(hi))
    if np.any((np.abs(f) >= _NEWTON_TOL) & (hi - lo > width_tol)):
        raise RuntimeError("prox Newton solve failed to converge")
    return t.reshape(z.shape)


def prox(loss: Loss, eta: float, z):
    """prox_{eta M}(z), elementwise over z."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    z = np.asarray(z, dtype=float)
    if loss.kind == "square":
        return z / (1.0 + eta)
    if loss.kind == "absolute":
        return soft_threshold(eta, z)[0]
    if loss.kind == "huber":
        b = loss.b
        inner = z / (1.0 + 2.0 * eta)
        outer = z - 2.0 * eta * b * np.sign(z)
        return np.where(np.abs(z) <= b * (1.0 + 2.0 * eta), inner, outer)
    if loss.kind == "quantile":
        tau = loss.tau
        hi = z - eta * tau
        lo = z + eta * (1.0 - tau)
        return np.where(z > eta * tau, hi, np.where(z < -eta * (1.0 - tau), lo, 0.0))
    return _prox_newton(loss, eta, z)


def _prox_deriv_at(loss: Loss, eta: float, z, p):
    """prox derivative given the already-computed prox value p."""
    if loss.kind == "square":
        return np.full_like(z, 1.0 / (1.0 + eta))
    if loss.kind == "absolute":
        return (np.abs(z) > eta).astype(float)
    if loss.kind == "huber":
        return np.where(np.abs(z) <= loss.b * (1.0 + 2.0 * eta), 1.0 / (1.0 + 2.0 * eta), 1.0)
    if loss.kind == "quantile":
        return ((z > eta * loss.tau) | (z < -eta * (1.0 - loss.tau))).astype(float)
    if loss.kind == "logistic_zeta":
        s = _sigmoid(p)
        return 1.0 / (1.0 + eta * s * (1.0 - s))
    if loss.kind == "pseudo_huber":
        return 1.0 / (1.0 + eta * loss.b**3 / (loss.b**2 + p * p) ** 1.5)
    raise ValueError(loss.kind)


def prox_deriv(loss: Loss, eta: float, z):
    """d/dz prox_{eta M}(z) = 1 / (1 + eta M''(prox)), elementwise."""
    z = np.asarray(z, dtype=float)
    if loss.kind in ("logistic_zeta", "pseudo_huber"):
        p = prox(loss, eta, z)
    else:
        p = None
    return _prox_deriv_at(loss, eta, z, p)


def moreau_score(loss: Loss, eta: float, z):
    """(S_eta(z), S_eta'(z)) with S_eta(z) = z - prox_{eta M}(z)."""
    z = np.asarray(z, dtype=float)
    p = prox(loss, eta, z)
    return z - p, 1.0 - _prox_deriv_at(loss, eta, z, p)
