"""Scalar priors with posterior-mean and MMSE queries.

A prior is either a finite discrete distribution or a finite Gaussian mixture.
Posterior means are for the observation channel Y = mu*V + sigma*G with
G ~ N(0,1) independent of V; they are evaluated with log-sum-exp weights so
widely separated atoms stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import GaussQuad, gauss_quad

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Prior:
    """Finite discrete prior or finite Gaussian mixture.

    Discrete: ``locations``/``weights``. Mixture: ``means``/``sds``/``weights``.
    """

    kind: str  # "discrete" | "gauss_mixture"
    weights: np.ndarray
    locations: np.ndarray | None = None
    means: np.ndarray | None = None
    sds: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must sum to 1")
        if self.kind == "discrete":
            loc = np.asarray(self.locations, dtype=float)
            if len(np.unique(loc)) != len(loc):
                raise ValueError("discrete atoms must be distinct")
            object.__setattr__(self, "locations", loc)
        elif self.kind == "gauss_mixture":
            m = np.asarray(self.means, dtype=float)
            s = np.asarray(self.sds, dtype=float)
            if np.any(s < 0):
                raise ValueError("component sds must be nonnegative")
            object.__setattr__(self, "means", m)
            object.__setattr__(self, "sds", s)
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    # -- moments -----------------------------------------------------------
    @property
    def m1(self) -> float:
        if self.kind == "discrete":
            return float(self.locations @ self.weights)
        return float(self.means @ self.weights)

    @property
    def m2(self) -> float:
        if self.kind == "discrete":
            return float((self.locations**2) @ self.weights)
        return float((self.means**2 + self.sds**2) @ self.weights)

    @property
    def var(self) -> float:
        return self.m2 - self.m1**2

    # -- quadrature support ------------------------------------------------
    def nodes(self, quad: GaussQuad | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(values, weights) whose weighted sums approximate E f(V).

        Exact for discrete priors; per-component Gauss-Hermite for mixtures.
        """
        if self.kind == "discrete":
            return self.locations, self.weights
        q = quad or gauss_quad()
        vals = (self.means[:, None] + self.sds[:, None] * q.nodes[None, :]).ravel()
        wts = (self.weights[:, None] * q.weights[None, :]).ravel()
        return vals, wts

    def expect(self, f, quad: GaussQuad | None = None) -> float:
        vals, wts = self.nodes(quad)
        return float(np.asarray(f(vals), dtype=float) @ wts)

    def sample(self, size: int, gen: np.random.Generator) -> np.ndarray:
        """Draw i.i.d. values from the prior."""
        if self.kind == "discrete":
            return gen.choice(self.locations, size=size, p=self.weights)
        idx = gen.choice(len(self.weights), size=size, p=self.weights)
        return self.means[idx] + self.sds[idx] * gen.standard_normal(size)

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "discrete":
            return {
                "kind": "discrete",
                "atoms": [[float(x), float(w)] for x, w in zip(self.locations, self.weights)],
            }
        return {
            "kind": "gauss_mixture",
            "components": [
                [float(m), float(s), float(w)]
                for m, s, w in zip(self.means, self.sds, self.weights)
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "Prior":
        if obj["kind"] == "discrete":
            atoms = np.asarray(obj["atoms"], dtype=float)
            return discrete_prior(atoms[:, 0], atoms[:, 1])
        comps = np.asarray(obj["components"], dtype=float)
        return gauss_mixture_prior(comps[:, 0], comps[:, 1], comps[:, 2])


def discrete_prior(locations, weights) -> Prior:
    return Prior(kind="discrete", weights=np.asarray(weights, float),
                 locations=np.asarray(locations, float))


def gauss_mixture_prior(means, sds, weights) -> Prior:
    return Prior(kind="gauss_mixture", weights=np.asarray(weights, float),
                 means=np.asarray(means, float), sds=np.asarray(sds, float))


def rademacher_prior() -> Prior:
    """Uniform on {-1, +1}."""
    return discrete_prior([-1.0, 1.0], [0.5, 0.5])


def three_point_prior(eps: float, c: float) -> Prior:
    """Mass 1-eps at 0 and eps/2 at each of +-c."""
    return discrete_prior([-c, 0.0, c], [eps / 2, 1 - eps, eps / 2])


def _logphi(z: np.ndarray) -> np.ndarray:
    return -0.5 * z * z - 0.5 * np.log(2.0 * np.pi)


def _posterior_weights_discrete(prior: Prior, mu: float, sigma: float, y: np.ndarray):
    """Normalized posterior atom weights, shape (..., n_atoms)."""
    y = np.asarray(y, dtype=float)
    z = (y[..., None] - mu * prior.locations) / sigma
    logw = np.log(prior.weights) + _logphi(z)
    logw -= np.max(logw, axis=-1, keepdims=True)
    w = np.exp(logw)
    w /= np.sum(w, axis=-1, keepdims=True)
    return w


def posterior_moments(prior: Prior, mu: float, sigma: float, y):
    """(E[V|y], E[V^2|y]) for Y = mu*V + sigma*G, vectorized over y."""
    if mu == 0.0 and sigma == 0.0:
        raise ValueError("mu and sigma cannot both be zero")
    y = np.asarray(y, dtype=float)
    if sigma == 0.0:
        if prior.kind == "discrete":
            lo, hi = float(prior.locations.min()), float(prior.locations.max())
            v = np.clip(y / mu, lo, hi)
        else:
            v = y / mu
        return v, v * v
    if mu == 0.0:
        m1, m2 = prior.m1, prior.m2
        return np.full_like(y, m1), np.full_like(y, m2)
    if prior.kind == "discrete":
        w = _posterior_weights_discrete(prior, mu, sigma, y)
        ev = w @ prior.locations
        ev2 = w @ (prior.locations**2)
        return ev, ev2
    # Gaussian mixture: conjugate update per component.
    m, s, pw = prior.means, prior.sds, prior.weights
    tot_var = mu * mu * s * s + sigma * sigma  # marginal variance of y per component
    z = (y[..., None] - mu * m) / np.sqrt(tot_var)
    logw = np.log(pw) + _logphi(z) - 0.5 * np.log(tot_var)
    logw -= np.max(logw, axis=-1, keepdims=True)
    w = np.exp(logw)
    w /= np.sum(w, axis=-1, keepdims=True)
    post_var = (s * s * sigma * sigma) / tot_var
    post_mean = m + (mu * s * s) * (y[..., None] - mu * m) / tot_var
    ev = np.sum(w * post_mean, axis=-1)
    ev2 = np.sum(w * (post_var + post_mean**2), axis=-1)
    return ev, ev2


def posterior_mean(prior: Prior, mu: float, sigma: float, y):
    """E(V | mu*V + sigma*G = y); vectorized over y."""
    return posterior_moments(prior, mu, sigma, y)[0]


def posterior_mean_deriv(prior: Prior, mu: float, sigma: float, y):
    """d/dy E(V|y) = (mu/sigma^2) Var(V|y); vectorized over y."""
    if sigma == 0.0:
        raise ValueError("derivative undefined at sigma = 0")
    ev, ev2 = posterior_moments(prior, mu, sigma, y)
    return (mu / sigma**2) * (ev2 - ev * ev)


def mmse(prior: Prior, rho: float, quad: GaussQuad | None = None) -> float:
    """E{(V - E(V | sqrt(rho) V + G))^2}; mmse(0) = Var(V), mmse(inf) = 0."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if np.isinf(rho):
        return 0.0
    if rho == 0.0:
        return prior.var
    q = quad or gauss_quad()
    sr = np.sqrt(rho)
    vvals, vwts = prior.nodes(q)
    y = sr * vvals[:, None] + q.nodes[None, :]
    ev = posterior_mean(prior, sr, 1.0, y.ravel()).reshape(y.shape)
    second = float(vwts @ (ev * ev) @ q.weights)
    return max(prior.m2 - second, 0.0)
