"""Scalar denoisers: Lipschitz maps with declared weak derivatives.

A denoiser is applied componentwise to AMP iterates; its averaged weak
derivative supplies the Onsager correction. Policies bundle the rule for
producing the iteration-k denoiser from the current effective (mu_k, sigma_k).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import losses as L
from .priors import Prior, posterior_mean, posterior_mean_deriv


@dataclass(frozen=True)
class ScalarDenoiser:
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: float
    tag: str

    def __call__(self, x):
        return self.eval(x)


def soft_threshold_denoiser(t: float) -> ScalarDenoiser:
    return ScalarDenoiser(
        eval=lambda x: L.soft_threshold(t, x)[0],
        deriv=lambda x: L.soft_threshold(t, x)[1],
        lipschitz_bound=1.0,
        tag=f"soft_threshold(t={t})",
    )


def linear_denoiser(slope: float) -> ScalarDenoiser:
    return ScalarDenoiser(
        eval=lambda x: slope * np.asarray(x, dtype=float),
        deriv=lambda x: np.full_like(np.asarray(x, dtype=float), slope),
        lipschitz_bound=abs(slope),
        tag=f"linear(slope={slope})",
    )


def posterior_mean_denoiser(prior: Prior, mu: float, sigma: float) -> ScalarDenoiser:
    """Bayes-optimal denoiser y -> E(V | mu V + sigma G = y)."""
    grid = np.linspace(-12.0, 12.0, 4001) * max(sigma, 1e-3)
    lip = float(np.max(posterior_mean_deriv(prior, mu, sigma, grid))) if sigma > 0 else np.inf
    return ScalarDenoiser(
        eval=lambda y: posterior_mean(prior, mu, sigma, y),
        deriv=lambda y: posterior_mean_deriv(prior, mu, sigma, y),
        lipschitz_bound=lip,
        tag=f"posterior_mean(mu={mu}, sigma={sigma})",
    )


def tanh_denoiser(mu: float, sigma: float) -> ScalarDenoiser:
    """Posterior mean for the uniform {-1,+1} prior: y -> tanh(mu y / sigma^2)."""
    a = mu / sigma**2
    return ScalarDenoiser(
        eval=lambda y: np.tanh(a * np.asarray(y, dtype=float)),
        deriv=lambda y: a / np.cosh(a * np.asarray(y, dtype=float)) ** 2,
        lipschitz_bound=abs(a),
        tag=f"tanh(mu={mu}, sigma={sigma})",
    )


def prox_denoiser(loss: L.Loss, eta: float) -> ScalarDenoiser:
    return ScalarDenoiser(
        eval=lambda z: L.prox(loss, eta, z),
        deriv=lambda z: L.prox_deriv(loss, eta, z),
        lipschitz_bound=1.0,
        tag=f"prox({loss.kind}, eta={eta})",
    )


def score_denoiser(loss: L.Loss, eta: float) -> ScalarDenoiser:
    return ScalarDenoiser(
        eval=lambda z: L.moreau_score(loss, eta, z)[0],
        deriv=lambda z: L.moreau_score(loss, eta, z)[1],
        lipschitz_bound=1.0,
        tag=f"score({loss.kind}, eta={eta})",
    )


@dataclass(frozen=True)
class DenoiserPolicy:
    """Rule mapping iteration state (k, mu_k, sigma_k, lambda) to a denoiser.

    kinds:
      bayes          - posterior mean for ``prior`` at the current (mu, sigma)
      soft_threshold - thresholds from ``schedule`` (callable of (k, sigma) or
                       explicit sequence); default t_k = 2 sigma_k
      power_linear   - g_k(x) = x / sqrt(1 + mu_k^2), the normalized identity
                       making AMP match power iteration
      custom         - explicit denoiser sequence
    """

    kind: str
    prior: Prior | None = None
    schedule: Sequence[float] | Callable[[int, float], float] | None = None
    sequence: Sequence[ScalarDenoiser] | None = None

    def make(self, k: int, mu: float, sigma: float) -> ScalarDenoiser:
        if self.kind == "bayes":
            if (
                self.prior.kind == "discrete"
                and len(self.prior.locations) == 2
                and set(np.round(self.prior.locations, 12)) == {-1.0, 1.0}
                and np.allclose(self.prior.weights, 0.5)
            ):
                return tanh_denoiser(mu, sigma)
            return posterior_mean_denoiser(self.prior, mu, sigma)
        if self.kind == "soft_threshold":
            if callable(self.schedule):
                t = float(self.schedule(k, sigma))
            elif self.schedule is not None:
                t = float(self.schedule[k])
            else:
                t = 2.0 * sigma
            return soft_threshold_denoiser(t)
        if self.kind == "power_linear":
            return linear_denoiser(1.0 / np.sqrt(1.0 + mu * mu))
        if self.kind == "custom":
            return self.sequence[k]
        raise ValueError(f"unknown policy kind {self.kind!r}")


def bayes_policy(prior: Prior) -> DenoiserPolicy:
    return DenoiserPolicy(kind="bayes", prior=prior)


def soft_threshold_policy(schedule=None) -> DenoiserPolicy:
    return DenoiserPolicy(kind="soft_threshold", schedule=schedule)


def power_linear_policy() -> DenoiserPolicy:
    return DenoiserPolicy(kind="power_linear")


def custom_policy(sequence: Sequence[ScalarDenoiser]) -> DenoiserPolicy:
    return DenoiserPolicy(kind="custom", sequence=sequence)
