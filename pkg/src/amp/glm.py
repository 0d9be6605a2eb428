"""GAMP for generalized linear models with calibrated instantiations.

The generic driver alternates an observation channel g_k(theta, y) with a
signal channel f_{k+1}, each carrying its own Onsager correction. On top of it
sit three calibrated stationary recursions (ell_1-penalized regression, convex
M-estimation, logistic maximum likelihood) together with reference convex
solvers that serve as oracles for their fixed points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses as L
from .core import AmpRun, OnsagerMode, EMPIRICAL, _check_finite
from .ensembles import GaussianDesign, RngStream, sample_design
from .priors import Prior
from .se import (
    FixedPoint,
    Link,
    NoiseDist,
    _zeta_prime,
    lasso_calibration,
    lasso_schedule,
    logistic_fixed_point,
    mest_fixed_point,
)


@dataclass(frozen=True)
class GlmInstance:
    """One sampled regression problem y = h(X beta, eps) rowwise."""

    X: GaussianDesign
    beta: np.ndarray
    epsilon: np.ndarray
    y: np.ndarray
    link: Link

    @property
    def delta(self) -> float:
        return self.X.delta


@dataclass(frozen=True)
class EstimatorResult:
    """Reference-solver output with convergence diagnostics.

    ``status`` is "ok" or "nonexistent" (logistic MLE on separable data); the
    KKT/subgradient residual is reported even when not converged.
    """

    beta_hat: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    status: str = "ok"


def sample_glm(prior: Prior, link: Link, n: int, p: int, rng: RngStream,
               draw_index: int = 0) -> GlmInstance:
    """Draw X (i.i.d. N(0,1/n)), beta ~ prior, eps per the link, y = h(X beta, eps)."""
    X = sample_design(n, p, rng, draw_index=draw_index)
    gen = rng.generator(draw_index=draw_index + 1_000_000)
    beta = prior.sample(p, gen)
    if link.kind == "logistic":
        eps = gen.uniform(size=n)
    elif link.noise is not None:
        eps = link.noise.sample(n, gen)
    else:
        eps = np.zeros(n)
    z = X.entries @ beta
    y = link.apply(z, eps)
    return GlmInstance(X=X, beta=beta, epsilon=eps, y=y, link=link)


def run_gamp(instance: GlmInstance, g_seq, f_seq, init, K: int,
             mode: OnsagerMode = EMPIRICAL) -> AmpRun:
    """Generic GAMP driver:

      theta^k = X bhat^k - b_k rhat^{k-1},   rhat^k = g_k(theta^k, y),
      c_k = n^{-1} sum_i g_k'(theta_i^k, y_i),
      beta^{k+1} = X^T rhat^k - c_k bhat^k,  bhat^{k+1} = f_{k+1}(beta^{k+1}),
      b_{k+1} = n^{-1} sum_j f_{k+1}'(beta_j^{k+1})

    with rhat^{-1} = 0 and ``init = (bhat0, b0)``. ``g_seq[k]`` is a
    (g, dg/dtheta) pair of (theta, y); ``f_seq[k]`` is a ScalarDenoiser or an
    (f, fprime) pair of the single argument beta^{k+1}.
    """
    X = instance.X.entries
    n, p = X.shape
    y = instance.y
    bhat, b = np.asarray(init[0], dtype=float), float(init[1])
    rhat_prev = np.zeros(n)
    run = AmpRun(side_info={"beta": instance.beta, "delta": n / p, "y": y})
    run.record("beta_hat", bhat)
    for k in range(K):
        theta = X @ bhat - b * rhat_prev
        _check_finite(theta, k, "theta")
        g, dg = g_seq[k] if isinstance(g_seq[k], tuple) else (g_seq[k].eval, g_seq[k].deriv)
        rhat = np.asarray(g(theta, y), dtype=float)
        if mode.kind == "empirical":
            c = float(np.sum(dg(theta, y)) / n)
        elif mode.kind == "deterministic":
            c = float(mode.se_path.extras["cbar"][k])
        else:
            c = 0.0
        beta_raw = X.T @ rhat - c * bhat
        _check_finite(beta_raw, k, "beta")
        f, fp = (
            f_seq[k] if isinstance(f_seq[k], tuple) else (f_seq[k].eval, f_seq[k].deriv)
        )
        bhat_next = np.asarray(f(beta_raw), dtype=float)
        if mode.kind == "empirical":
            b = float(np.sum(fp(beta_raw)) / n)
        elif mode.kind == "deterministic":
            b = float(mode.se_path.bbar[k + 1])
        else:
            b = 0.0
        run.record("theta", theta)
        run.record("rhat", rhat)
        run.record("beta", beta_raw)
        run.record("beta_hat", bhat_next)
        run.record_onsager("c", c)
        run.record_onsager("b", b)
        bhat, rhat_prev = bhat_next, rhat
    return run


def gamp_se_estimates(run: AmpRun, k: int, m2_beta: float):
    """(mu_hat_k, sigma_hat_k) from iterate norms:

    mu_hat_k = (||beta^k||_p^2 - ||rhat^{k-1}||_n^2)_+^{1/2} / E(beta^2)^{1/2},
    sigma_hat_k = ||rhat^{k-1}||_n, with ||x||_m^2 = ||x||^2 / m.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if m2_beta <= 0:
        raise ValueError("m2_beta must be positive")
    beta_k = run.iterates["beta"][k - 1]
    rhat_prev = run.iterates["rhat"][k - 1]
    p, n = len(beta_k), len(rhat_prev)
    sigma_hat = float(np.linalg.norm(rhat_prev) / np.sqrt(n))
    mu_hat = float(np.sqrt(max(beta_k @ beta_k / p - sigma_hat**2, 0.0) / m2_beta))
    return mu_hat, sigma_hat


# ---------------------------------------------------------------------------
# Lasso
# ---------------------------------------------------------------------------


def lasso_amp(instance: GlmInstance, lam: float, prior: Prior, sigma: float, K: int,
              stationary: bool = True, rng: RngStream | None = None,
              calibration: FixedPoint | None = None) -> AmpRun:
    """AMP for the ell_1-penalized linear model.

    Stationary mode runs rhat^k = y - X bhat^k + b~* rhat^{k-1},
    bhat^{k+1} = ST_{t*}(X^T rhat^k + bhat^k) from the simulation-only oracle
    initializer bhat^0 = ST_{t*}(beta + sigma* xi). Zero-init mode uses the
    deterministic threshold schedule t_{k+1} = lam + b~_k t_k instead.
    """
    X = instance.X.entries
    n, p = X.shape
    y = instance.y
    delta = n / p
    fp = calibration or lasso_calibration(lam, delta, sigma, prior)
    run = AmpRun(side_info={"beta": instance.beta, "delta": delta, "y": y,
                            "calibration": fp})
    if stationary:
        if rng is None:
            raise ValueError("stationary mode needs an RngStream for the oracle init")
        xi = rng.generator(draw_index=3_000_000).standard_normal(p)
        bhat = L.soft_threshold(fp.t_star, instance.beta + fp.sigma_star * xi)[0]
        t_seq = np.full(K + 1, fp.t_star)
        bt_seq = np.full(K + 1, fp.b_tilde_star)
    else:
        bhat = np.zeros(p)
        sig, t_seq, bt_seq = lasso_schedule(prior, delta, sigma, lam, K + 1)
        run.side_info["sigma_schedule"] = sig
    run.side_info["t_schedule"] = t_seq
    rhat_prev = np.zeros(n)
    run.record("beta_hat", bhat)
    for k in range(K):
        bt = bt_seq[k] if stationary else (bt_seq[k] if k >= 1 else 0.0)
        rhat = y - X @ bhat + bt * rhat_prev
        _check_finite(rhat, k, "rhat")
        t = t_seq[k + 1] if not stationary else fp.t_star
        bhat_next = L.soft_threshold(t, X.T @ rhat + bhat)[0]
        run.record("rhat", rhat)
        run.record("beta_hat", bhat_next)
        run.record_onsager("b_tilde", bt)
        bhat, rhat_prev = bhat_next, rhat
    return run


def lasso_reference(X, y, lam: float, tol: float = 1e-8,
                    max_sweeps: int = 100_000) -> EstimatorResult:
    """Cyclic coordinate descent on (1/2)||y - X b||^2 + lam ||b||_1.

    Stops when the KKT residual max_j dist(X_j^T(y - X b), lam d|b_j|) drops
    below ``tol``; a sweep-limit hit returns a non-converged result with the
    residual still reported.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    colsq = np.einsum("ij,ij->j", X, X)
    beta = np.zeros(p)
    r = y.copy()
    sweeps = 0
    kkt = np.inf
    for sweeps in range(1, max_sweeps + 1):
        for j in range(p):
            if colsq[j] == 0.0:
                continue
            rho = X[:, j] @ r + colsq[j] * beta[j]
            new = float(L.soft_threshold(lam, np.atleast_1d(rho))[0][0]) / colsq[j]
            if new != beta[j]:
                r -= (new - beta[j]) * X[:, j]
                beta[j] = new
        grad = X.T @ r
        kkt = float(
            np.max(
                np.where(
                    beta != 0.0,
                    np.abs(grad - lam * np.sign(beta)),
                    np.maximum(np.abs(grad) - lam, 0.0),
                )
            )
        )
        if kkt < tol:
            break
    obj = float(0.5 * r @ r + lam * np.sum(np.abs(beta)))
    return EstimatorResult(
        beta_hat=beta,
        objective=obj,
        kkt_residual=kkt,
        iterations=sweeps,
        converged=kkt < tol,
    )


def lasso_kkt_residual(X, y, beta, lam: float) -> float:
    """Subgradient residual of the ell_1 objective at ``beta``."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(y, dtype=float) - X @ beta
    grad = X.T @ r
    return float(
        np.max(
            np.where(
                beta != 0.0,
                np.abs(grad - lam * np.sign(beta)),
                np.maximum(np.abs(grad) - lam, 0.0),
            )
        )
    )


# ---------------------------------------------------------------------------
# M-estimation
# ---------------------------------------------------------------------------


def mest_amp(instance: GlmInstance, loss: L.Loss, noise: NoiseDist, K: int,
             rng: RngStream | None = None,
             fixed_point: FixedPoint | None = None) -> AmpRun:
    """Stationary AMP for the M-estimator argmin sum_i M(y_i - x_i^T b):

      bhat^{k+1} = X^T S_{b*}(rhat^k) + bhat^k,
      rhat^{k+1} = y - X bhat^{k+1} + S_{b*}(rhat^k),

    with the Moreau score S and the Onsager scale b* from the fixed-point
    solver, started from the simulation-only oracle bhat^0 = beta + sqrt(delta)
    tau* xi and rhat^0 = y - X bhat^0.
    """
    if rng is None:
        raise ValueError("oracle initialization needs an RngStream")
    X = instance.X.entries
    n, p = X.shape
    y = instance.y
    delta = n / p
    fp = fixed_point or mest_fixed_point(loss, noise, delta)
    bstar, tau = fp.bbar_star, fp.tau_star
    xi = rng.generator(draw_index=3_000_000).standard_normal(p)
    bhat = instance.beta + np.sqrt(delta) * tau * xi
    rhat = y - X @ bhat
    run = AmpRun(side_info={"beta": instance.beta, "delta": delta, "y": y,
                            "fixed_point": fp})
    run.record("beta_hat", bhat)
    run.record("rhat", rhat)
    for k in range(K):
        s = L.moreau_score(loss, bstar, rhat)[0]
        bhat = X.T @ s + bhat
        _check_finite(bhat, k, "beta_hat")
        rhat = y - X @ bhat + s
        run.record("beta_hat", bhat)
        run.record("rhat", rhat)
    return run


def ols_reference(X, y) -> EstimatorResult:
    """Least-squares solution via the normal equations (square-loss oracle)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    grad = X.T @ r
    return EstimatorResult(
        beta_hat=beta,
        objective=float(0.5 * r @ r),
        kkt_residual=float(np.linalg.norm(grad)),
        iterations=1,
        converged=True,
    )


def mest_kkt_residual(X, y, beta, loss: L.Loss) -> float:
    """Norm of X^T M'(y - X beta), the M-estimation stationarity residual."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(y, dtype=float) - X @ beta
    return float(np.linalg.norm(X.T @ loss.derivative(r)))


# ---------------------------------------------------------------------------
# Logistic maximum likelihood
# ---------------------------------------------------------------------------


def logistic_gamp(instance: GlmInstance, fp: FixedPoint, K: int,
                  rng: RngStream | None = None) -> AmpRun:
    """Stationary GAMP for the logistic MLE:

      bhat^{k+1} = delta b* X^T { y - zeta'(prox_{b* zeta}(theta^k + b* y)) } + bhat^k,
      theta^{k+1} = X bhat^{k+1} - b* { same residual },

    started from the simulation-only oracle bhat^0 = mu~* beta + sigma~* xi
    with theta^0 = X bhat^0. Non-finite iterates (near-separable data) raise.
    """
    if rng is None:
        raise ValueError("oracle initialization needs an RngStream")
    X = instance.X.entries
    n, p = X.shape
    y = instance.y
    delta = n / p
    bstar = fp.bbar_star
    xi = rng.generator(draw_index=3_000_000).standard_normal(p)
    bhat = fp.mu_tilde_star * instance.beta + fp.sigma_tilde_star * xi
    theta = X @ bhat
    run = AmpRun(side_info={"beta": instance.beta, "delta": delta, "y": y,
                            "fixed_point": fp})
    run.record("beta_hat", bhat)
    run.record("theta", theta)
    for k in range(K):
        pr = L.prox(L.LOGISTIC_ZETA, bstar, theta + bstar * y)
        resid = y - _zeta_prime(pr)
        bhat = delta * bstar * (X.T @ resid) + bhat
        _check_finite(bhat, k, "beta_hat")
        theta = X @ bhat - bstar * resid
        run.record("rhat", resid)
        run.record("beta_hat", bhat)
        run.record("theta", theta)
    return run


def logistic_objective(X, y, beta) -> float:
    z = np.asarray(X) @ beta
    return float(np.sum(np.logaddexp(0.0, z) - np.asarray(y) * z))


def logistic_mle_reference(X, y, tol: float = 1e-10,
                           max_iter: int = 500) -> EstimatorResult:
    """Damped Newton on the logistic negative log-likelihood.

    Declares the MLE nonexistent (status "nonexistent") when an iterate
    strictly separates the two label classes: the likelihood is then unbounded
    along that direction, which certifies nonexistence. Otherwise stops when
    the gradient norm drops below ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    beta = np.zeros(p)
    sign = 2.0 * y - 1.0
    obj = logistic_objective(X, y, beta)
    it = 0
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        z = X @ beta
        if np.all(sign * z > 0.0):
            return EstimatorResult(beta_hat=beta, objective=obj,
                                   kkt_residual=grad_norm, iterations=it,
                                   converged=False, status="nonexistent")
        mu = _zeta_prime(z)
        grad = X.T @ (mu - y)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tol:
            return EstimatorResult(beta_hat=beta, objective=obj,
                                   kkt_residual=grad_norm, iterations=it,
                                   converged=True)
        w = mu * (1.0 - mu)
        H = X.T @ (w[:, None] * X) + 1e-12 * np.eye(p)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while t > 1e-12:
            cand = beta - t * step
            cand_obj = logistic_objective(X, y, cand)
            if cand_obj <= obj - 1e-4 * t * float(grad @ step):
                beta, obj = cand, cand_obj
                break
            t *= 0.5
        else:
            break
    status = "nonexistent" if np.all(sign * (X @ beta) > 0.0) else "ok"
    return EstimatorResult(beta_hat=beta, objective=obj,
                           kkt_residual=grad_norm, iterations=it,
                           converged=False, status=status)
