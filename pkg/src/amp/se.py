"""State evolution: deterministic recursions, fixed points, and calibrations.

All expectations are evaluated with Gauss-Hermite quadrature (exact sums over
discrete atoms, per-component quadrature for Gaussian mixtures); correlated
Gaussian pairs go through a Cholesky factor of their 2x2 covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from . import losses as L
from .denoisers import DenoiserPolicy, ScalarDenoiser
from .priors import Prior, mmse
from .quadrature import GaussQuad, gauss_expect_2d, gauss_quad

LEDGER_MAX = 64


@dataclass(frozen=True)
class SEPath:
    """Effective-parameter path (mu_k, sigma_k or tau_k) of a recursion."""

    flavor: str
    mu: np.ndarray
    sigma: np.ndarray
    cov_ledger: np.ndarray | None = None
    rho: np.ndarray | None = None
    bbar: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.asarray(self.sigma) < 0):
            raise ValueError("sigma path must be nonnegative")
        if self.cov_ledger is not None:
            w = np.linalg.eigvalsh(self.cov_ledger)
            if w.min() < -1e-8:
                raise ValueError("covariance ledger lost positive semidefiniteness")

    def to_json(self) -> dict:
        out = {
            "flavor": self.flavor,
            "mu": list(map(float, self.mu)),
            "sigma": list(map(float, self.sigma)),
        }
        if self.rho is not None:
            out["rho"] = list(map(float, self.rho))
        if self.bbar is not None:
            out["bbar"] = list(map(float, self.bbar))
        if self.cov_ledger is not None:
            out["cov_ledger"] = [list(map(float, row)) for row in self.cov_ledger]
        return out


@dataclass(frozen=True)
class FixedPoint:
    """Solved fixed-point/calibration system with residual diagnostics."""

    flavor: str
    values: dict
    residuals: dict
    iterations: int
    converged: bool

    def __getattr__(self, name):
        values = object.__getattribute__(self, "values")
        if name in values:
            return values[name]
        raise AttributeError(name)

    def to_json(self) -> dict:
        return {
            "flavor": self.flavor,
            "values": {k: float(v) for k, v in self.values.items()},
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "iterations": self.iterations,
            "converged": self.converged,
        }


# NoiseDist shares the Prior representation.
NoiseDist = Prior


def as_pair(d: ScalarDenoiser):
    """Adapt a side-info-free denoiser to the (x, gamma) calling convention."""
    return (lambda x, g: d.eval(x), lambda x, g: d.deriv(x))


def _expect_g_gamma(f, var: float, prior: Prior | None, quad: GaussQuad) -> float:
    """E f(G, gamma) with G ~ N(0, var) independent of gamma ~ prior."""
    s = np.sqrt(max(var, 0.0))
    if prior is None:
        vals = f(s * quad.nodes, None)
        return float(np.asarray(vals, float) @ quad.weights)
    gv, gw = prior.nodes(quad)
    x = s * quad.nodes[None, :]
    total = 0.0
    vals = f(np.broadcast_to(x, (len(gv), len(quad.nodes))), gv[:, None])
    total = float(gw @ np.asarray(vals, float) @ quad.weights)
    return total


def _expect_gg_gamma(fa, fb, cov: np.ndarray, prior: Prior | None, quad: GaussQuad) -> float:
    """E fa(G_a, gamma) fb(G_b, gamma), (G_a,G_b) ~ N(0,cov) independent of gamma."""
    if prior is None:
        return gauss_expect_2d(lambda x1, x2: fa(x1, None) * fb(x2, None), cov, quad)
    gv, gw = prior.nodes(quad)
    total = 0.0
    for v, w in zip(gv, gw):
        total += w * gauss_expect_2d(lambda x1, x2: fa(x1, v) * fb(x2, v), cov, quad)
    return total


def se_symmetric(
    denoisers,
    prior: Prior | None,
    tau1: float,
    K: int,
    init_map=None,
    quad: GaussQuad | None = None,
    ledger: bool = True,
) -> SEPath:
    """Noise-path recursion tau_{k+1}^2 = E f_k(G_k, gamma)^2 with its
    limiting covariance ledger and deterministic Onsager coefficients.

    ``denoisers`` is a sequence of (f, fprime) pairs taking (x, gamma); entry k
    is the map applied to the k-th iterate (k = 1 .. K-1). ``init_map`` is the
    optional function of gamma producing the initializer; when omitted the
    first ledger row treats the initializer as uncorrelated with later iterates.
    """
    if tau1 <= 0:
        raise ValueError("tau1 must be positive")
    q = quad or gauss_quad()
    pairs = [d if isinstance(d, tuple) else as_pair(d) for d in denoisers]
    tau2 = np.zeros(K)  # tau_k^2 for k = 1..K
    tau2[0] = tau1**2
    bbar = np.zeros(K)
    for k in range(1, K):
        f, fp = pairs[k - 1]
        tau2[k] = _expect_g_gamma(lambda x, g: np.asarray(f(x, g)) ** 2, tau2[k - 1], prior, q)
        if tau2[k] <= 0:
            raise ValueError(f"degenerate recursion: tau_{k + 1}^2 = 0 (constant denoiser?)")
        bbar[k] = _expect_g_gamma(fp, tau2[k - 1], prior, q)
    tbar = None
    if ledger and K <= LEDGER_MAX:
        tbar = np.zeros((K, K))
        tbar[0, 0] = tau2[0]
        for k in range(1, K):
            tbar[k, k] = tau2[k]
            fk, _ = pairs[k - 1]
            # Column 0: covariance with the initializer.
            if init_map is not None and prior is not None:

                def f_joint(x, g, fk=fk):
                    return np.asarray(init_map(g)) * np.asarray(fk(x, g))

                tbar[k, 0] = _expect_g_gamma(f_joint, tbar[k - 1, k - 1], prior, q)
                tbar[0, k] = tbar[k, 0]
            for l in range(1, k):
                fl, _ = pairs[l - 1]
                cov = np.array(
                    [
                        [tbar[l - 1, l - 1], tbar[l - 1, k - 1]],
                        [tbar[l - 1, k - 1], tbar[k - 1, k - 1]],
                    ]
                )
                tbar[k, l] = _expect_gg_gamma(fl, fk, cov, prior, q)
                tbar[l, k] = tbar[k, l]
        w = np.linalg.eigvalsh(tbar)
        if w.min() < -1e-10:
            raise ValueError("covariance ledger lost positive definiteness")
    return SEPath(
        flavor="symmetric_abstract",
        mu=np.zeros(K),
        sigma=np.sqrt(tau2),
        cov_ledger=tbar,
        bbar=bbar,
    )


def se_spiked(
    prior: Prior,
    lam: float,
    mu0: float,
    sigma0: float,
    policy: DenoiserPolicy,
    K: int,
    quad: GaussQuad | None = None,
    ledger: bool = True,
) -> SEPath:
    """Spiked-model recursion mu_{k+1} = lam E(V g_k(mu_k V + sigma_k G)),
    sigma_{k+1}^2 = E(g_k(mu_k V + sigma_k G)^2), with V ~ prior (E V^2 = 1).

    Returns paths of length K+1 (index 0 is the initialization); for the Bayes
    policy also the effective-SNR path rho_k with the identity
    mu_{k+1} = lam sigma_{k+1}^2 enforced.
    """
    if abs(prior.m2 - 1.0) > 1e-8:
        raise ValueError("spiked-model prior must satisfy E V^2 = 1")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    q = quad or gauss_quad()
    mu = np.zeros(K + 1)
    sig = np.zeros(K + 1)
    mu[0], sig[0] = mu0, sigma0
    bayes = policy.kind == "bayes"
    rho = np.zeros(K + 1) if bayes else None
    if bayes:
        rho[0] = (mu0 / sigma0) ** 2 if sigma0 > 0 else np.inf
    bbar = np.zeros(K + 1)
    gs = []
    for k in range(K):
        if mu[k] == 0.0 and sig[k] == 0.0:
            # fully degenerate effective observation (the uninformative
            # trajectory): no policy denoiser can be formed, so the path
            # continues at zero.
            g = ScalarDenoiser(
                eval=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                lipschitz_bound=0.0,
                tag="zero",
            )
        else:
            g = policy.make(k, mu[k], sig[k])
        gs.append(g)
        pv, pw = prior.nodes(q)
        y = mu[k] * pv[:, None] + sig[k] * q.nodes[None, :]
        gy = np.asarray(g.eval(y), float)
        second = float(pw @ (gy * gy) @ q.weights)
        overlap = float((pw * pv) @ gy @ q.weights)
        bbar[k] = float(pw @ np.asarray(g.deriv(y), float) @ q.weights)
        sig[k + 1] = np.sqrt(second)
        if bayes:
            rho[k + 1] = lam**2 * (1.0 - mmse(prior, rho[k], q))
            mu[k + 1] = lam * second
        else:
            mu[k + 1] = lam * overlap
    ledger_mat = None
    if ledger and K <= LEDGER_MAX:
        # Entry (k, l) (0-based; iterations k+1, l+1) is
        # E[g_l(mu_l V + s_a) g_k(mu_k V + s_b)] where the unnormalized noise
        # pair (s_a, s_b) is jointly Gaussian with covariance read off the
        # ledger itself; the initialization noise is independent of later ones.
        ledger_mat = np.zeros((K, K))
        pv, pw = prior.nodes(q)
        for k in range(K):
            ledger_mat[k, k] = sig[k + 1] ** 2
            for l in range(k):
                var_a = sig[0] ** 2 if l == 0 else ledger_mat[l - 1, l - 1]
                var_b = ledger_mat[k - 1, k - 1]
                cov_ab = 0.0 if l == 0 else ledger_mat[l - 1, k - 1]
                cov = np.array([[var_a, cov_ab], [cov_ab, var_b]])
                total = 0.0
                for v, w in zip(pv, pw):
                    total += w * gauss_expect_2d(
                        lambda s_a, s_b, v=v: np.asarray(gs[l].eval(mu[l] * v + s_a), float)
                        * np.asarray(gs[k].eval(mu[k] * v + s_b), float),
                        cov,
                        q,
                    )
                ledger_mat[k, l] = ledger_mat[l, k] = total
    return SEPath(
        flavor="spiked",
        mu=mu,
        sigma=sig,
        cov_ledger=ledger_mat,
        rho=rho,
        bbar=bbar,
    )


def rho_star(
    prior: Prior,
    lam: float,
    rho0: float = 0.0,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    quad: GaussQuad | None = None,
) -> FixedPoint:
    """Limit of rho <- lam^2 (1 - mmse(rho)) from rho0 (monotone iteration)."""
    if abs(prior.m2 - 1.0) > 1e-8:
        raise ValueError("prior must satisfy E V^2 = 1")
    if rho0 < 0:
        raise ValueError("rho0 must be nonnegative")
    q = quad or gauss_quad()
    rho = rho0
    it = 0
    for it in range(1, max_iter + 1):
        nxt = lam**2 * (1.0 - mmse(prior, rho, q))
        if abs(nxt - rho) < tol:
            rho = nxt
            resid = abs(rho - lam**2 * (1.0 - mmse(prior, rho, q)))
            return FixedPoint(
                flavor="bayes_spiked",
                values={"rho_star": rho},
                residuals={"map": resid},
                iterations=it,
                converged=True,
            )
        rho = nxt
    raise RuntimeError("rho fixed-point iteration did not converge")


# ---------------------------------------------------------------------------
# GAMP state evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Link:
    """Observation channel y = h(z, eps) plus its SE branch decomposition.

    kinds: linear (y = z + eps), logistic (y = 1{eps <= zeta'(z)}, eps uniform),
    phase_retrieval (y = z^2 + eps).
    """

    kind: str
    noise: Prior | None = None  # for additive-noise links

    def apply(self, z: np.ndarray, eps: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return z + eps
        if self.kind == "logistic":
            return (eps <= _zeta_prime(z)).astype(float)
        if self.kind == "phase_retrieval":
            return z * z + eps
        raise ValueError(self.kind)

    def y_branches(self, z: np.ndarray, quad: GaussQuad):
        """Iterable of (y, weight) arrays such that summing weight * q(y)
        over branches gives E[q(Y) | Z = z]."""
        if self.kind == "logistic":
            p = _zeta_prime(z)
            return [(np.ones_like(z), p), (np.zeros_like(z), 1.0 - p)]
        if self.noise is None:
            raise ValueError("additive link needs a noise distribution")
        ev, ew = self.noise.nodes(quad)
        if self.kind == "linear":
            return [(z + e, w) for e, w in zip(ev, ew)]
        return [(z * z + e, w) for e, w in zip(ev, ew)]


def _zeta_prime(z):
    e = np.exp(-np.abs(z))
    return np.where(np.asarray(z) >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _zeta_second(z):
    p = _zeta_prime(z)
    return p * (1.0 - p)


def se_gamp(
    prior: Prior,
    link: Link,
    delta: float,
    g_seq,
    f_seq,
    Sigma0: np.ndarray,
    K: int,
    quad: GaussQuad | None = None,
) -> SEPath:
    """Two-channel recursion for GLM AMP.

    ``g_seq[k]`` supplies (g, dg_du) callables of (u, y); ``f_seq[k]`` is a
    ScalarDenoiser (or (f, fprime) pair) for the signal channel. ``Sigma0`` is
    the 2x2 second-moment matrix of (Z, Z_0); its (1,1) entry must equal
    E(beta^2)/delta.

    The mean parameter mu_{k+1} = E d/dz g~_k is evaluated through the Stein
    identity mu_{k+1} = (E[Z g_k(Z_k, Y)] - Sigma_12 E[du g_k(Z_k, Y)]) / Sigma_11,
    with the conditional law of Y given Z handled exactly per link branch.
    """
    q = quad or gauss_quad()
    m2b = prior.m2
    Sigma = np.array(Sigma0, dtype=float)
    if abs(Sigma[0, 0] - m2b / delta) > 1e-8:
        raise ValueError("Sigma0[0,0] must equal E(beta^2)/delta")
    mu = np.zeros(K + 1)
    sig = np.zeros(K + 1)
    cbar = np.zeros(K)
    bbar = np.zeros(K + 1)
    Sigmas = [Sigma.copy()]
    muZ = np.zeros(K)
    sigZ = np.zeros(K)
    for k in range(K):
        s11, s12, s22 = Sigma[0, 0], Sigma[0, 1], Sigma[1, 1]
        if s11 <= 0 or s22 - s12**2 / s11 < -1e-12:
            raise ValueError("degenerate theta-channel covariance")
        muZ[k] = s12 / s11
        sigZ[k] = np.sqrt(max(s22 - s12**2 / s11, 0.0))
        g, dg = g_seq[k] if isinstance(g_seq[k], tuple) else (g_seq[k].eval, g_seq[k].deriv)
        s1 = np.sqrt(s11)
        z = s1 * q.nodes[:, None]
        zk = muZ[k] * z + sigZ[k] * q.nodes[None, :]
        z = np.broadcast_to(z, zk.shape)
        m_zg = m_dg = m_g2 = 0.0
        for y, w in link.y_branches(z, q):
            gy = np.asarray(g(zk, y), float)
            dgy = np.asarray(dg(zk, y), float)
            m_zg += float(q.weights @ (w * z * gy) @ q.weights)
            m_dg += float(q.weights @ (w * dgy) @ q.weights)
            m_g2 += float(q.weights @ (w * gy * gy) @ q.weights)
        cbar[k] = m_dg
        mu[k + 1] = (m_zg - s12 * m_dg) / s11
        sig[k + 1] = np.sqrt(m_g2)
        f, fp = (
            f_seq[k] if isinstance(f_seq[k], tuple) else (f_seq[k].eval, f_seq[k].deriv)
        )
        bv, bw = prior.nodes(q)
        warg = mu[k + 1] * bv[:, None] + sig[k + 1] * q.nodes[None, :]
        fv = np.asarray(f(warg), float)
        e_bf = float((bw * bv) @ fv @ q.weights)
        e_f2 = float(bw @ (fv * fv) @ q.weights)
        bbar[k + 1] = float(bw @ np.asarray(fp(warg), float) @ q.weights) / delta
        Sigma = np.array([[m2b / delta, e_bf / delta], [e_bf / delta, e_f2 / delta]])
        Sigmas.append(Sigma.copy())
    return SEPath(
        flavor="gamp",
        mu=mu,
        sigma=sig,
        bbar=bbar,
        extras={"Sigmas": Sigmas, "cbar": cbar, "muZ": muZ, "sigZ": sigZ},
    )


def se_linear(prior: Prior, delta: float, sigma_noise: float, f_seq, sigma1: float, K: int,
              quad: GaussQuad | None = None) -> SEPath:
    """Linear-model specialization: mu_k = 1 and
    sigma_{k+1}^2 = sigma^2 + E{(beta - f_k(beta + sigma_k G))^2} / delta."""
    q = quad or gauss_quad()
    sig = np.zeros(K + 1)
    sig[0] = sigma1
    bv, bw = prior.nodes(q)
    for k in range(K):
        f = f_seq[k] if callable(f_seq[k]) else f_seq[k].eval
        arg = bv[:, None] + sig[k] * q.nodes[None, :]
        err = bv[:, None] - np.asarray(f(arg), float)
        sig[k + 1] = np.sqrt(sigma_noise**2 + float(bw @ (err * err) @ q.weights) / delta)
    return SEPath(flavor="linear", mu=np.ones(K + 1), sigma=sig)


# ---------------------------------------------------------------------------
# Lasso calibration
# ---------------------------------------------------------------------------


def _active_prob(prior: Prior, s: float, t: float, quad: GaussQuad) -> float:
    """Pr(|beta + s G| > t)."""
    bv, bw = prior.nodes(quad)
    p = norm.sf((t - bv) / s) + norm.cdf((-t - bv) / s)
    return float(bw @ p)


def _st_mse(prior: Prior, s: float, t: float, quad: GaussQuad) -> float:
    """E{(beta - ST_t(beta + s G))^2}, with the Gaussian integral over G in
    closed form (the soft-threshold kinks defeat quadrature accuracy)."""
    bv, bw = prior.nodes(quad)
    a = (t - bv) / s
    b = (-t - bv) / s
    upper = (t * t + s * s) * norm.sf(a) + (s * s * a - 2.0 * t * s) * norm.pdf(a)
    lower = (t * t + s * s) * norm.cdf(b) - (s * s * b + 2.0 * t * s) * norm.pdf(b)
    middle = bv * bv * (norm.cdf(a) - norm.cdf(b))
    return float(bw @ (upper + lower + middle))


def upsilon(alpha: float) -> float:
    """(1 + a^2) Phi(-a) - a phi(a); threshold function for calibration."""
    return float((1 + alpha**2) * norm.cdf(-alpha) - alpha * norm.pdf(alpha))


def _sigma_tilde(prior: Prior, delta: float, sigma: float, alpha: float,
                 quad: GaussQuad, tol: float = 1e-13) -> float:
    """Unique solution of s^2 = sigma^2 + E{(beta - ST_{alpha s}(beta + sG))^2}/delta,
    found by bisection; infinite when alpha is at or below the solvability
    boundary (the equation's slope reaches 1 there)."""

    def excess(s2: float) -> float:
        s = np.sqrt(s2)
        return sigma**2 + _st_mse(prior, s, alpha * s, quad) / delta - s2

    lo = sigma**2
    hi = sigma**2 + prior.m2 / delta + 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e14:
            return np.inf
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.sqrt(0.5 * (lo + hi))


def lasso_calibration(lam: float, delta: float, sigma: float, prior: Prior,
                      quad: GaussQuad | None = None) -> FixedPoint:
    """Solve the threshold calibration for the ell_1-penalized linear model.

    Returns (alpha*, sigma*, t*, b~*) such that sigma*^2 = sigma^2 +
    E{(beta - ST_{t*}(beta + sigma* G))^2}/delta and
    t* = lam (1 - Pr(|beta + sigma* G| > t*)/delta)^{-1}.
    """
    if min(lam, delta, sigma) <= 0:
        raise ValueError("lam, delta, sigma must be positive")
    q = quad or gauss_quad()
    # Region boundary alpha_0: upsilon(alpha) < delta/2 required.
    if upsilon(0.0) < delta / 2:
        alpha0 = 0.0
    else:
        lo, hi = 0.0, 10.0
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if upsilon(mid) < delta / 2:
                hi = mid
            else:
                lo = mid
        alpha0 = hi

    def Lambda(alpha: float) -> float:
        st = _sigma_tilde(prior, delta, sigma, alpha, q)
        if not np.isfinite(st):
            return 0.0
        return alpha * st * (1.0 - _active_prob(prior, st, alpha * st, q) / delta)

    lo = alpha0 + 1e-6
    hi = alpha0 + 1.0
    tries = 0
    while Lambda(hi) < lam:
        hi += 2.0
        tries += 1
        if hi > 60:
            raise RuntimeError("calibration bracket failure: Lambda stayed below lambda")
    while Lambda(lo) > lam:
        lo = alpha0 + (lo - alpha0) / 4
        tries += 1
        if lo - alpha0 < 1e-14:
            raise RuntimeError("calibration bracket failure: Lambda stayed above lambda")
    it = 0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if Lambda(mid) < lam:
            lo = mid
        else:
            hi = mid
        it += 1
    alpha = 0.5 * (lo + hi)
    s_star = _sigma_tilde(prior, delta, sigma, alpha, q)
    t_star = alpha * s_star
    active = _active_prob(prior, s_star, t_star, q)
    b_tilde = active / delta
    r_sigma = s_star**2 - (sigma**2 + _st_mse(prior, s_star, t_star, q) / delta)
    r_t = t_star - lam / (1.0 - b_tilde)
    return FixedPoint(
        flavor="lasso",
        values={
            "alpha_star": alpha,
            "sigma_star": s_star,
            "t_star": t_star,
            "b_tilde_star": b_tilde,
            "active_fraction": active,
            "amse": delta * (s_star**2 - sigma**2),
        },
        residuals={"sigma_eq": r_sigma, "threshold_eq": r_t},
        iterations=it,
        converged=True,
    )


def lasso_schedule(prior: Prior, delta: float, sigma: float, lam: float, K: int,
                   quad: GaussQuad | None = None):
    """Zero-init threshold schedule: arrays (sigma_k, t_k, b~_k) for k = 1..K."""
    q = quad or gauss_quad()
    sig = np.zeros(K + 1)
    t = np.zeros(K + 1)
    bt = np.zeros(K + 1)
    sig[1] = np.sqrt(sigma**2 + prior.m2 / delta)
    t[1] = lam
    for k in range(1, K):
        bt[k] = _active_prob(prior, sig[k], t[k], q) / delta
        sig[k + 1] = np.sqrt(sigma**2 + _st_mse(prior, sig[k], t[k], q) / delta)
        t[k + 1] = lam + bt[k] * t[k]
    return sig, t, bt


# ---------------------------------------------------------------------------
# M-estimation fixed point
# ---------------------------------------------------------------------------


def _score_moments(loss: L.Loss, b: float, noise: Prior, tau: float, quad: GaussQuad):
    ev, ew = noise.nodes(quad)
    z = ev[:, None] + tau * quad.nodes[None, :]
    s, sp = L.moreau_score(loss, b, z)
    e_sp = float(ew @ sp @ quad.weights)
    e_s2 = float(ew @ (s * s) @ quad.weights)
    return e_sp, e_s2


def mest_fixed_point(loss: L.Loss, noise: NoiseDist, delta: float,
                     quad: GaussQuad | None = None,
                     tol: float = 1e-12, max_iter: int = 10_000) -> FixedPoint:
    """Solve delta E S'_{b*}(eps + tau* G) = 1 and tau*^2 = delta E S_{b*}^2.

    For each tau the Onsager scale b(tau) is found by root-finding on the
    monotone map b -> E S_b'; tau is then solved from its own equation.
    """
    if delta <= 1:
        raise ValueError("delta must exceed 1")
    q = quad or gauss_quad()
    target = 1.0 / delta

    def solve_b(tau: float) -> float:
        lo, hi = 1e-10, 1.0
        while _score_moments(loss, hi, noise, tau, q)[0] < target:
            hi *= 2.0
            if hi > 1e12:
                raise RuntimeError("no Onsager scale solves the derivative equation")
        return float(brentq(
            lambda b: _score_moments(loss, b, noise, tau, q)[0] - target,
            lo, hi, xtol=1e-13, rtol=8.9e-16,
        ))

    def tau_excess(tau: float) -> float:
        b = solve_b(tau)
        return delta * _score_moments(loss, b, noise, tau, q)[1] - tau * tau

    lo = 1e-6
    hi = np.sqrt(max(noise.m2, 1e-4))
    it = 0
    while tau_excess(hi) > 0:
        hi *= 2.0
        it += 1
        if hi > 1e8:
            raise RuntimeError("tau fixed-point bracket failure")
    tau = float(brentq(tau_excess, lo, hi, xtol=1e-13, rtol=8.9e-16))
    tau2 = tau * tau
    b = solve_b(tau)
    e_sp, e_s2 = _score_moments(loss, b, noise, tau, q)
    return FixedPoint(
        flavor="mest",
        values={"tau_star": tau, "bbar_star": b, "amse": delta * tau2},
        residuals={
            "deriv_eq": delta * e_sp - 1.0,
            "tau_eq": tau2 - delta * e_s2,
        },
        iterations=it,
        converged=True,
    )


# ---------------------------------------------------------------------------
# Logistic MLE fixed point
# ---------------------------------------------------------------------------


def _logistic_moments(mu_t: float, sig_t: float, b: float, kappa2: float,
                      delta: float, quad: GaussQuad):
    """E[Z R], E[R^2], E[1/(1 + b zeta''(prox))] for the logistic system."""
    z = np.sqrt(kappa2) * quad.nodes[:, None]
    zs = mu_t * z + sig_t / np.sqrt(delta) * quad.nodes[None, :]
    z = np.broadcast_to(z, zs.shape)
    p1 = _zeta_prime(z)
    e_zr = e_r2 = e_inv = 0.0
    for y, w in ((1.0, p1), (0.0, 1.0 - p1)):
        pr = L.prox(L.LOGISTIC_ZETA, b, zs + b * y)
        r = y - _zeta_prime(pr)
        inv = 1.0 / (1.0 + b * _zeta_second(pr))
        e_zr += float(quad.weights @ (w * z * r) @ quad.weights)
        e_r2 += float(quad.weights @ (w * r * r) @ quad.weights)
        e_inv += float(quad.weights @ (w * inv) @ quad.weights)
    return e_zr, e_r2, e_inv


def logistic_fixed_point(kappa2: float, delta: float,
                         quad: GaussQuad | None = None,
                         tol: float = 1e-8, max_iter: int = 2000,
                         damping: float = 0.5) -> FixedPoint:
    """Solve the three-parameter system (mu~*, sigma~*, b*) for the
    high-dimensional logistic MLE at signal strength kappa^2 = E(beta^2)/delta.

    Damped fixed-point iteration of the stationarity map; failure to reach the
    residual tolerance is reported as "no fixed point found" (signal strength
    at or beyond the MLE existence boundary).
    """
    if kappa2 <= 0 or delta <= 1:
        raise ValueError("need kappa2 > 0 and delta > 1")
    q = quad or gauss_quad()
    mu_t, sig_t, b = 1.0, 1.0, 1.0
    m2b = kappa2 * delta
    it = 0
    for it in range(1, max_iter + 1):
        if max(abs(mu_t), sig_t, b) > 1e8:
            raise RuntimeError("no fixed point found (iteration diverged)")
        e_zr, e_r2, e_inv = _logistic_moments(mu_t, sig_t, b, kappa2, delta, q)
        res = np.array(
            [
                e_zr / kappa2,
                sig_t**2 - delta**2 * b**2 * e_r2,
                e_inv - (1.0 - 1.0 / delta),
            ]
        )
        if np.linalg.norm(res) < tol:
            return FixedPoint(
                flavor="logistic",
                values={"mu_tilde_star": mu_t, "sigma_tilde_star": sig_t,
                        "bbar_star": b, "kappa2": kappa2, "delta": delta},
                residuals={"mean_eq": res[0], "var_eq": res[1], "deriv_eq": res[2]},
                iterations=it,
                converged=True,
            )
        denom = 1.0 - e_inv
        if denom <= 0:
            raise RuntimeError("no fixed point found (derivative equation degenerate)")
        b_new = b / (delta * denom)
        mu_new = delta**2 * b_new / m2b * e_zr + mu_t
        sig_new = delta * b_new * np.sqrt(e_r2)
        mu_t += damping * (mu_new - mu_t)
        sig_t += damping * (sig_new - sig_t)
        b += damping * (b_new - b)
        if not (np.isfinite(mu_t) and np.isfinite(sig_t) and np.isfinite(b)) or b <= 0:
            raise RuntimeError("no fixed point found (iteration diverged)")
    raise RuntimeError("no fixed point found (residual stalled above tolerance)")
