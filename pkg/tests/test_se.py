import numpy as np
import pytest
from scipy.stats import norm

from amp import losses as L
from amp.denoisers import bayes_policy, custom_policy, linear_denoiser, tanh_denoiser
from amp.priors import (
    discrete_prior,
    gauss_mixture_prior,
    mmse,
    rademacher_prior,
    three_point_prior,
)
from amp.quadrature import gauss_quad
from amp.se import (
    Link,
    lasso_calibration,
    lasso_schedule,
    logistic_fixed_point,
    mest_fixed_point,
    rho_star,
    se_gamp,
    se_linear,
    se_spiked,
    se_symmetric,
    upsilon,
)

TANH = (lambda x, g: np.tanh(x), lambda x, g: 1.0 / np.cosh(x) ** 2)
LASSO_PRIOR = three_point_prior(0.1, np.sqrt(10.0))


# ---------------------------------------------------------------------------
# abstract symmetric recursion
# ---------------------------------------------------------------------------


def test_se_symmetric_identity_denoiser_constant_path():
    ident = (lambda x, g: x, lambda x, g: np.ones_like(x))
    path = se_symmetric([ident] * 4, None, 1.3, 4)
    assert np.allclose(path.sigma, 1.3)


def test_se_symmetric_rejects_zero_denoiser():
    zero = (lambda x, g: np.zeros_like(x), lambda x, g: np.zeros_like(x))
    with pytest.raises(ValueError, match="degenerate"):
        se_symmetric([zero] * 3, None, 1.0, 3)
    with pytest.raises(ValueError):
        se_symmetric([TANH] * 3, None, 0.0, 3)


def test_se_symmetric_tanh_path_matches_scalar_monte_carlo():
    K = 5
    path = se_symmetric([TANH] * K, None, 1.0, K)
    gen = np.random.default_rng(11)
    n = 1_000_000
    tau = 1.0
    assert abs(path.sigma[0] - 1.0) < 1e-12
    for k in range(1, K):
        h = tau * gen.standard_normal(n)
        tau = float(np.sqrt(np.mean(np.tanh(h) ** 2)))
        assert abs(path.sigma[k] - tau) < 1e-3
    assert np.all(np.isfinite(path.bbar))


def test_se_symmetric_ledger_diagonal_and_psd():
    K = 5
    path = se_symmetric([TANH] * K, rademacher_prior(), 1.0, K,
                        init_map=lambda g: g)
    T = path.cov_ledger
    assert np.allclose(np.diag(T), np.array(path.sigma)[: T.shape[0]] ** 2, atol=1e-12)
    eig = np.linalg.eigvalsh(T)
    assert eig.min() > -1e-10


# ---------------------------------------------------------------------------
# spiked recursion and its Bayes fixed point
# ---------------------------------------------------------------------------


def test_se_spiked_uninformative_trajectory():
    path = se_spiked(rademacher_prior(), 1.7, 0.0, 1.0, bayes_policy(rademacher_prior()), 5,
                     ledger=False)
    assert np.allclose(path.mu, 0.0)
    assert np.allclose(path.rho, 0.0)
    assert np.all(np.isfinite(path.sigma))


def test_se_spiked_normalization_enforced():
    bad = discrete_prior([-2.0, 2.0], [0.5, 0.5])
    with pytest.raises(ValueError, match="V"):
        se_spiked(bad, 1.7, 0.5, 0.5, bayes_policy(bad), 3)


def test_se_spiked_spectral_seed_and_rho_recursion():
    lam = 1.7
    prior = rademacher_prior()
    mu0, sigma0 = np.sqrt(1 - lam**-2), 1 / lam
    path = se_spiked(prior, lam, mu0, sigma0, bayes_policy(prior), 8)
    assert abs(path.rho[0] - (lam**2 - 1.0)) < 1e-12
    rho = lam**2 - 1.0
    for k in range(8):
        rho = lam**2 * (1.0 - mmse(prior, rho))
        assert abs(path.rho[k + 1] - rho) < 1e-10
        # effective SNR identity rho_k = (mu_k / sigma_k)^2
        assert abs(path.rho[k + 1] - (path.mu[k + 1] / path.sigma[k + 1]) ** 2) < 1e-8
    # monotone increasing, converging to the fixed point
    assert np.all(np.diff(path.rho) >= -1e-12)
    fp = rho_star(prior, lam, rho0=lam**2 - 1.0)
    assert abs(path.rho[-1] - fp.values["rho_star"]) < 2e-4


def test_rho_star_value_and_residual():
    from scipy.optimize import brentq
    fp = rho_star(rademacher_prior(), 1.7, rho0=1.89)
    rho = fp.values["rho_star"]
    assert abs(rho - 1.7**2 * (1.0 - mmse(rademacher_prior(), rho))) < 1e-9
    # independent root-finding on the same map
    root = brentq(lambda r: r - 1.7**2 * (1.0 - mmse(rademacher_prior(), r)),
                  2.0, 2.8, xtol=1e-13)
    assert abs(rho - root) < 1e-9
    assert abs(rho - 2.356806693340235) < 1e-9


def test_rho_star_degenerate_at_zero_for_centered_prior():
    fp = rho_star(rademacher_prior(), 0.8, rho0=0.0)
    assert fp.values["rho_star"] == 0.0


def test_rho_star_first_step_uses_prior_mean():
    # 1 - mmse(0) = (E V)^2 for E V^2 = 1, so the first iterate from rho0 = 0
    # is lam^2 E(V)^2
    prior = discrete_prior([0.0, 2.0], [0.75, 0.25])
    lam = 1.7
    first = lam**2 * (1.0 - mmse(prior, 0.0))
    assert abs(first - lam**2 * prior.m1**2) < 1e-12
    assert abs(first - 1.7**2 * 0.25) < 1e-12
    fp = rho_star(prior, lam, rho0=0.0)
    assert fp.values["rho_star"] >= first - 1e-12


def test_bayes_policy_snr_dominates_alternatives():
    # One spiked SE step under the Bayes policy reaches at least the effective
    # SNR of any competing denoiser policy from the same (mu, sigma).
    lam, prior = 1.7, rademacher_prior()
    mu0, sigma0 = np.sqrt(1 - lam**-2), 1 / lam
    bayes = se_spiked(prior, lam, mu0, sigma0, bayes_policy(prior), 1)
    rho_bayes = (bayes.mu[1] / bayes.sigma[1]) ** 2
    for policy in (custom_policy([tanh_denoiser(0.5, 1.0)] * 1),
                   custom_policy([linear_denoiser(1.0)] * 1)):
        other = se_spiked(prior, lam, mu0, sigma0, policy, 1)
        rho_other = (other.mu[1] / other.sigma[1]) ** 2
        assert rho_other <= rho_bayes + 1e-10


# ---------------------------------------------------------------------------
# GLM channel recursions
# ---------------------------------------------------------------------------


def test_se_gamp_linear_link_reduces_to_se_linear():
    prior = LASSO_PRIOR
    sigma, delta, K = 0.2, 0.5, 4
    noise = gauss_mixture_prior([0.0], [sigma], [1.0])
    link = Link(kind="linear", noise=noise)
    g = (lambda u, y: y - u, lambda u, y: -np.ones_like(u))
    st_f = lambda x: np.sign(x) * np.maximum(np.abs(x) - 1.4, 0)
    st = (st_f, lambda x: (np.abs(x) > 1.4).astype(float))
    sigma1 = np.sqrt(sigma**2 + prior.m2 / delta)
    Sigma0 = np.array([[prior.m2 / delta, 0.0], [0.0, 0.0]])
    path = se_gamp(prior, link, delta, [g] * K, [st] * K, Sigma0, K)
    ref = se_linear(prior, delta, sigma, [st_f] * K, sigma1, K)
    assert np.allclose(path.mu[1:], 1.0, atol=1e-9)
    # the general path records the effective noise level one index ahead of
    # the specialized linear recursion
    assert abs(path.sigma[1] - sigma1) < 1e-12
    assert np.allclose(path.sigma[1:], np.asarray(ref.sigma)[:K], atol=1e-8)


def test_se_gamp_zero_init_first_noise_level():
    prior = rademacher_prior()
    sigma, delta = 0.3, 2.0
    noise = gauss_mixture_prior([0.0], [sigma], [1.0])
    link = Link(kind="linear", noise=noise)
    g = (lambda u, y: y - u, lambda u, y: -np.ones_like(u))
    f = (lambda x: np.tanh(x), lambda x: 1.0 / np.cosh(x) ** 2)
    Sigma0 = np.array([[prior.m2 / delta, 0.0], [0.0, 0.0]])
    path = se_gamp(prior, link, delta, [g] * 2, [f] * 2, Sigma0, 2)
    assert abs(path.sigma[1] ** 2 - (sigma**2 + prior.m2 / delta)) < 1e-10


def test_se_gamp_rejects_inconsistent_sigma0():
    prior = rademacher_prior()
    link = Link(kind="logistic")
    g = (lambda u, y: y - u, lambda u, y: -np.ones_like(u))
    f = (lambda x: x, lambda x: np.ones_like(x))
    with pytest.raises(ValueError):
        se_gamp(prior, link, 2.0, [g], [f], np.array([[9.9, 0.0], [0.0, 0.0]]), 1)


def test_se_gamp_logistic_step_matches_monte_carlo():
    # One SE step for the logistic channel against a direct simulation of
    # (Z, Z_0, Y) with the MLE-score observation map.
    delta, kappa2 = 5.0, 0.2
    prior = gauss_mixture_prior([0.0], [np.sqrt(kappa2 * delta)], [1.0])
    link = Link(kind="logistic")
    b = 1.0

    def g(u, y):
        p = L.prox(L.LOGISTIC_ZETA, b, u + b * y)
        return y - 1.0 / (1.0 + np.exp(-p))

    def dg(u, y):
        p = L.prox(L.LOGISTIC_ZETA, b, u + b * y)
        s = 1.0 / (1.0 + np.exp(-p))
        return -(s * (1 - s)) / (1.0 + b * s * (1 - s))

    f = (lambda x: x, lambda x: np.ones_like(x))
    rho = 0.6
    Sigma0 = np.array([[kappa2, rho * kappa2], [rho * kappa2, 0.9 * kappa2]])
    path = se_gamp(prior, link, delta, [(g, dg)], [f], Sigma0, 1)

    gen = np.random.default_rng(21)
    n = 1_000_000
    chol = np.linalg.cholesky(Sigma0 + 1e-12 * np.eye(2))
    zz = chol @ gen.standard_normal((2, n))
    z, z0 = zz[0], zz[1]
    y = (gen.uniform(size=n) <= 1.0 / (1.0 + np.exp(-z))).astype(float)
    gv = g(z0, y)
    sig1_mc = float(np.sqrt(np.mean(gv**2)))
    mu1_mc = float(np.mean(z * gv)) / Sigma0[0, 0]
    # library stores the Stein-identity slope E d/dz g
    assert abs(path.sigma[1] - sig1_mc) < 2e-3
    slope = (mu1_mc * Sigma0[0, 0] - Sigma0[0, 1] * float(np.mean(dg(z0, y)))) / Sigma0[0, 0]
    assert abs(path.mu[1] - slope) < 2e-3


# ---------------------------------------------------------------------------
# Lasso calibration
# ---------------------------------------------------------------------------


def test_upsilon_at_zero():
    assert abs(upsilon(0.0) - 0.5) < 1e-14


def test_lasso_calibration_canonical_values_and_residuals():
    # reference values from an independent closed-form Gaussian-tail solver
    fp = lasso_calibration(1.0, 0.5, 0.2, LASSO_PRIOR)
    assert abs(fp.values["alpha_star"] - 1.8837776012) < 1e-8
    assert abs(fp.values["sigma_star"] - 0.7636687496) < 1e-8
    assert abs(fp.values["t_star"] - 1.4385820852) < 1e-8
    assert abs(fp.values["b_tilde_star"] - 0.3048710878) < 1e-8
    assert abs(fp.values["amse"] - 0.2715949795) < 1e-8
    assert abs(fp.residuals["sigma_eq"]) < 1e-9
    assert abs(fp.residuals["threshold_eq"]) < 1e-9
    assert abs(fp.values["t_star"] - fp.values["alpha_star"] * fp.values["sigma_star"]) < 1e-12


def test_lasso_calibration_point_mass_zero_prior_vs_independent_solver():
    # Pure-noise signal: solve the two-equation system independently with
    # Gaussian closed forms and compare.
    from scipy.optimize import brentq
    lam, delta, sigma = 1.0, 0.5, 0.2
    prior0 = discrete_prior([0.0], [1.0])
    fp = lasso_calibration(lam, delta, sigma, prior0)

    def st_mse(s, t):
        # E ST_t(s G)^2 for G ~ N(0,1)
        a = t / s
        return s**2 * 2.0 * ((1 + a**2) * norm.sf(a) - a * norm.pdf(a))

    def system(alpha):
        def sig_eq(s):
            return s**2 - sigma**2 - st_mse(s, alpha * s) / delta
        s = brentq(sig_eq, sigma / 2, 50.0, xtol=1e-13)
        t = alpha * s
        lam_of_alpha = t * (1.0 - 2.0 * norm.sf(alpha) / delta)
        return s, t, lam_of_alpha

    alpha = brentq(lambda a: system(a)[2] - lam, fp.values["alpha_star"] * 0.9,
                   fp.values["alpha_star"] * 1.1, xtol=1e-12)
    s, t, _ = system(alpha)
    assert abs(fp.values["alpha_star"] - alpha) < 1e-4
    assert abs(fp.values["sigma_star"] - s) < 1e-4
    assert abs(fp.values["t_star"] - t) < 1e-4


def test_lasso_calibration_total_shrinkage_limit():
    fp = lasso_calibration(60.0, 0.5, 0.2, LASSO_PRIOR)
    assert fp.values["active_fraction"] < 0.01
    assert fp.values["t_star"] > 10.0


def test_lasso_calibration_rejects_nonpositive_inputs():
    with pytest.raises(ValueError):
        lasso_calibration(-1.0, 0.5, 0.2, LASSO_PRIOR)


def test_lasso_schedule_starts_at_lambda_and_converges_to_calibration():
    fp = lasso_calibration(1.0, 0.5, 0.2, LASSO_PRIOR)
    sig, t, bt = lasso_schedule(LASSO_PRIOR, 0.5, 0.2, 1.0, 60)
    assert abs(t[1] - 1.0) < 1e-12
    assert abs(sig[1] - np.sqrt(0.2**2 + 1.0 / 0.5)) < 1e-12
    assert abs(sig[-1] - fp.values["sigma_star"]) < 1e-6
    assert abs(t[-1] - fp.values["t_star"]) < 1e-6
    assert abs(bt[-2] - fp.values["b_tilde_star"]) < 1e-6


# ---------------------------------------------------------------------------
# M-estimation fixed point
# ---------------------------------------------------------------------------


def test_mest_square_closed_form():
    noise = gauss_mixture_prior([0.0], [1.0], [1.0])
    fp = mest_fixed_point(L.SQUARE, noise, 2.0)
    assert abs(fp.values["tau_star"] ** 2 - 1.0) < 1e-9
    assert abs(fp.values["bbar_star"] - 1.0) < 1e-9
    assert abs(fp.values["amse"] - 2.0) < 1e-9
    # general delta, sigma: tau*^2 = sigma^2/(delta-1), b* = 1/(delta-1)
    noise2 = gauss_mixture_prior([0.0], [0.7], [1.0])
    fp2 = mest_fixed_point(L.SQUARE, noise2, 3.0)
    assert abs(fp2.values["tau_star"] ** 2 - 0.49 / 2.0) < 1e-9
    assert abs(fp2.values["bbar_star"] - 0.5) < 1e-9


def test_mest_pseudo_huber_values_and_lower_bound():
    noise = gauss_mixture_prior([0.0], [1.0], [1.0])
    fp = mest_fixed_point(L.Loss("pseudo_huber", b=1.0), noise, 2.0)
    assert abs(fp.values["tau_star"] - 1.02166866376559) < 1e-9
    assert abs(fp.values["bbar_star"] - 1.5471828766129525) < 1e-8
    assert abs(fp.residuals["deriv_eq"]) < 1e-9
    assert abs(fp.residuals["tau_eq"]) < 1e-9
    # asymptotic-variance lower bound: delta tau*^2 >= (1/(1-1/delta)) / I(P)
    bound = (1.0 / (1.0 - 0.5)) * 1.0
    assert fp.values["amse"] >= bound - 1e-9


def test_mest_rejects_delta_at_most_one():
    noise = gauss_mixture_prior([0.0], [1.0], [1.0])
    with pytest.raises(ValueError):
        mest_fixed_point(L.SQUARE, noise, 1.0)


# ---------------------------------------------------------------------------
# logistic MLE fixed point
# ---------------------------------------------------------------------------


def test_logistic_fixed_point_canonical_values():
    fp = logistic_fixed_point(0.2, 5.0)
    assert abs(fp.values["mu_tilde_star"] - 1.2772842462246463) < 1e-7
    assert abs(fp.values["sigma_tilde_star"] - 2.936651035113302) < 1e-6
    assert abs(fp.values["bbar_star"] - 1.351528488392863) < 1e-6
    assert max(abs(r) for r in fp.residuals.values()) < 1e-8
    assert fp.values["mu_tilde_star"] > 1.0


def test_logistic_fixed_point_monotone_in_signal_strength():
    mu_small = logistic_fixed_point(0.2, 5.0).values["mu_tilde_star"]
    mu_large = logistic_fixed_point(0.4, 5.0).values["mu_tilde_star"]
    assert mu_large > mu_small


def test_logistic_fixed_point_nonexistence_reported():
    with pytest.raises(RuntimeError, match="no fixed point found"):
        logistic_fixed_point(5.0, 1.5)
