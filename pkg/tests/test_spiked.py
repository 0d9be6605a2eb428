import numpy as np
import pytest

from amp.denoisers import bayes_policy, custom_policy, tanh_denoiser
from amp.ensembles import RngStream
from amp.priors import gauss_mixture_prior, rademacher_prior
from amp.spiked import (
    InitSpec,
    confidence_sets,
    empirical_bayes_params,
    lambda_hat_from_top_eigenvalue,
    power_equivalence_check,
    run_rect_spiked,
    run_spiked,
    sample_rect_spiked,
    sample_spiked,
)

PRIOR = rademacher_prior()
TANH_PAIR = (np.tanh, lambda x: 1.0 / np.cosh(x) ** 2)


def test_sample_spiked_zero_signal_is_pure_noise():
    inst = sample_spiked(PRIOR, 0.0, 100, RngStream(1, 0))
    assert np.array_equal(inst.A, inst.W.entries)
    assert abs(np.mean(inst.v**2) - 1.0) < 1e-12


def test_sample_spiked_requires_unit_second_moment():
    bad = gauss_mixture_prior([0.0], [2.0], [1.0])
    with pytest.raises(ValueError):
        sample_spiked(bad, 1.5, 50, RngStream(1, 1))


def test_lambda_hat_inversion():
    assert abs(lambda_hat_from_top_eigenvalue(1.7 + 1.0 / 1.7) - 1.7) < 1e-12
    assert abs(lambda_hat_from_top_eigenvalue(2.0) - 1.0) < 1e-12
    assert lambda_hat_from_top_eigenvalue(1.99) is None


def test_spectral_init_requires_supercritical_signal():
    inst = sample_spiked(PRIOR, 0.9, 200, RngStream(1, 2))
    with pytest.raises(ValueError):
        run_spiked(inst, InitSpec(kind="spectral"), bayes_policy(PRIOR), 2)
    with pytest.raises(ValueError):
        InitSpec(kind="spectral", c=0.0)
    with pytest.raises(ValueError):
        run_spiked(inst, InitSpec(kind="bogus"), bayes_policy(PRIOR), 2)


def test_constant_zero_init_stays_at_zero():
    inst = sample_spiked(PRIOR, 1.7, 300, RngStream(2, 0))
    policy = custom_policy([tanh_denoiser(1.0, 1.0)] * 3)
    run = run_spiked(inst, InitSpec(kind="constant", c=0.0), policy, 3, prior=PRIOR)
    for v in run.iterates["v"]:
        assert np.all(v == 0.0)
    for vh in run.iterates["vhat"]:
        assert np.all(vh == 0.0)


def test_oracle_init_empirical_bayes_params_track_state_evolution():
    inst = sample_spiked(PRIOR, 1.7, 2000, RngStream(3, 0))
    run = run_spiked(inst, InitSpec(kind="oracle", mu0=0.6, sigma0=0.8),
                     bayes_policy(PRIOR), 4, rng=RngStream(3, 1))
    se = run.side_info["se"]
    for k in range(1, 5):
        mu_hat, sigma_hat, lam_hat = empirical_bayes_params(run, k)
        # mu_hat is a difference of two norms of similar size, so its
        # finite-n fluctuations are noticeably larger than sigma_hat's
        assert abs(mu_hat - se.mu[k]) < 0.2
        assert abs(sigma_hat - se.sigma[k]) < 0.05
    assert lam_hat is None
    with pytest.raises(ValueError):
        empirical_bayes_params(run, 0)


def test_spectral_init_reaches_fixed_point_accuracy():
    inst = sample_spiked(PRIOR, 1.7, 2000, RngStream(4, 0))
    run = run_spiked(inst, InitSpec(kind="spectral"), bayes_policy(PRIOR), 8)
    # limiting correlation sqrt(rho*)/lam for the matched prior
    assert abs(run.metrics["corr_abs"][-1] - np.sqrt(2.356806693340235) / 1.7) < 0.05
    assert "lambda1" in run.side_info
    lam_hat = lambda_hat_from_top_eigenvalue(run.side_info["lambda1"])
    assert abs(lam_hat - 1.7) < 0.15


def test_confidence_sets_validation_and_degenerate_alpha():
    inst = sample_spiked(PRIOR, 1.7, 1000, RngStream(5, 0))
    run = run_spiked(inst, InitSpec(kind="spectral"), bayes_policy(PRIOR), 3)
    with pytest.raises(ValueError):
        confidence_sets(run, 2, 0.0)
    with pytest.raises(ValueError):
        confidence_sets(run, 2, 1.5)
    out = confidence_sets(run, 2, 1.0)
    assert np.allclose(out.intervals[:, 0], out.intervals[:, 1])
    out2 = confidence_sets(run, 2, 0.1)
    cov = out2.coverage(inst.v)
    assert 0.7 <= cov <= 1.0
    assert np.all((out2.p_values >= 0) & (out2.p_values <= 1))


def test_confidence_sets_reject_zero_signal_estimate():
    inst = sample_spiked(PRIOR, 1.7, 200, RngStream(5, 1))
    policy = custom_policy([tanh_denoiser(1.0, 1.0)] * 2)
    run = run_spiked(inst, InitSpec(kind="constant", c=0.0), policy, 2, prior=PRIOR)
    with pytest.raises(ValueError):
        confidence_sets(run, 1, 0.1)


def test_power_equivalence_with_leading_eigenvector():
    inst = sample_spiked(PRIOR, 1.7, 2000, RngStream(6, 0))
    rep = power_equivalence_check(inst, 20, RngStream(6, 1))
    run = rep["run"]
    # the first step has no Onsager memory, so v^1 = A vhat^0 exactly
    assert np.array_equal(run.iterates["v"][1], inst.A @ run.iterates["vhat"][0])
    align = rep["alignment"]
    assert align[-1] >= 0.98
    assert align[0] < align[-1]
    assert abs(rep["mu"][-1] - np.sqrt(1.7**2 - 1.0)) < 1e-3
    assert np.allclose(rep["beta"], np.sqrt(1.0 + np.asarray(rep["mu"]) ** 2))
    sub = sample_spiked(PRIOR, 0.8, 100, RngStream(6, 2))
    with pytest.raises(ValueError):
        power_equivalence_check(sub, 3, RngStream(6, 3))


def test_rect_spiked_first_step_and_null_signal():
    A, u, v = sample_rect_spiked(PRIOR, PRIOR, 0.0, 800, 400, RngStream(7, 0))
    assert A.shape == (800, 400)
    gen = RngStream(7, 1).generator(0)
    v0 = gen.standard_normal(400)
    ident = (lambda x: x, lambda x: np.ones_like(x))
    run = run_rect_spiked(A, [ident] + [TANH_PAIR] * 2, [TANH_PAIR] * 3, v0, 3,
                          u_truth=u, v_truth=v)
    assert np.array_equal(run.iterates["u"][0], A @ v0)
    assert run.metrics["corr_abs_v"][-1] <= 0.15


def test_rect_spiked_correlation_improves_with_iterations():
    K = 5
    cors = []
    for rep in range(10):
        A, u, v = sample_rect_spiked(PRIOR, PRIOR, 1.5, 1000, 500, RngStream(8, rep))
        gen = RngStream(9, rep).generator(0)
        v0 = 0.5 * v + np.sqrt(0.75) * gen.standard_normal(500)
        run = run_rect_spiked(A, [TANH_PAIR] * K, [TANH_PAIR] * K, v0, K,
                              u_truth=u, v_truth=v)
        cors.append(run.metrics["corr_abs_v"])
    mean = np.mean(cors, axis=0)
    assert np.all(np.diff(mean) > 0)
    assert mean[-1] > mean[0] + 0.03


def test_run_records_sign_minimized_risk():
    inst = sample_spiked(PRIOR, 1.7, 500, RngStream(10, 0))
    run = run_spiked(inst, InitSpec(kind="spectral"), bayes_policy(PRIOR), 3)
    assert len(run.metrics["mse"]) == 3
    assert len(run.metrics["mse_sign_min"]) == 3
    for a, b in zip(run.metrics["mse_sign_min"], run.metrics["mse"]):
        assert a <= b + 1e-12
