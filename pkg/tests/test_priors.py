import numpy as np
import pytest
from scipy.stats import norm

from amp.priors import (
    Prior,
    discrete_prior,
    gauss_mixture_prior,
    mmse,
    posterior_mean,
    posterior_mean_deriv,
    posterior_moments,
    rademacher_prior,
    three_point_prior,
)


def test_discrete_moments():
    p = discrete_prior([0.0, 2.0], [0.75, 0.25])
    assert abs(p.m1 - 0.5) < 1e-15
    assert abs(p.m2 - 1.0) < 1e-15
    assert abs(p.var - 0.75) < 1e-15


def test_rademacher_and_three_point():
    r = rademacher_prior()
    assert abs(r.m1) < 1e-15 and abs(r.m2 - 1.0) < 1e-15
    t = three_point_prior(0.1, np.sqrt(10.0))
    assert abs(t.m2 - 1.0) < 1e-12
    assert abs(t.m1) < 1e-15
    w0 = dict(zip(np.round(t.locations, 12), t.weights))[0.0]
    assert abs(w0 - 0.9) < 1e-15


def test_gauss_mixture_moments():
    g = gauss_mixture_prior([0.0, 1.0], [1.0, 2.0], [0.5, 0.5])
    assert abs(g.m1 - 0.5) < 1e-15
    assert abs(g.m2 - (0.5 * 1.0 + 0.5 * (1.0 + 4.0))) < 1e-12


def test_prior_validation():
    with pytest.raises(ValueError):
        discrete_prior([0.0, 1.0], [0.6, 0.6])
    with pytest.raises(ValueError):
        discrete_prior([1.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        gauss_mixture_prior([0.0], [-1.0], [1.0])


def test_json_roundtrip():
    for p in (three_point_prior(0.1, np.sqrt(10.0)),
              gauss_mixture_prior([0.0, 2.0], [1.0, 0.5], [0.3, 0.7])):
        q = Prior.from_json(p.to_json())
        assert q.kind == p.kind
        assert abs(q.m1 - p.m1) < 1e-15 and abs(q.m2 - p.m2) < 1e-15


def test_posterior_mean_rademacher_is_tanh():
    y = np.linspace(-4.0, 4.0, 41)
    for mu, sigma in ((0.7, 1.3), (2.0, 0.5)):
        got = posterior_mean(rademacher_prior(), mu, sigma, y)
        assert np.allclose(got, np.tanh(mu * y / sigma**2), atol=1e-12)


def test_posterior_mean_two_atom_hand_formula():
    # prior (3/4) at 0 + (1/4) at 2, mu = sigma = 1, y = 1: two-term Bayes ratio
    p = discrete_prior([0.0, 2.0], [0.75, 0.25])
    num = 2.0 * 0.25 * norm.pdf(1.0 - 2.0)
    den = 0.75 * norm.pdf(1.0) + 0.25 * norm.pdf(1.0 - 2.0)
    assert abs(posterior_mean(p, 1.0, 1.0, 1.0) - num / den) < 1e-12


def test_posterior_mean_uninformative_and_degenerate():
    p = discrete_prior([0.0, 2.0], [0.75, 0.25])
    y = np.array([-3.0, 0.0, 5.0])
    assert np.allclose(posterior_mean(p, 0.0, 1.0, y), p.m1)
    # sigma = 0 returns y/mu clipped to the support hull
    assert np.allclose(posterior_mean(p, 2.0, 0.0, np.array([-1.0, 1.0, 9.0])),
                       [0.0, 0.5, 2.0])
    with pytest.raises(ValueError):
        posterior_moments(p, 0.0, 0.0, y)


def test_tweedie_identity():
    # Direct Bayes ratio equals (y + sigma^2 (log p)'(y)) / mu with the marginal
    # density assembled independently here.
    p = three_point_prior(0.2, 2.0)
    mu, sigma = 1.3, 0.8
    y = np.linspace(-5.0, 5.0, 81)
    dens = np.zeros_like(y)
    ddens = np.zeros_like(y)
    for loc, w in zip(p.locations, p.weights):
        phi = norm.pdf(y - mu * loc, scale=sigma)
        dens += w * phi
        ddens += w * phi * (-(y - mu * loc) / sigma**2)
    tweedie = (y + sigma**2 * ddens / dens) / mu
    assert np.max(np.abs(posterior_mean(p, mu, sigma, y) - tweedie)) < 1e-8


def test_posterior_mean_deriv_matches_finite_difference():
    p = discrete_prior([-1.0, 0.0, 3.0], [0.3, 0.4, 0.3])
    mu, sigma = 0.9, 1.1
    y = np.linspace(-4.0, 4.0, 37)
    h = 1e-5
    fd = (posterior_mean(p, mu, sigma, y + h) - posterior_mean(p, mu, sigma, y - h)) / (2 * h)
    got = posterior_mean_deriv(p, mu, sigma, y)
    assert np.max(np.abs(got - fd)) < 1e-6


def test_posterior_moments_separated_atoms_stable():
    p = discrete_prior([-50.0, 50.0], [0.5, 0.5])
    m, v = posterior_moments(p, 1.0, 1.0, np.array([49.0, -49.0, 0.0]))
    assert np.all(np.isfinite(m)) and np.all(np.isfinite(v))
    assert abs(m[0] - 50.0) < 1e-8 and abs(m[1] + 50.0) < 1e-8


def test_mmse_endpoints_and_monotonicity():
    p = rademacher_prior()
    assert abs(mmse(p, 0.0) - p.var) < 1e-12
    assert mmse(p, np.inf) == 0.0
    with pytest.raises(ValueError):
        mmse(p, -0.1)
    grid = [0.0, 0.3, 1.0, 1.89, 5.0, 20.0]
    vals = [mmse(p, r) for r in grid]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_mmse_rademacher_matches_monte_carlo():
    rho = 1.89
    gen = np.random.default_rng(7)
    n = 10_000_000
    v = gen.choice([-1.0, 1.0], size=n)
    obs = rho * v + np.sqrt(rho) * gen.standard_normal(n)
    mc = float(np.mean((v - np.tanh(obs)) ** 2))
    assert abs(mmse(rademacher_prior(), rho) - mc) < 1e-3


def test_sampling_moments_and_determinism():
    p = three_point_prior(0.1, np.sqrt(10.0))
    gen1 = np.random.default_rng(3)
    gen2 = np.random.default_rng(3)
    x1 = p.sample(200_000, gen1)
    x2 = p.sample(200_000, gen2)
    assert np.array_equal(x1, x2)
    assert abs(np.mean(x1 * x1) - 1.0) < 0.02
