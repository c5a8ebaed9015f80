import numpy as np
import pytest
import scipy.stats

from abcrecal.errors import ConfigError, DomainError, InsufficientDataError
from abcrecal.models.lognormal_sum import (
    AuxGaussianPosterior,
    LognormalSumModel,
    LognormalSumParams,
    batch_stats,
    default_prior,
    fenton_wilkinson,
    laplace_aux,
    laplace_aux_batch,
    simulate_lognormal_sum,
)


def test_fenton_wilkinson_single_summand_exact():
    alpha, beta_sq = fenton_wilkinson(0.3, 1.2, 1)
    assert alpha == pytest.approx(0.3, abs=1e-14)
    assert beta_sq == pytest.approx(1.44, abs=1e-14)


def test_fenton_wilkinson_reference_values():
    alpha, beta_sq = fenton_wilkinson(0.0, 1.0, 10)
    assert beta_sq == pytest.approx(np.log((np.e - 1) / 10 + 1), abs=1e-12)
    assert beta_sq == pytest.approx(0.15857, abs=5e-6)
    assert alpha == pytest.approx(2.72330, abs=5e-6)


def test_fenton_wilkinson_degenerate_limit():
    alpha, beta_sq = fenton_wilkinson(0.0, 1e-9, 4)
    assert beta_sq < 1e-15
    assert alpha == pytest.approx(np.log(4.0), abs=1e-9)


def test_fenton_wilkinson_moment_matching_identity():
    # the matched lognormal must reproduce the analytic mean and variance
    # of the sum to near machine precision
    for mu in (-1.0, 0.0, 2.0):
        for sigma in (0.3, 1.0, 2.0):
            for L in (1, 4, 25):
                alpha, beta_sq = fenton_wilkinson(mu, sigma, L)
                mean_fit = np.exp(alpha + beta_sq / 2)
                var_fit = np.exp(2 * alpha + beta_sq) * np.expm1(beta_sq)
                mean_true = L * np.exp(mu + sigma**2 / 2)
                var_true = L * np.exp(2 * mu + sigma**2) * np.expm1(sigma**2)
                assert abs(mean_fit / mean_true - 1) < 1e-10
                assert abs(var_fit / var_true - 1) < 1e-10


def test_fenton_wilkinson_validation():
    with pytest.raises(DomainError):
        fenton_wilkinson(0.0, -1.0, 5)
    with pytest.raises(DomainError):
        fenton_wilkinson(0.0, 30.0, 5)
    with pytest.raises(ConfigError):
        fenton_wilkinson(0.0, 1.0, 0)


def test_simulate_degenerate_sigma():
    params = LognormalSumParams(0.5, 0.0, 7, 20)
    data = simulate_lognormal_sum(params, np.random.default_rng(0))
    assert np.allclose(data, 7 * np.exp(0.5), atol=1e-12)


def test_simulate_mean_matches_analytic():
    params = LognormalSumParams(0.0, 1.0, 10, 1_000_000)
    data = simulate_lognormal_sum(params, np.random.default_rng(1))
    assert np.mean(data) == pytest.approx(10 * np.exp(0.5), rel=0.01)


def test_simulate_deterministic():
    params = LognormalSumParams(0.0, 1.0, 10, 50)
    a = simulate_lognormal_sum(params, np.random.default_rng(2))
    b = simulate_lognormal_sum(params, np.random.default_rng(2))
    assert np.array_equal(a, b)


def test_params_validation():
    with pytest.raises(ConfigError):
        LognormalSumParams(0.0, -0.1, 10, 10)
    with pytest.raises(ConfigError):
        LognormalSumParams(0.0, 1.0, 0, 10)
    with pytest.raises(ConfigError):
        LognormalSumParams(np.inf, 1.0, 10, 10)


def _reference_log_joint(theta, y, L):
    # independent composition from scipy building blocks
    mu, sigma = theta
    if sigma <= 0:
        return -np.inf
    beta_sq = np.log((np.exp(sigma**2) - 1) / L + 1)
    alpha = mu + np.log(L) + 0.5 * (sigma**2 - beta_sq)
    loglik = scipy.stats.lognorm.logpdf(y, s=np.sqrt(beta_sq), scale=np.exp(alpha)).sum()
    logprior = (
        scipy.stats.norm.logpdf(mu)
        + scipy.stats.gamma.logpdf(sigma**2, 1.0, scale=1.0)
        + np.log(2 * sigma)
    )
    return loglik + logprior


def _central_gradient(func, theta, step=1e-5):
    grad = np.zeros_like(theta)
    for k in range(theta.size):
        h = step * (1.0 + abs(theta[k]))
        up = theta.copy()
        down = theta.copy()
        up[k] += h
        down[k] -= h
        grad[k] = (func(up) - func(down)) / (2 * h)
    return grad


def test_laplace_mode_is_stationary_by_independent_check():
    rng = np.random.default_rng(3)
    y = simulate_lognormal_sum(LognormalSumParams(0.0, 1.0, 10, 200), rng)
    fit = laplace_aux(y, L=10)
    grad = _central_gradient(lambda t: _reference_log_joint(t, y, 10), fit.mean.copy())
    assert np.max(np.abs(grad)) < 1e-6


def test_laplace_mode_near_pseudo_true_value():
    # large-n fits concentrate at the surrogate model's pseudo-true point
    big = simulate_lognormal_sum(
        LognormalSumParams(0.0, 1.0, 10, 1_000_000), np.random.default_rng(4)
    )
    oracle = laplace_aux(big, L=10).mean
    y = simulate_lognormal_sum(LognormalSumParams(0.0, 1.0, 10, 10_000), np.random.default_rng(5))
    fit = laplace_aux(y, L=10)
    assert np.max(np.abs(fit.mean - oracle)) < 0.05


def test_laplace_covariance_shrinks_like_one_over_n():
    rng = np.random.default_rng(6)
    small = simulate_lognormal_sum(LognormalSumParams(0.0, 1.0, 10, 100), rng)
    big = simulate_lognormal_sum(LognormalSumParams(0.0, 1.0, 10, 10_000), rng)
    cov_small = laplace_aux(small, L=10).cov
    cov_big = laplace_aux(big, L=10).cov
    for j in range(2):
        ratio = cov_big[j, j] / cov_small[j, j]
        assert 0.005 < ratio < 0.02


def test_laplace_validation():
    with pytest.raises(InsufficientDataError):
        laplace_aux(np.array([1.0]))
    with pytest.raises(DomainError):
        laplace_aux(np.array([1.0, -2.0]))


def test_aux_posterior_validation():
    with pytest.raises(ConfigError):
        AuxGaussianPosterior(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ConfigError):
        AuxGaussianPosterior(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    fit = AuxGaussianPosterior(np.zeros(2), np.diag([4.0, 9.0]))
    assert np.allclose(fit.marginal_sds, [2.0, 3.0])


def test_batch_matches_per_dataset_fits():
    rng = np.random.default_rng(7)
    thetas = default_prior().sample(rng, 50)
    datasets = np.empty((50, 10))
    for i in range(50):
        params = LognormalSumParams(thetas[i, 0], thetas[i, 1], 10, 10)
        datasets[i] = simulate_lognormal_sum(params, rng)
    s1, s2 = batch_stats(datasets)
    means, covs, flags = laplace_aux_batch(s1, s2, 10, 10)
    assert not np.any(flags)
    for i in range(50):
        fit = laplace_aux(datasets[i], L=10)
        assert np.max(np.abs(means[i] - fit.mean)) < 1e-6
        assert np.max(np.abs(covs[i] - fit.cov)) < 1e-6


def test_model_particles_smoke():
    model = LognormalSumModel(L=10, n_obs=10)
    bank = model.sample_particles(30, seed=8)
    assert bank.thetas.shape == (30, 2)
    assert bank.summaries.shape == (30, 2)
    assert np.all(np.isfinite(bank.summaries))
    assert np.all(bank.thetas[:, 1] > 0)
    assert list(model.prior.positive) == [False, True]
