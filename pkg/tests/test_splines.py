import numpy as np
import pytest

from abcrecal.errors import ConfigError, InsufficientDataError
from abcrecal.splines import MAX_INTERIOR_KNOTS, SplineFit, fit_smoothing_spline


def test_noiseless_line_reproduced_exactly():
    x = np.linspace(0.0, 4.0, 80)
    y = 1.5 * x - 0.7
    fit = fit_smoothing_spline(x, y)
    grid = np.linspace(0.0, 4.0, 101)
    assert np.max(np.abs(fit.predict(grid) - (1.5 * grid - 0.7))) < 1e-7
    assert fit.residual_sd < 1e-6


def test_weighted_residual_mean_is_zero():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 10, 300)
    y = np.cos(x) + 0.2 * rng.standard_normal(300)
    w = rng.exponential(size=300)
    fit = fit_smoothing_spline(x, y, weights=w)
    resid = y - fit.predict(x)
    assert abs(np.average(resid, weights=w)) < 1e-6


def test_sin_benchmark_rms():
    rng = np.random.default_rng(1)
    x = rng.uniform(0.0, 2.0 * np.pi, 5000)
    y = np.sin(x) + 0.1 * rng.standard_normal(5000)
    fit = fit_smoothing_spline(x, y)
    lo, hi = np.quantile(x, [0.05, 0.95])
    grid = np.linspace(lo, hi, 400)
    rms = np.sqrt(np.mean((fit.predict(grid) - np.sin(grid)) ** 2))
    assert rms < 0.05
    assert fit.residual_sd == pytest.approx(0.1, abs=0.02)
    assert not fit.gcv_fallback


def test_duplicated_point_equals_double_weight():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, 40)
    y = x**2 + 0.05 * rng.standard_normal(40)
    w = np.ones(40)
    w[0] = 2.0
    lam = 1e-4
    weighted = fit_smoothing_spline(x, y, weights=w, penalty=lam)
    stacked = fit_smoothing_spline(np.r_[x, x[0]], np.r_[y, y[0]], penalty=lam)
    grid = np.linspace(0, 1, 50)
    assert np.allclose(weighted.predict(grid), stacked.predict(grid), atol=1e-9)


def test_huge_penalty_collapses_to_line():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 5, 200)
    y = 2.0 * x + 1.0 + 0.3 * rng.standard_normal(200)
    fit = fit_smoothing_spline(x, y, penalty=1e4)
    slope, intercept = np.polyfit(x, y, 1)
    grid = np.linspace(0.5, 4.5, 60)
    assert np.allclose(fit.predict(grid), slope * grid + intercept, atol=0.01)
    assert fit.edof < 2.2


def test_prediction_clamped_outside_range():
    x = np.linspace(0, 1, 50)
    y = np.sin(3 * x)
    fit = fit_smoothing_spline(x, y)
    assert fit.predict(np.array([5.0]))[0] == pytest.approx(fit.predict(np.array([1.0]))[0])
    assert fit.predict(np.array([-5.0]))[0] == pytest.approx(fit.predict(np.array([0.0]))[0])


def test_knot_cap_on_large_samples():
    rng = np.random.default_rng(4)
    x = rng.uniform(0, 1, 10_000)
    y = x + 0.1 * rng.standard_normal(10_000)
    fit = fit_smoothing_spline(x, y)
    assert fit.knots.size <= MAX_INTERIOR_KNOTS + 8
    assert isinstance(fit, SplineFit)


def test_flat_gcv_falls_back_to_moderate_smoothness():
    x = np.linspace(0, 1, 200)
    y = np.zeros(200)
    fit = fit_smoothing_spline(x, y)
    assert fit.gcv_fallback
    assert fit.edof == pytest.approx(20.0, abs=0.5)
    assert np.max(np.abs(fit.predict(x))) < 1e-8


def test_validation_errors():
    x = np.linspace(0, 1, 10)
    with pytest.raises(ConfigError):
        fit_smoothing_spline(x, np.zeros(9))
    with pytest.raises(InsufficientDataError):
        fit_smoothing_spline(np.array([0.0, 1.0, 1.0, 0.0]), np.zeros(4))
    with pytest.raises(ConfigError):
        fit_smoothing_spline(x, np.zeros(10), weights=-np.ones(10))
    with pytest.raises(ConfigError):
        fit_smoothing_spline(x, np.zeros(10), penalty=-1.0)
