import numpy as np
import pytest
from scipy.special import ndtr

from abcrecal.errors import ConfigError, DegenerateWeightsError, DomainError
from abcrecal.marginals import GaussianMarginal, WeightedECDF


def test_ecdf_two_equal_points():
    ecdf = WeightedECDF(np.array([1.0, 2.0]))
    assert ecdf.cdf(1.0) == pytest.approx(0.25, abs=1e-15)
    assert ecdf.cdf(2.0) == pytest.approx(0.75, abs=1e-15)
    assert ecdf.cdf(1.5) == pytest.approx(0.5, abs=1e-15)
    assert ecdf.cdf(0.0) == pytest.approx(0.25, abs=1e-15)
    assert ecdf.cdf(5.0) == pytest.approx(0.75, abs=1e-15)
    assert ecdf.quantile(0.5) == pytest.approx(1.5, abs=1e-15)
    assert ecdf.quantile(0.0) == 1.0
    assert ecdf.quantile(1.0) == 2.0


def test_ecdf_point_mass():
    ecdf = WeightedECDF(np.array([5.0, 5.0, 5.0]), np.array([1.0, 2.0, 3.0]))
    assert ecdf.n_points == 1
    assert ecdf.cdf(5.0) == pytest.approx(0.5)
    assert ecdf.cdf(-10.0) == pytest.approx(0.5)
    assert ecdf.quantile(0.9) == 5.0


def test_ecdf_weighted_masses():
    # masses 0.2 at 0 and 0.8 at 1: midpoints 0.1 and 0.6
    ecdf = WeightedECDF(np.array([0.0, 1.0]), np.array([0.2, 0.8]))
    assert ecdf.cdf(0.0) == pytest.approx(0.1, abs=1e-15)
    assert ecdf.cdf(1.0) == pytest.approx(0.6, abs=1e-15)
    assert ecdf.cdf(0.5) == pytest.approx(0.35, abs=1e-15)
    assert ecdf.cdf(100.0) == pytest.approx(0.6, abs=1e-15)


def test_ecdf_drops_zero_weights_and_merges_duplicates():
    ecdf = WeightedECDF(np.array([3.0, 1.0, 2.0, 2.0]), np.array([0.0, 1.0, 1.0, 2.0]))
    assert ecdf.n_points == 2
    assert ecdf.points.tolist() == [1.0, 2.0]
    assert ecdf.masses.tolist() == [0.25, 0.75]
    # midpoints 0.125 and 0.625
    assert ecdf.cdf(2.0) == pytest.approx(0.625, abs=1e-15)


def test_ecdf_values_strictly_inside_unit_interval():
    rng = np.random.default_rng(3)
    values = rng.standard_normal(500)
    weights = rng.exponential(size=500)
    ecdf = WeightedECDF(values, weights)
    x = np.linspace(values.min() - 1, values.max() + 1, 2000)
    out = ecdf.cdf(x)
    assert np.all(out > 0.0) and np.all(out < 1.0)
    assert np.all(np.diff(out) >= -1e-15)


def test_ecdf_quantile_roundtrip_interior():
    rng = np.random.default_rng(4)
    ecdf = WeightedECDF(rng.standard_normal(200), rng.exponential(size=200))
    p = np.linspace(ecdf.midpoints[0], ecdf.midpoints[-1], 101)
    back = ecdf.cdf(ecdf.quantile(p))
    assert np.max(np.abs(back - p)) < 1e-12
    x = np.linspace(np.min(ecdf.points), np.max(ecdf.points), 101)
    back_x = ecdf.quantile(ecdf.cdf(x))
    assert np.max(np.abs(back_x - x)) < 1e-10


def test_ecdf_converges_to_true_cdf():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(100_000)
    ecdf = WeightedECDF(x)
    grid = np.linspace(-3, 3, 61)
    assert np.max(np.abs(ecdf.cdf(grid) - ndtr(grid))) < 0.01


def test_ecdf_validation():
    with pytest.raises(ConfigError):
        WeightedECDF(np.array([]))
    with pytest.raises(ConfigError):
        WeightedECDF(np.array([1.0, np.inf]))
    with pytest.raises(ConfigError):
        WeightedECDF(np.array([1.0, 2.0]), np.array([1.0, -1.0]))
    with pytest.raises(DegenerateWeightsError):
        WeightedECDF(np.array([1.0, 2.0]), np.array([0.0, 0.0]))
    ecdf = WeightedECDF(np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        ecdf.quantile(1.5)
    with pytest.raises(DomainError):
        ecdf.quantile(-0.1)


def test_gaussian_marginal_cdf_quantile():
    g = GaussianMarginal(0.0, 1.0)
    assert g.cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-9)
    assert g.quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-8)
    g2 = GaussianMarginal(2.0, 3.0)
    p = np.linspace(1e-6, 1 - 1e-6, 101)
    assert np.max(np.abs(g2.cdf(g2.quantile(p)) - p)) < 1e-12


def test_gaussian_marginal_validation():
    with pytest.raises(ConfigError):
        GaussianMarginal(0.0, 0.0)
    g = GaussianMarginal(0.0, 1.0)
    with pytest.raises(DomainError):
        g.quantile(0.0)
    with pytest.raises(DomainError):
        g.quantile(1.0)
