import numpy as np
import pytest
import scipy.special

from abcrecal.diagnostics import (
    CoverageReport,
    coverage_diagnostic,
    kolmogorov_pvalue,
    ks_statistic_uniform,
    ks_two_sample_weighted,
    ks_uniform,
)
from abcrecal.errors import ConfigError, DomainError
from abcrecal.marginals import GaussianMarginal
from abcrecal.models.gaussian import ConjugateNormalModel

POSTERIOR_SD = np.sqrt(0.5)


def test_ks_statistic_single_point():
    assert ks_statistic_uniform(np.array([0.5])) == pytest.approx(0.5)


def test_ks_statistic_evenly_spaced():
    # p_i = i/10 for i = 1..9 sits 0.1 away from the uniform line at both ends
    p = np.arange(1, 10) / 10.0
    assert ks_statistic_uniform(p) == pytest.approx(0.1)


def test_ks_statistic_extremes():
    assert ks_statistic_uniform(np.array([0.0])) == pytest.approx(1.0)
    assert ks_statistic_uniform(np.array([1.0])) == pytest.approx(1.0)


def test_kolmogorov_pvalue_matches_reference():
    for d, n in [(0.05, 400), (0.1, 100), (0.2, 50), (0.5, 10)]:
        expected = scipy.special.kolmogorov(np.sqrt(n) * d)
        assert kolmogorov_pvalue(d, n) == pytest.approx(expected, abs=1e-10)


def test_kolmogorov_pvalue_limits():
    assert kolmogorov_pvalue(0.0, 100) == pytest.approx(1.0)
    assert kolmogorov_pvalue(1.0, 100) < 1e-12


def test_ks_uniform_report_on_uniform_sample():
    rng = np.random.default_rng(0)
    p = rng.uniform(size=5000)
    report = ks_uniform(p)
    assert report.n == 5000
    assert report.p_value > 0.01
    assert report.mean == pytest.approx(0.5, abs=0.02)
    assert abs(report.skewness) < 0.1
    assert report.histogram.shape == (20,)
    assert report.histogram.sum() == 5000


def test_ks_uniform_rejects_biased_sample():
    rng = np.random.default_rng(1)
    p = rng.beta(2.0, 2.0, size=5000)
    report = ks_uniform(p)
    assert report.p_value < 1e-6


def test_ks_uniform_validation():
    with pytest.raises(DomainError):
        ks_uniform(np.array([0.2, 1.2]))
    with pytest.raises(ConfigError):
        ks_uniform(np.array([]))


def test_ks_two_sample_hand_case():
    d = ks_two_sample_weighted(np.array([0.0, 1.0]), np.array([0.5]))
    assert d == pytest.approx(0.5)


def test_ks_two_sample_weighted_hand_case():
    d = ks_two_sample_weighted(
        np.array([0.0, 1.0]), np.array([0.5]), w1=np.array([0.25, 0.75])
    )
    assert d == pytest.approx(0.75)


def test_ks_two_sample_identical():
    x = np.array([1.0, 2.0, 3.0])
    assert ks_two_sample_weighted(x, x) == pytest.approx(0.0)


def _exact_procedure(dataset, rng):
    y = float(np.mean(dataset))
    return [GaussianMarginal(y / 2.0, POSTERIOR_SD)]


def _overconfident_procedure(dataset, rng):
    y = float(np.mean(dataset))
    return [GaussianMarginal(y / 2.0, POSTERIOR_SD / 2.0)]


def _prior_procedure(dataset, rng):
    return [GaussianMarginal(0.0, 1.0)]


def test_coverage_exact_posterior():
    model = ConjugateNormalModel()
    report = coverage_diagnostic(model, _exact_procedure, n_reps=400, seed=2)
    assert isinstance(report, CoverageReport)
    assert report.p.shape == (400, 1)
    assert report.n_used == 400
    assert report.coverage[0] == pytest.approx(0.9, abs=0.05)
    assert report.reports[0].p_value > 0.01


def test_coverage_prior_as_posterior_is_calibrated():
    # reporting the prior back is calibrated against parameters drawn from it
    model = ConjugateNormalModel()
    report = coverage_diagnostic(model, _prior_procedure, n_reps=400, seed=3)
    assert report.coverage[0] == pytest.approx(0.9, abs=0.05)
    assert report.reports[0].p_value > 0.01


def test_coverage_detects_overconfidence():
    model = ConjugateNormalModel()
    report = coverage_diagnostic(model, _overconfident_procedure, n_reps=400, seed=4)
    assert report.coverage[0] < 0.8
    assert report.reports[0].p_value < 1e-4


def test_coverage_reproducible():
    model = ConjugateNormalModel()
    a = coverage_diagnostic(model, _exact_procedure, n_reps=50, seed=5)
    b = coverage_diagnostic(model, _exact_procedure, n_reps=50, seed=5)
    assert np.array_equal(a.p, b.p)


def test_coverage_neighborhood_filter():
    model = ConjugateNormalModel()
    report = coverage_diagnostic(
        model,
        _exact_procedure,
        n_reps=400,
        seed=6,
        neighborhood_frac=0.25,
        s_obs=np.array([0.0]),
    )
    assert report.n_used == 100
    assert report.p.shape == (100, 1)
    assert report.coverage[0] == pytest.approx(0.9, abs=0.09)


def test_coverage_neighborhood_requires_s_obs():
    model = ConjugateNormalModel()
    with pytest.raises(ConfigError):
        coverage_diagnostic(model, _exact_procedure, n_reps=10, seed=7, neighborhood_frac=0.5)


def test_coverage_interval_level_validation():
    model = ConjugateNormalModel()
    with pytest.raises(ConfigError):
        coverage_diagnostic(model, _exact_procedure, n_reps=10, seed=8, interval_level=1.5)
