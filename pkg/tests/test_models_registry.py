import numpy as np
import pytest

from abcrecal.errors import ConfigError
from abcrecal.models import MODEL_NAMES, get_model
from abcrecal.models.gaussian import ConjugateNormalModel


def test_registry_names():
    assert set(MODEL_NAMES) == {
        "conjugate-normal",
        "lognormal-sum",
        "twisted-normal",
        "stereo-spherical",
        "stereo-ellipsoidal",
    }


def test_get_model_rejects_unknown():
    with pytest.raises(ConfigError):
        get_model("no-such-model")


def test_get_model_builds_twisted():
    model = get_model("twisted-normal")
    assert model.theta_dim == 2


def test_conjugate_normal_posterior():
    model = ConjugateNormalModel()
    marginal = model.posterior_marginal(np.array([1.0]))
    assert marginal.mean == pytest.approx(0.5)
    assert marginal.sd == pytest.approx(np.sqrt(0.5))


def test_conjugate_normal_multi_obs_posterior():
    model = ConjugateNormalModel(prior_mean=1.0, prior_sd=2.0, obs_sd=0.5, n_obs=4)
    data = np.array([0.2, 0.4, 0.6, 0.8])
    marginal = model.posterior_marginal(data)
    prec = 1 / 4.0 + 4 / 0.25
    expected_mean = (1.0 / 4.0 + 0.5 * 16) / prec
    assert marginal.mean == pytest.approx(expected_mean)
    assert marginal.sd == pytest.approx(np.sqrt(1 / prec))


def test_conjugate_normal_validation():
    with pytest.raises(ConfigError):
        ConjugateNormalModel(prior_sd=0.0)
    with pytest.raises(ConfigError):
        ConjugateNormalModel(n_obs=0)
