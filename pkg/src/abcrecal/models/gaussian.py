"""Conjugate normal location model with a closed-form posterior.

Used as a calibration target: any diagnostic or recalibration routine can
be checked against the exact posterior N(post_mean, post_sd^2).
"""

from __future__ import annotations

import numpy as np

from ..core import Prior, PriorMargin, SimulatorModel
from ..errors import ConfigError
from ..marginals import GaussianMarginal


class ConjugateNormalModel(SimulatorModel):
    """n_obs draws y ~ N(theta, obs_sd^2) with theta ~ N(prior_mean, prior_sd^2)."""

    name = "conjugate-normal"

    def __init__(self, prior_mean=0.0, prior_sd=1.0, obs_sd=1.0, n_obs=1):
        if prior_sd <= 0 or obs_sd <= 0:
            raise ConfigError("standard deviations must be positive")
        if int(n_obs) != n_obs or n_obs < 1:
            raise ConfigError("n_obs must be a positive integer")
        self.prior_mean = float(prior_mean)
        self.prior_sd = float(prior_sd)
        self.obs_sd = float(obs_sd)
        self.n_obs = int(n_obs)
        self.prior = Prior([PriorMargin("normal", self.prior_mean, self.prior_sd, name="theta")])

    def simulate(self, theta, rng):
        return theta[0] + self.obs_sd * rng.standard_normal(self.n_obs)

    def summarize(self, dataset):
        return np.array([np.mean(dataset)])

    def posterior_marginal(self, dataset):
        """Exact posterior of theta given the dataset."""
        ybar = float(np.mean(dataset))
        prior_prec = 1.0 / self.prior_sd**2
        data_prec = self.n_obs / self.obs_sd**2
        precision = prior_prec + data_prec
        mean = (self.prior_mean * prior_prec + ybar * data_prec) / precision
        return GaussianMarginal(mean, np.sqrt(1.0 / precision))
