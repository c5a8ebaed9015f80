"""Deterministic banana-shaped toy model y = theta_1 + theta_2^2.

With independent standard normal priors and a single observed point, the
posterior concentrates on the parabola theta_1 = y - theta_2^2. The exact
theta_2 marginal in the vanishing-bandwidth limit has unnormalized density
exp(-(y - t^2)^2 / 2 - t^2 / 2), which this module integrates numerically
for reference moments and samples by inverse CDF on a fine grid.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np
import scipy.integrate

from ..core import Prior, PriorMargin, SimulatorModel
from ..errors import ConfigError

Y_OBS_DEFAULT = 1.0
_GRID_HALF_WIDTH = 6.0
_GRID_SIZE = 24001


class TwistedModel(SimulatorModel):
    """Two-parameter deterministic model with scalar output."""

    name = "twisted-normal"

    def __init__(self):
        self.prior = Prior(
            [
                PriorMargin("normal", 0.0, 1.0, name="theta_1"),
                PriorMargin("normal", 0.0, 1.0, name="theta_2"),
            ]
        )

    def simulate(self, theta, rng):
        return np.array([theta[0] + theta[1] ** 2])

    def summarize(self, dataset):
        return np.asarray(dataset, dtype=float)


def theta2_log_density(t, y_obs=Y_OBS_DEFAULT):
    """Unnormalized log density of the exact theta_2 marginal."""
    t = np.asarray(t, dtype=float)
    return -0.5 * (y_obs - t * t) ** 2 - 0.5 * t * t


def posterior_moments(y_obs=Y_OBS_DEFAULT):
    """Reference moments of the exact posterior by adaptive quadrature.

    Returns a dict with the theta_2 moments, the expectation and variance
    of theta_1 - theta_2, and the quadrature normalizer.
    """

    def integrate(f):
        value, _ = scipy.integrate.quad(
            lambda t: f(t) * np.exp(theta2_log_density(t, y_obs)),
            -8.0,
            8.0,
            epsabs=1e-13,
            epsrel=1e-13,
            limit=400,
        )
        return value

    z = integrate(lambda t: 1.0)
    m1 = integrate(lambda t: t) / z
    m2 = integrate(lambda t: t * t) / z
    m3 = integrate(lambda t: t**3) / z
    m4 = integrate(lambda t: t**4) / z
    # theta_1 - theta_2 = y - t^2 - t under the posterior
    mean_diff = y_obs - m2 - m1
    ex2 = integrate(lambda t: (y_obs - t * t - t) ** 2) / z
    var_diff = ex2 - mean_diff * mean_diff
    return {
        "y_obs": y_obs,
        "normalizer": z,
        "theta2_mean": m1,
        "theta2_sq_mean": m2,
        "theta2_cube_mean": m3,
        "theta2_fourth_mean": m4,
        "mean_diff": mean_diff,
        "var_diff": var_diff,
    }


def load_reference_moments():
    """Frozen quadrature moments shipped with the package."""
    path = resources.files("abcrecal.models").joinpath("twisted_oracle.json")
    return json.loads(path.read_text())


def _marginal_grid(y_obs):
    t = np.linspace(-_GRID_HALF_WIDTH, _GRID_HALF_WIDTH, _GRID_SIZE)
    log_pdf = theta2_log_density(t, y_obs)
    pdf = np.exp(log_pdf - log_pdf.max())
    cdf = scipy.integrate.cumulative_trapezoid(pdf, t, initial=0.0)
    cdf /= cdf[-1]
    return t, cdf


def sample_exact_posterior(n, rng, y_obs=Y_OBS_DEFAULT):
    """Draw (theta_1, theta_2) pairs from the exact posterior."""
    if n < 1:
        raise ConfigError("n must be positive")
    t_grid, cdf = _marginal_grid(y_obs)
    u = rng.uniform(size=n)
    t = np.interp(u, cdf, t_grid)
    theta1 = y_obs - t * t
    return np.column_stack([theta1, t])
