"""One-dimensional marginal posterior estimators with invertible CDFs.

The weighted empirical CDF interpolates linearly through the midpoints of the
cumulative-weight jumps (the classic plotting-position convention), so evaluated
values stay strictly inside (0, 1) and the quantile function is an exact inverse
on the interior range.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigError, DegenerateWeightsError, DomainError

__all__ = ["WeightedECDF", "GaussianMarginal"]


class WeightedECDF:
    """Smoothed empirical CDF of a weighted sample.

    Zero-weight points are dropped and duplicate values merged at build time.
    ``cdf`` is flat at ``first_mass/2`` below the sample and ``1 - last_mass/2``
    above it; ``quantile`` clamps to the sample range outside the interior.
    """

    def __init__(self, values: np.ndarray, weights: np.ndarray | None = None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise ConfigError("need at least one value")
        if not np.all(np.isfinite(values)):
            raise ConfigError("values must be finite")
        if weights is None:
            weights = np.ones_like(values)
        else:
            weights = np.asarray(weights, dtype=float).ravel()
            if weights.shape != values.shape:
                raise ConfigError("weights must match values in length")
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise ConfigError("weights must be finite and nonnegative")
        keep = weights > 0
        if not np.any(keep):
            raise DegenerateWeightsError("all weights are zero")
        values, weights = values[keep], weights[keep]
        points, inverse = np.unique(values, return_inverse=True)
        masses = np.bincount(inverse, weights=weights)
        masses = masses / masses.sum()
        cum = np.cumsum(masses)
        cum[-1] = 1.0
        self.points = points
        self.masses = masses
        self.midpoints = cum - 0.5 * masses

    @property
    def n_points(self) -> int:
        return self.points.size

    def cdf(self, x) -> np.ndarray | float:
        out = np.interp(x, self.points, self.midpoints)
        return float(out) if np.isscalar(x) else out

    def quantile(self, p) -> np.ndarray | float:
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr < 0) or np.any(p_arr > 1) or not np.all(np.isfinite(p_arr)):
            raise DomainError("quantile levels must lie in [0, 1]")
        out = np.interp(p_arr, self.midpoints, self.points)
        return float(out) if np.isscalar(p) else out


@dataclasses.dataclass(frozen=True)
class GaussianMarginal:
    """Closed-form normal marginal with the same cdf/quantile interface."""

    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not self.sd > 0 or not math.isfinite(self.sd) or not math.isfinite(self.mean):
            raise ConfigError("GaussianMarginal needs finite mean and sd > 0")

    def cdf(self, x) -> np.ndarray | float:
        out = ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)
        return float(out) if np.isscalar(x) else out

    def quantile(self, p) -> np.ndarray | float:
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 0) or np.any(p_arr >= 1):
            raise DomainError("normal quantile levels must lie strictly in (0, 1)")
        out = self.mean + self.sd * ndtri(p_arr)
        return float(out) if np.isscalar(p) else out
