"""Calibration diagnostics: uniformity tests and the prior-predictive coverage check.

If an inference procedure is well calibrated, the probability position of the
true generating parameter inside the procedure's reported marginal is uniform
on (0, 1) across prior-predictive replicates. Nonuniformity localizes bias
(skew) or over/under-confidence (U or hump shapes).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .core import SimulatorModel, particle_stream
from .errors import ConfigError, DomainError
from .kernels import mad_scale, scaled_distance

__all__ = [
    "UniformityReport",
    "ks_statistic_uniform",
    "kolmogorov_pvalue",
    "ks_uniform",
    "ks_two_sample_weighted",
    "CoverageReport",
    "coverage_diagnostic",
]

HIST_BINS = 20


@dataclasses.dataclass
class UniformityReport:
    """Kolmogorov-Smirnov uniformity summary of a probability sample."""

    n: int
    d_stat: float
    p_value: float
    mean: float
    skewness: float
    histogram: np.ndarray  # counts over 20 equal bins of [0, 1]


def ks_statistic_uniform(p: np.ndarray) -> float:
    """Sup distance between the sample ECDF and the uniform CDF on [0, 1]."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise ConfigError("need at least one value")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise DomainError("uniformity test values must lie in [0, 1]")
    x = np.sort(p)
    n = x.size
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - x)
    d_minus = np.max(x - (grid - 1.0 / n))
    return float(max(d_plus, d_minus))


def kolmogorov_pvalue(d_stat: float, n: int, term_tol: float = 1e-12) -> float:
    """Asymptotic KS tail probability 2*sum((-1)^(k-1) exp(-2 k^2 n D^2))."""
    if n < 1 or d_stat < 0:
        raise ConfigError("need n >= 1 and a nonnegative statistic")
    a = 2.0 * n * d_stat * d_stat
    if a == 0:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 100001):
        term = 2.0 * math.exp(-a * k * k)
        if term < term_tol:
            break
        total += sign * term
        sign = -sign
    return float(min(1.0, max(0.0, total)))


def _skewness(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    mu = x.mean()
    sd = x.std()
    if sd == 0:
        return 0.0
    return float(np.mean(((x - mu) / sd) ** 3))


def ks_uniform(p: np.ndarray) -> UniformityReport:
    """Test a sample of probability positions against Uniform(0, 1)."""
    p = np.asarray(p, dtype=float).ravel()
    d = ks_statistic_uniform(p)
    hist, _ = np.histogram(p, bins=HIST_BINS, range=(0.0, 1.0))
    return UniformityReport(p.size, d, kolmogorov_pvalue(d, p.size), float(p.mean()), _skewness(p), hist)


def ks_two_sample_weighted(
    x1: np.ndarray,
    x2: np.ndarray,
    w1: np.ndarray | None = None,
    w2: np.ndarray | None = None,
) -> float:
    """Sup distance between two weighted step ECDFs."""
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    w1 = np.ones_like(x1) if w1 is None else np.asarray(w1, dtype=float).ravel()
    w2 = np.ones_like(x2) if w2 is None else np.asarray(w2, dtype=float).ravel()
    if x1.size == 0 or x2.size == 0 or w1.sum() <= 0 or w2.sum() <= 0:
        raise ConfigError("both samples need positive total weight")
    order1, order2 = np.argsort(x1), np.argsort(x2)
    v1, c1 = x1[order1], np.cumsum(w1[order1]) / w1.sum()
    v2, c2 = x2[order2], np.cumsum(w2[order2]) / w2.sum()
    grid = np.concatenate([v1, v2])
    f1 = np.concatenate([[0.0], c1])[np.searchsorted(v1, grid, side="right")]
    f2 = np.concatenate([[0.0], c2])[np.searchsorted(v2, grid, side="right")]
    return float(np.max(np.abs(f1 - f2)))


@dataclasses.dataclass
class CoverageReport:
    """Prior-predictive coverage diagnostic over replicated inferences."""

    p: np.ndarray  # (n_reps, d) probability positions of the true parameters
    reports: list[UniformityReport]
    interval_level: float
    coverage: np.ndarray  # (d,) fraction of replicates with p inside the central interval
    n_used: int


def coverage_diagnostic(
    model: SimulatorModel,
    procedure,
    n_reps: int,
    seed: int,
    interval_level: float = 0.9,
    neighborhood_frac: float | None = None,
    s_obs: np.ndarray | None = None,
) -> CoverageReport:
    """Run the coverage property check for an inference procedure.

    ``procedure(dataset, rng)`` must return one marginal (an object with a
    ``cdf`` method) per parameter. Each replicate draws a parameter from the
    prior, simulates data, runs the procedure, and records the probability
    position of the generating parameter. ``neighborhood_frac`` keeps only the
    replicates whose summaries fall nearest ``s_obs``, concentrating the
    diagnostic near the observed data.
    """
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    if not 0 < interval_level < 1:
        raise ConfigError("interval_level must lie in (0, 1)")
    if neighborhood_frac is not None:
        if not 0 < neighborhood_frac <= 1:
            raise ConfigError("neighborhood_frac must lie in (0, 1]")
        if s_obs is None:
            raise ConfigError("neighborhood_frac needs s_obs")
    d = model.theta_dim
    p = np.empty((n_reps, d))
    summaries = None
    for r in range(n_reps):
        rng = particle_stream(seed, r)
        theta0 = model.prior.sample(rng, 1)[0]
        dataset = model.simulate(theta0, rng)
        if neighborhood_frac is not None:
            s0 = np.asarray(model.summarize(dataset), dtype=float)
            if summaries is None:
                summaries = np.empty((n_reps, s0.size))
            summaries[r] = s0
        margins = procedure(dataset, rng)
        if len(margins) != d:
            raise ConfigError("procedure returned a wrong number of marginals")
        for j in range(d):
            p[r, j] = margins[j].cdf(theta0[j])
    if neighborhood_frac is not None:
        keep_n = max(1, int(round(neighborhood_frac * n_reps)))
        dists = scaled_distance(summaries, np.asarray(s_obs, dtype=float), mad_scale(summaries))
        keep = np.argsort(dists, kind="stable")[:keep_n]
        p = p[np.sort(keep)]
    lo = (1.0 - interval_level) / 2.0
    hi = 1.0 - lo
    coverage = np.mean((p > lo) & (p < hi), axis=0)
    reports = [ks_uniform(p[:, j]) for j in range(d)]
    return CoverageReport(p, reports, interval_level, coverage, p.shape[0])
