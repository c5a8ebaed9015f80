"""Marginal recalibration of approximate posterior samples.

Each accepted particle is scored by where its true parameter falls within the
marginal posterior the procedure would have reported for *that particle's own
summary* (estimated leave-one-out from the rest of the bank). Those probability
positions are then pushed through the observed-data marginal quantile functions,
which corrects marginal under- or over-confidence of the original procedure.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .core import ParticleSet
from .errors import ConfigError
from .kernels import bandwidth_all_nonzero, bandwidth_for_count, kernel_weight, scaled_distance
from .marginals import WeightedECDF
from .regression import adjust_p, adjust_theta
from .rejection import ABCApproximation

__all__ = [
    "ESTIMATORS",
    "P_ADJUSTMENTS",
    "RecalibrationResult",
    "estimate_marginals",
    "local_marginals",
    "target_marginals",
    "compute_p",
    "recalibrate",
    "recalibrate_gaussian",
    "write_recalibrated_csv",
]

ESTIMATORS = ("ecdf", "regression")
P_ADJUSTMENTS = ("none", "logit-regression")

FLAG_OK = 0
FLAG_DEGENERATE_LOCAL = 1

# keeps closed-form normal CDF values off exact 0/1 before quantile mapping
_P_FLOOR = 1e-15


@dataclasses.dataclass
class RecalibrationResult:
    """Recalibrated particles with their probability positions and weights."""

    theta_hat: np.ndarray  # (B, d)
    p: np.ndarray  # (B, d) positions used for the quantile mapping
    p_raw: np.ndarray  # (B, d) positions before any p adjustment
    weights: np.ndarray  # (B,)
    flags: np.ndarray  # (B,) int
    accepted_index: np.ndarray  # (B,) indices into the source bank
    estimator: str
    m_local: int
    p_adjust: str


def _local_weights(
    summaries: np.ndarray,
    s: np.ndarray,
    accept_count: int,
    kernel_family: str,
    scale: np.ndarray,
    exclude: int | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Kernel weights against ``s`` over the bank, optionally leaving one out.

    Returns ``(weights, keep_mask, h)`` where ``weights`` has zeros outside the
    kept rows. The acceptance count is capped at the available row count minus
    one; at the cap the bandwidth keeps every remaining row nonzero.
    """
    n = summaries.shape[0]
    mask = np.ones(n, dtype=bool)
    if exclude is not None:
        mask[exclude] = False
    avail = int(mask.sum())
    if avail < 2:
        raise ConfigError("need at least two particles to estimate a local marginal")
    dists = scaled_distance(summaries[mask], s, scale)
    m = min(accept_count, avail)
    if m >= avail:
        h = bandwidth_all_nonzero(dists)
    else:
        h, _ = bandwidth_for_count(dists, m)
    w = np.zeros(n)
    w[mask] = kernel_weight(dists, h, kernel_family)
    return w, mask, h


def estimate_marginals(
    bank: ParticleSet,
    s: np.ndarray,
    accept_count: int,
    kernel_family: str = "epanechnikov",
    scale: np.ndarray | None = None,
    estimator: str = "ecdf",
    log_margins: np.ndarray | None = None,
    exclude: int | None = None,
) -> list[WeightedECDF]:
    """Marginal posterior estimates the procedure reports for summary ``s``.

    ``estimator="ecdf"`` returns kernel-weighted ECDFs of the bank parameters;
    ``"regression"`` first shifts the parameters by a local-linear fit toward
    ``s``. ``exclude`` removes one bank row (leave-one-out estimation).
    """
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}")
    s = np.asarray(s, dtype=float).ravel()
    if scale is None:
        scale = np.ones(s.size)
    w, mask, _ = _local_weights(bank.summaries, s, accept_count, kernel_family, scale, exclude)
    values = bank.thetas
    if estimator == "regression":
        adjusted, _ = adjust_theta(
            bank.thetas[mask], bank.summaries[mask], s, w[mask], log_margins
        )
        values = np.empty_like(bank.thetas)
        values[mask] = adjusted
    return [WeightedECDF(values[mask, j], w[mask]) for j in range(bank.theta_dim)]


def local_marginals(
    approx: ABCApproximation,
    index: int,
    m_local: int | None = None,
    estimator: str = "ecdf",
    log_margins: np.ndarray | None = None,
) -> list[WeightedECDF]:
    """Leave-one-out marginal estimates at particle ``index``'s own summary."""
    if not 0 <= index < approx.n:
        raise ConfigError(f"particle index {index} out of range")
    m = approx.accept_count if m_local is None else m_local
    return estimate_marginals(
        approx.particles,
        approx.particles.summaries[index],
        m,
        kernel_family=approx.kernel.family,
        scale=approx.scale,
        estimator=estimator,
        log_margins=log_margins,
        exclude=index,
    )


def target_marginals(
    approx: ABCApproximation,
    estimator: str = "ecdf",
    log_margins: np.ndarray | None = None,
) -> list[WeightedECDF]:
    """Marginal estimates at the observed summary, using the bank's own weights."""
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}")
    bank = approx.particles
    if estimator == "regression":
        keep = bank.weights > 0
        adjusted, _ = adjust_theta(
            bank.thetas[keep], bank.summaries[keep], approx.s_obs, bank.weights[keep], log_margins
        )
        return [WeightedECDF(adjusted[:, j], bank.weights[keep]) for j in range(bank.theta_dim)]
    return [WeightedECDF(bank.thetas[:, j], bank.weights) for j in range(bank.theta_dim)]


def compute_p(
    approx: ABCApproximation,
    m_local: int | None = None,
    estimator: str = "ecdf",
    log_margins: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Probability positions of each accepted particle in its own local marginals.

    Returns ``(p, flags)`` over the accepted particles, in bank order. A local
    marginal that collapses to a single support point is flagged and scored 0.5.
    """
    accepted = approx.accepted_index
    d = approx.particles.theta_dim
    p = np.empty((accepted.size, d))
    flags = np.zeros(accepted.size, dtype=int)
    for row, i in enumerate(accepted):
        margins = local_marginals(approx, int(i), m_local, estimator, log_margins)
        theta_i = approx.particles.thetas[i]
        for j, margin in enumerate(margins):
            p[row, j] = margin.cdf(theta_i[j])
        if any(margin.n_points <= 1 for margin in margins):
            flags[row] = FLAG_DEGENERATE_LOCAL
    return p, flags


def recalibrate(
    approx: ABCApproximation,
    estimator: str = "ecdf",
    m_local: int | None = None,
    p_adjust: str = "none",
    log_margins: np.ndarray | None = None,
) -> RecalibrationResult:
    """Recalibrate the accepted particles of an ABC approximation.

    The local (leave-one-out) and observed-data marginals come from the same
    procedure: the approximation's kernel family, summary scaling, and
    acceptance count (``m_local`` overrides the count for the local fits only).
    """
    if p_adjust not in P_ADJUSTMENTS:
        raise ConfigError(f"unknown p adjustment {p_adjust!r}")
    m = approx.accept_count if m_local is None else int(m_local)
    if m < 1:
        raise ConfigError("m_local must be >= 1")
    accepted = approx.accepted_index
    p_raw, flags = compute_p(approx, m, estimator, log_margins)
    weights = approx.particles.weights[accepted]
    weights = weights / weights.sum()
    if p_adjust == "logit-regression":
        p_used, _ = adjust_p(p_raw, approx.particles.summaries[accepted], approx.s_obs, weights)
    else:
        p_used = p_raw
    targets = target_marginals(approx, estimator, log_margins)
    theta_hat = np.column_stack([targets[j].quantile(p_used[:, j]) for j in range(len(targets))])
    return RecalibrationResult(
        theta_hat, p_used, p_raw, weights, flags, accepted, estimator, m, p_adjust
    )


def recalibrate_gaussian(
    thetas: np.ndarray,
    weights: np.ndarray,
    local_means: np.ndarray,
    local_sds: np.ndarray,
    target_means: np.ndarray,
    target_sds: np.ndarray,
    summaries: np.ndarray | None = None,
    s_obs: np.ndarray | None = None,
    p_adjust: str = "none",
) -> RecalibrationResult:
    """Recalibration when the marginals are closed-form normals.

    ``local_means``/``local_sds`` give each particle's own-summary marginal
    (one row per particle), ``target_means``/``target_sds`` the observed-data
    marginal. Used with auxiliary-model posteriors instead of bank ECDFs.
    """
    if p_adjust not in P_ADJUSTMENTS:
        raise ConfigError(f"unknown p adjustment {p_adjust!r}")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    local_means = np.atleast_2d(np.asarray(local_means, dtype=float))
    local_sds = np.atleast_2d(np.asarray(local_sds, dtype=float))
    if local_means.shape != thetas.shape or local_sds.shape != thetas.shape:
        raise ConfigError("local marginal parameters must match the theta matrix shape")
    if np.any(local_sds <= 0) or not np.all(np.isfinite(local_sds)):
        raise ConfigError("local marginal sds must be finite and positive")
    target_means = np.asarray(target_means, dtype=float).ravel()
    target_sds = np.asarray(target_sds, dtype=float).ravel()
    if target_means.size != thetas.shape[1] or target_sds.size != thetas.shape[1]:
        raise ConfigError("target marginal parameters must give one value per margin")
    if np.any(target_sds <= 0):
        raise ConfigError("target marginal sds must be positive")
    weights = np.asarray(weights, dtype=float).ravel()
    weights = weights / weights.sum()

    p_raw = np.clip(ndtr((thetas - local_means) / local_sds), _P_FLOOR, 1.0 - _P_FLOOR)
    if p_adjust == "logit-regression":
        if summaries is None or s_obs is None:
            raise ConfigError("p adjustment needs summaries and s_obs")
        p_used, _ = adjust_p(p_raw, summaries, s_obs, weights)
    else:
        p_used = p_raw
    theta_hat = target_means + target_sds * ndtri(p_used)
    flags = np.zeros(thetas.shape[0], dtype=int)
    return RecalibrationResult(
        theta_hat,
        p_used,
        p_raw,
        weights,
        flags,
        np.arange(thetas.shape[0]),
        "gaussian-aux",
        thetas.shape[0],
        p_adjust,
    )


def write_recalibrated_csv(path: str | Path, result: RecalibrationResult) -> None:
    """Write ``theta_hat_1..d, p_1..d, weight, flag`` rows with full precision."""
    path = Path(path)
    d = result.theta_hat.shape[1]
    header = (
        [f"theta_hat_{j + 1}" for j in range(d)]
        + [f"p_{j + 1}" for j in range(d)]
        + ["weight", "flag"]
    )
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(result.theta_hat.shape[0]):
            row = (
                [repr(float(v)) for v in result.theta_hat[i]]
                + [repr(float(v)) for v in result.p[i]]
                + [repr(float(result.weights[i])), str(int(result.flags[i]))]
            )
            fh.write(",".join(row) + "\n")
