"""Weighted local-linear adjustments of particles toward an observed summary.

Parameters are shifted by the fitted linear trend of theta on (s - s_obs), which
relocates each particle to where it would have landed had its summary hit the
target. Probabilities get the analogous adjustment on the logit scale.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import ConfigError, InsufficientDataError

__all__ = ["LinearFit", "fit_weighted_linear", "adjust_theta", "adjust_p"]

P_CLAMP_EPS = 1e-9


@dataclasses.dataclass
class LinearFit:
    """Weighted least-squares fit of multi-response linear model with intercept."""

    intercept: np.ndarray  # (d,)
    slopes: np.ndarray  # (q, d)
    rank_deficient: bool
    dropped: tuple[int, ...] = ()

    def predict(self, predictors: np.ndarray) -> np.ndarray:
        predictors = np.atleast_2d(np.asarray(predictors, dtype=float))
        return self.intercept + predictors @ self.slopes


def fit_weighted_linear(predictors: np.ndarray, responses: np.ndarray, weights: np.ndarray) -> LinearFit:
    """Weighted least squares with intercept via column-pivoted QR.

    Collinear design columns are dropped (their slopes set to zero) and the fit
    is flagged rank deficient. Requires more positive weights than columns.
    """
    X = np.atleast_2d(np.asarray(predictors, dtype=float))
    Y = np.asarray(responses, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    w = np.asarray(weights, dtype=float).ravel()
    n, q = X.shape
    if Y.shape[0] != n or w.shape != (n,):
        raise ConfigError("predictors, responses and weights must share their first dimension")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError("weights must be finite and nonnegative")
    if int(np.sum(w > 0)) < q + 1:
        raise InsufficientDataError(f"need at least {q + 1} positive weights, have {int(np.sum(w > 0))}")
    sw = np.sqrt(w)
    design = np.column_stack([np.ones(n), X]) * sw[:, None]
    target = Y * sw[:, None]
    Q, R, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag.max() * max(design.shape) * np.finfo(float).eps if diag.max() > 0 else 0.0
    rank = int(np.sum(diag > tol))
    if rank == 0:
        raise InsufficientDataError("design matrix is identically zero")
    coef = np.zeros((q + 1, Y.shape[1]))
    rhs = Q[:, :rank].T @ target
    coef[piv[:rank]] = scipy.linalg.solve_triangular(R[:rank, :rank], rhs)
    dropped = tuple(int(j - 1) for j in sorted(piv[rank:]) if j > 0)
    return LinearFit(coef[0], coef[1:], rank < q + 1, dropped)


def adjust_theta(
    thetas: np.ndarray,
    summaries: np.ndarray,
    s_obs: np.ndarray,
    weights: np.ndarray,
    log_margins: np.ndarray | None = None,
) -> tuple[np.ndarray, LinearFit]:
    """Shift particles by the fitted trend: ``theta - B (s - s_obs)``.

    Margins flagged in ``log_margins`` (strictly positive parameters) are
    adjusted on the log scale and exponentiated back.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    s_obs = np.asarray(s_obs, dtype=float).ravel()
    d = thetas.shape[1]
    if log_margins is None:
        log_margins = np.zeros(d, dtype=bool)
    log_margins = np.asarray(log_margins, dtype=bool)
    if log_margins.shape != (d,):
        raise ConfigError("log_margins must have one flag per parameter margin")
    responses = thetas.copy()
    if np.any(log_margins):
        cols = responses[:, log_margins]
        if np.any(cols <= 0):
            raise ConfigError("log-scale adjustment needs strictly positive parameter values")
        responses[:, log_margins] = np.log(cols)
    diff = summaries - s_obs
    fit = fit_weighted_linear(diff, responses, weights)
    adjusted = responses - diff @ fit.slopes
    if np.any(log_margins):
        # extreme extrapolations must stay finite for downstream marginals
        shifted = np.clip(adjusted[:, log_margins], -745.0, 709.0)
        adjusted[:, log_margins] = np.exp(shifted)
    return adjusted, fit


def adjust_p(
    p: np.ndarray,
    summaries: np.ndarray,
    s_obs: np.ndarray,
    weights: np.ndarray,
    eps: float = P_CLAMP_EPS,
) -> tuple[np.ndarray, LinearFit]:
    """Remove the linear trend of logit(p) on (s - s_obs), margin by margin."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ConfigError("p values must lie in [0, 1]")
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    s_obs = np.asarray(s_obs, dtype=float).ravel()
    clamped = np.clip(p, eps, 1.0 - eps)
    logit = np.log(clamped) - np.log1p(-clamped)
    diff = summaries - s_obs
    fit = fit_weighted_linear(diff, logit, weights)
    adjusted = logit - diff @ fit.slopes
    out = 1.0 / (1.0 + np.exp(-adjusted))
    return np.clip(out, eps, 1.0 - eps), fit
