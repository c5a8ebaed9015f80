"""Sum-of-lognormals model with a moment-matched lognormal surrogate.

The observation is Y = sum of L iid LogNormal(mu, sigma^2) variables. Its
density has no closed form, but matching the first two moments of the sum
gives a single lognormal LogNormal(fw_alpha, fw_beta_sq) that serves as a
tractable stand-in. The surrogate posterior is summarized by a bivariate
Gaussian at its mode (Laplace fit), which doubles as the summary statistic
and as the auxiliary marginal estimator for recalibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from ..core import Prior, PriorMargin, SimulatorModel
from ..errors import ConfigError, DomainError, FitFailureError, InsufficientDataError

GRAD_TOL = 1e-8
MAX_OPT_ITER = 500
HESSIAN_STEP = 1e-4
FLAG_OK = 0
FLAG_FIT_FAILURE = 1

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LognormalSumParams:
    mu: float
    sigma: float
    L: int
    n: int

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ConfigError("mu must be finite")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError("L must be a positive integer")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be a positive integer")


@dataclass(frozen=True)
class AuxGaussianPosterior:
    """Gaussian fit at the surrogate posterior mode with Hessian covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if mean.shape != (2,) or cov.shape != (2, 2):
            raise ConfigError("mean must be length 2 and cov 2x2")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ConfigError("cov must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ConfigError("cov must be positive definite")

    @property
    def marginal_sds(self):
        return np.sqrt(np.diag(self.cov))


def default_prior():
    """mu ~ N(0, 1); sigma^2 ~ Gamma(1, 1), parameterized by sigma."""
    return Prior(
        [
            PriorMargin("normal", 0.0, 1.0, name="mu"),
            PriorMargin("gamma", 1.0, 1.0, transform="sqrt", name="sigma"),
        ]
    )


def fenton_wilkinson(mu, sigma, L):
    """Moment-matched lognormal parameters (fw_alpha, fw_beta_sq) for the sum."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive")
    if int(L) != L or L < 1:
        raise ConfigError("L must be a positive integer")
    sig2 = sigma * sigma
    if np.any(sig2 > 700):
        raise DomainError("sigma^2 too large; exp(sigma^2) overflows")
    beta_sq = np.log1p(np.expm1(sig2) / L)
    alpha = mu + np.log(L) + 0.5 * (sig2 - beta_sq)
    if alpha.ndim == 0:
        return float(alpha), float(beta_sq)
    return alpha, beta_sq


def simulate_lognormal_sum(params, rng):
    z = rng.standard_normal((params.n, params.L))
    return np.exp(params.mu + params.sigma * z).sum(axis=1)


def _prior_constants(prior):
    if prior.dim != 2:
        raise ConfigError("prior must have two margins")
    m_mu, m_sigma = prior.margins
    if m_mu.kind != "normal" or m_mu.transform is not None:
        raise ConfigError("first margin must be an untransformed normal")
    if m_sigma.kind != "gamma" or m_sigma.transform != "sqrt":
        raise ConfigError("second margin must be gamma on sigma^2")
    return m_mu.a, m_mu.b, m_sigma.a, m_sigma.b


def _objective(mu, sigma, s1, s2, n, L, pc):
    """Log joint density of the surrogate model and its gradient.

    Works through the sufficient statistics s1 = sum(log y) and
    s2 = sum(log y ^ 2). Vectorized over particles. Returns -inf where
    sigma <= 0.
    """
    m0, sd0, a, b = pc
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ok = sigma > 0
    sig = np.where(ok, sigma, 1.0)
    sig2 = sig * sig
    em1 = np.expm1(np.minimum(sig2, 700.0))
    beta_sq = np.log1p(em1 / L)
    dbeta_dsig2 = (em1 + 1.0) / (em1 + L)
    alpha = mu + np.log(L) + 0.5 * (sig2 - beta_sq)
    dalpha_dsig2 = 0.5 * (1.0 - dbeta_dsig2)

    quad = s2 - 2.0 * alpha * s1 + n * alpha * alpha
    loglik = -s1 - 0.5 * n * (_LOG_2PI + np.log(beta_sq)) - quad / (2.0 * beta_sq)
    dl_dalpha = (s1 - n * alpha) / beta_sq
    dl_dbeta = -0.5 * n / beta_sq + quad / (2.0 * beta_sq * beta_sq)

    logprior = (
        -0.5 * ((mu - m0) / sd0) ** 2
        - 0.5 * _LOG_2PI
        - np.log(sd0)
        + a * np.log(b)
        - gammaln(a)
        + (a - 1.0) * np.log(sig2)
        - b * sig2
        + np.log(2.0 * sig)
    )
    value = loglik + logprior
    grad_mu = dl_dalpha - (mu - m0) / (sd0 * sd0)
    grad_sigma = (
        2.0 * sig * (dl_dalpha * dalpha_dsig2 + dl_dbeta * dbeta_dsig2)
        + (2.0 * a - 1.0) / sig
        - 2.0 * b * sig
    )
    value = np.where(ok, value, -np.inf)
    return value, grad_mu, grad_sigma


def _moment_start(s1, s2, n, L):
    alpha_hat = s1 / n
    beta_hat = np.maximum(s2 / n - alpha_hat * alpha_hat, 1e-6)
    sig2 = np.log1p(L * np.expm1(np.minimum(beta_hat, 700.0 / max(L, 1))))
    sigma = np.clip(np.sqrt(sig2), 1e-2, 10.0)
    mu = alpha_hat - np.log(L) - 0.5 * (sig2 - beta_hat)
    return np.clip(mu, -20.0, 20.0), sigma


def _grad_norm(gmu, gsig):
    return np.maximum(np.abs(gmu), np.abs(gsig))


def _newton_refine(mu, sigma, s1, s2, n, L, pc, max_iter=60):
    """Damped Newton ascent on the log joint, vectorized over particles.

    Each iteration works on the still-unconverged rows only, so the cost
    tracks the slow tail rather than the whole batch. A row whose line
    search cannot improve the objective is frozen (its state could never
    change again).
    """
    mu = np.array(mu, dtype=float, copy=True)
    sigma = np.array(sigma, dtype=float, copy=True)
    value, gmu, gsig = _objective(mu, sigma, s1, s2, n, L, pc)
    value = np.array(value, dtype=float, copy=True)
    gmu = np.array(gmu, dtype=float, copy=True)
    gsig = np.array(gsig, dtype=float, copy=True)
    s1b = np.broadcast_to(np.asarray(s1, dtype=float), mu.shape)
    s2b = np.broadcast_to(np.asarray(s2, dtype=float), mu.shape)
    pending = np.flatnonzero(_grad_norm(gmu, gsig) >= GRAD_TOL)
    for _ in range(max_iter):
        if pending.size == 0:
            break
        m, s = mu[pending], sigma[pending]
        v, gm, gs = value[pending], gmu[pending], gsig[pending]
        a1, a2 = s1b[pending], s2b[pending]
        hm = 1e-6 * (1.0 + np.abs(m))
        hs = 1e-6 * (1.0 + np.abs(s))
        _, gmu_p, gsig_p = _objective(m + hm, s, a1, a2, n, L, pc)
        _, gmu_m, gsig_m = _objective(m - hm, s, a1, a2, n, L, pc)
        j00 = (gmu_p - gmu_m) / (2.0 * hm)
        j10 = (gsig_p - gsig_m) / (2.0 * hm)
        _, gmu_p, gsig_p = _objective(m, s + hs, a1, a2, n, L, pc)
        _, gmu_m, gsig_m = _objective(m, s - hs, a1, a2, n, L, pc)
        j01 = (gmu_p - gmu_m) / (2.0 * hs)
        j11 = (gsig_p - gsig_m) / (2.0 * hs)
        j01 = 0.5 * (j01 + j10)

        det = j00 * j11 - j01 * j01
        concave = (j00 < 0) & (det > 0)
        safe_det = np.where(np.abs(det) > 1e-300, det, 1.0)
        step_mu = -(j11 * gm - j01 * gs) / safe_det
        step_sig = -(j00 * gs - j01 * gm) / safe_det
        norm = np.maximum(np.hypot(gm, gs), 1e-300)
        step_mu = np.where(concave, step_mu, 0.1 * gm / norm)
        step_sig = np.where(concave, step_sig, 0.1 * gs / norm)

        lam = np.ones(pending.size)
        for _ in range(20):
            trial_mu = m + lam * step_mu
            trial_sig = s + lam * step_sig
            tval, tgmu, tgsig = _objective(trial_mu, trial_sig, a1, a2, n, L, pc)
            bad = ~np.isfinite(tval) | (tval < v)
            if not np.any(bad):
                break
            lam = np.where(bad, lam * 0.5, lam)
        improve = np.isfinite(tval) & (tval >= v) & (lam > 0)
        rows = pending[improve]
        mu[rows] = trial_mu[improve]
        sigma[rows] = trial_sig[improve]
        value[rows] = tval[improve]
        gmu[rows] = tgmu[improve]
        gsig[rows] = tgsig[improve]
        pending = rows[_grad_norm(tgmu[improve], tgsig[improve]) >= GRAD_TOL]
    return mu, sigma, _grad_norm(gmu, gsig)


def _fd_hessian_cov(mu, sigma, s1, s2, n, L, pc):
    """Covariance = inverse central-difference Hessian of the negative log joint."""

    def neg(m, s):
        value, _, _ = _objective(m, s, s1, s2, n, L, pc)
        return -value

    hm = HESSIAN_STEP * (1.0 + np.abs(mu))
    hs = HESSIAN_STEP * (1.0 + np.abs(sigma))
    f0 = neg(mu, sigma)
    h00 = (neg(mu + hm, sigma) - 2.0 * f0 + neg(mu - hm, sigma)) / (hm * hm)
    h11 = (neg(mu, sigma + hs) - 2.0 * f0 + neg(mu, sigma - hs)) / (hs * hs)
    h01 = (
        neg(mu + hm, sigma + hs)
        - neg(mu + hm, sigma - hs)
        - neg(mu - hm, sigma + hs)
        + neg(mu - hm, sigma - hs)
    ) / (4.0 * hm * hs)
    det = h00 * h11 - h01 * h01
    pd = (h00 > 0) & (det > 0)
    safe_det = np.where(pd, det, 1.0)
    c00 = h11 / safe_det
    c11 = h00 / safe_det
    c01 = -h01 / safe_det
    return c00, c01, c11, pd


def _deterministic_starts(s1, s2, n, L):
    mu0, sigma0 = _moment_start(s1, s2, n, L)
    return [
        (float(mu0), float(sigma0)),
        (0.0, 1.0),
        (0.0, 0.5),
        (1.0, 2.0),
        (-1.0, 1.0),
    ]


_BATCH_RETRY_STARTS = (
    (0.0, 1.0),
    (0.0, 0.5),
    (1.0, 2.0),
    (-1.0, 1.0),
    (2.0, 1.5),
    (-2.0, 0.8),
    (0.5, 3.0),
    (0.0, 0.15),
)


def _laplace_from_stats(s1, s2, n, L, prior):
    pc = _prior_constants(prior)

    def neg_transformed(x):
        m, t = x
        value, gmu, gsig = _objective(m, np.exp(t), s1, s2, n, L, pc)
        return -value, np.array([-gmu, -gsig * np.exp(t)])

    for mu0, sigma0 in _deterministic_starts(s1, s2, n, L):
        res = minimize(
            neg_transformed,
            np.array([mu0, np.log(sigma0)]),
            jac=True,
            method="BFGS",
            options={"gtol": 1e-10, "maxiter": MAX_OPT_ITER},
        )
        mu, sigma, gnorm = _newton_refine(
            np.array([res.x[0]]), np.array([np.exp(res.x[1])]), s1, s2, n, L, pc
        )
        if gnorm[0] >= GRAD_TOL:
            continue
        c00, c01, c11, pd = _fd_hessian_cov(mu, sigma, s1, s2, n, L, pc)
        if not pd[0]:
            continue
        mean = np.array([mu[0], sigma[0]])
        cov = np.array([[c00[0], c01[0]], [c01[0], c11[0]]])
        return AuxGaussianPosterior(mean, cov)
    raise FitFailureError("surrogate posterior mode search failed from all starts")


def laplace_aux(y, L=10, prior=None):
    """Gaussian fit (mode and Hessian covariance) of the surrogate posterior."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise InsufficientDataError("need at least 2 observations")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DomainError("observations must be positive and finite")
    logs = np.log(y)
    return _laplace_from_stats(
        float(logs.sum()), float((logs * logs).sum()), y.size, L, prior or default_prior()
    )


def laplace_aux_batch(s1, s2, n, L, prior=None):
    """Vectorized mode fits for many datasets given their log-data statistics.

    Returns (means (N,2), covs (N,2,2), flags (N,)). Rows that resist the
    moment-matched start are retried, still vectorized, from a cascade of
    fixed starts; only the leftovers go through the slow per-dataset path.
    Particles whose fit fails everywhere are flagged rather than raising.
    """
    prior = prior or default_prior()
    pc = _prior_constants(prior)
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    size = s1.size
    mu0, sigma0 = _moment_start(s1, s2, n, L)
    mu, sigma, gnorm = _newton_refine(mu0, sigma0, s1, s2, n, L, pc)
    for mu_start, sig_start in _BATCH_RETRY_STARTS:
        hard = np.flatnonzero(gnorm >= GRAD_TOL)
        if hard.size == 0:
            break
        mu_t, sig_t, gn_t = _newton_refine(
            np.full(hard.size, mu_start),
            np.full(hard.size, sig_start),
            s1[hard],
            s2[hard],
            n,
            L,
            pc,
        )
        got = gn_t < GRAD_TOL
        rows = hard[got]
        mu[rows] = mu_t[got]
        sigma[rows] = sig_t[got]
        gnorm[rows] = gn_t[got]

    flags = np.zeros(size, dtype=np.uint8)
    for idx in np.flatnonzero(gnorm >= GRAD_TOL):
        try:
            fit = _laplace_from_stats(float(s1[idx]), float(s2[idx]), n, L, prior)
        except FitFailureError:
            flags[idx] = FLAG_FIT_FAILURE
            continue
        mu[idx], sigma[idx] = fit.mean

    c00, c01, c11, pd = _fd_hessian_cov(mu, sigma, s1, s2, n, L, pc)
    flags[~pd] = FLAG_FIT_FAILURE
    means = np.column_stack([mu, sigma])
    covs = np.empty((size, 2, 2))
    covs[:, 0, 0] = np.where(pd, c00, 1.0)
    covs[:, 1, 1] = np.where(pd, c11, 1.0)
    covs[:, 0, 1] = covs[:, 1, 0] = np.where(pd, c01, 0.0)
    return means, covs, flags


def batch_stats(datasets):
    """Sufficient statistics (s1, s2) for a stack of positive datasets."""
    logs = np.log(datasets)
    return logs.sum(axis=1), (logs * logs).sum(axis=1)


class LognormalSumModel(SimulatorModel):
    """Prior, simulator, and mode summary for the sum-of-lognormals problem."""

    name = "lognormal-sum"

    def __init__(self, L=10, n_obs=10):
        if L < 1 or n_obs < 2:
            raise ConfigError("need L >= 1 and n_obs >= 2")
        self.L = int(L)
        self.n_obs = int(n_obs)
        self.prior = default_prior()

    def simulate(self, theta, rng):
        params = LognormalSumParams(float(theta[0]), float(theta[1]), self.L, self.n_obs)
        return simulate_lognormal_sum(params, rng)

    def summarize(self, dataset):
        return self.aux_posterior(dataset).mean

    def aux_posterior(self, dataset):
        return laplace_aux(dataset, L=self.L, prior=self.prior)
