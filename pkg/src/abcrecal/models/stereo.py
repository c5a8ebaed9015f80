"""Planar sections of random inclusions in a slab.

A slab of unit cross-sectional area and thickness ``T`` contains a Poisson
number of inclusions.  Each inclusion has a largest diameter ``V`` that
exceeds a threshold ``v0`` by a generalized Pareto amount, and a center depth
uniform over the slab.  The plane ``z = T/2`` cuts some inclusions; section
sizes above ``v0`` form the observed dataset.  Inclusions are spheres of
diameter ``V`` or ellipsoids with principal diameters ``(V, U1*V, U2*V)`` in
uniformly random orientation.

Two summaries are provided: a quantile vector and the auxiliary vector
``(n', sigma, xi)`` from a generalized Pareto fit to the observed sections.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
from scipy.optimize import minimize_scalar

from ..core import Prior, PriorMargin, SimulatorModel
from ..errors import ConfigError, DomainError, FitFailureError
from ..marginals import GaussianMarginal
from ..splines import fit_smoothing_spline

__all__ = [
    "GPDParams",
    "StereoConfig",
    "StereoModel",
    "SplineGaussianAux",
    "gpd_cdf",
    "gpd_quantile",
    "gpd_sample",
    "gpd_mle",
    "gpd_mle_batch",
    "expected_min_size",
    "truncation_probability",
    "validate_truncation",
    "random_rotation",
    "ellipse_section",
    "simulate_stereo",
    "simulate_stereo_fast",
    "stereo_summaries",
    "stereo_aux_summaries",
    "spline_gaussian_aux",
    "FLAG_OK",
    "FLAG_TOO_FEW",
    "FLAG_MLE_FAILURE",
]

XI_ZERO_EPS = 1e-8
V0_DEFAULT = 5.0
SLAB_FACTOR = 50.0
MIN_EXCEEDANCES = 5
MIN_AUX_BANK = 100
TRUNCATION_TOL = 1e-6
SHAPES = ("spherical", "ellipsoidal")

FLAG_OK = 0
FLAG_TOO_FEW = 1
FLAG_MLE_FAILURE = 2

PRIOR_BOUNDS_DEFAULT = ((5.0, 300.0), (0.1, 10.0), (-1.0, 2.0))

_MLE_MAX_ROUNDS = 48
_XI_FLOOR = -0.999999


@dataclasses.dataclass(frozen=True)
class GPDParams:
    """Generalized Pareto law for diameter exceedances above ``v0``."""

    sigma: float
    xi: float
    v0: float = V0_DEFAULT

    def __post_init__(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigError("gpd sigma must be finite and positive")
        if not (np.isfinite(self.xi) and np.isfinite(self.v0)):
            raise ConfigError("gpd xi and v0 must be finite")

    @property
    def upper_endpoint(self) -> float:
        if self.xi < 0:
            return self.v0 - self.sigma / self.xi
        return np.inf


def gpd_cdf(v, params: GPDParams):
    """CDF of the diameter ``V = v0 + exceedance`` at ``v >= v0``.

    Values past the upper endpoint (xi < 0) map to 1.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < params.v0):
        raise DomainError("gpd_cdf requires v >= v0")
    w = (v - params.v0) / params.sigma
    if abs(params.xi) < XI_ZERO_EPS:
        out = -np.expm1(-w)
    else:
        t = np.maximum(params.xi * w, -1.0)
        with np.errstate(divide="ignore"):
            out = -np.expm1(-np.log1p(t) / params.xi)
    return out if out.ndim else float(out)


def _exceedance_quantile(u, sigma, xi):
    """Quantile of the exceedance (above-threshold) distribution."""
    if abs(xi) < XI_ZERO_EPS:
        return -sigma * np.log1p(-u)
    return sigma * np.expm1(-xi * np.log1p(-u)) / xi


def gpd_quantile(u, params: GPDParams):
    """Inverse CDF for u in [0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise DomainError("gpd_quantile requires u in [0, 1)")
    out = params.v0 + _exceedance_quantile(u, params.sigma, params.xi)
    return out if out.ndim else float(out)


def gpd_sample(params: GPDParams, rng: np.random.Generator, size=None):
    """Inverse-transform draws of the diameter V."""
    u = rng.random(size)
    return params.v0 + _exceedance_quantile(u, params.sigma, params.xi)


def _survival_mass(sigma, xi, width):
    """Integral of the exceedance survival function from 0 to ``width``."""
    width = np.asarray(width, dtype=float)
    if abs(xi) < XI_ZERO_EPS:
        out = -sigma * np.expm1(-width / sigma)
    elif abs(xi - 1.0) < XI_ZERO_EPS:
        out = sigma * np.log1p(width / sigma)
    else:
        t = xi * width / sigma
        if xi < 0:
            t = np.maximum(t, -1.0)
        with np.errstate(divide="ignore"):
            out = sigma / (xi - 1.0) * np.expm1((xi - 1.0) / xi * np.log1p(t))
    return out if out.ndim else float(out)


def _invert_survival_mass(sigma, xi, mass):
    """Width w with ``_survival_mass(sigma, xi, w) == mass``."""
    mass = np.asarray(mass, dtype=float)
    if abs(xi) < XI_ZERO_EPS:
        out = -sigma * np.log1p(-mass / sigma)
    elif abs(xi - 1.0) < XI_ZERO_EPS:
        out = sigma * np.expm1(mass / sigma)
    else:
        out = sigma / xi * np.expm1(xi / (xi - 1.0) * np.log1p(mass * (xi - 1.0) / sigma))
    return out if out.ndim else float(out)


def expected_min_size(params: GPDParams, cap: float) -> float:
    """E[min(V, cap)] for the diameter V."""
    if cap <= params.v0:
        return float(cap)
    return params.v0 + _survival_mass(params.sigma, params.xi, cap - params.v0)


def _profile_stats(eta, w):
    """Mean log(1 + eta*w) and the profile log-likelihood at eta."""
    n = w.size
    if eta == 0.0:
        k = 0.0
        ll = -n * (np.log(np.mean(w)) + 1.0)
        return k, ll
    t = eta * w
    if np.min(t) <= -1.0:
        return np.nan, -np.inf
    k = float(np.mean(np.log1p(t)))
    ll = -n * (np.log(k / eta) + k + 1.0)
    return k, ll


def gpd_mle(values, v0: float = 0.0) -> tuple[float, float]:
    """Maximum-likelihood (sigma, xi) for observations strictly above ``v0``.

    Profiles the likelihood over eta = xi/sigma: given eta the inner maximum
    has xi = mean log(1 + eta*w), sigma = xi/eta.  A coarse grid over eta is
    refined by bounded Brent search, with xi constrained above -1 to dodge
    the unbounded-likelihood pathology of very short-tailed fits.
    """
    w = np.asarray(values, dtype=float).ravel() - v0
    if w.size and np.min(w) <= 0:
        raise DomainError("gpd_mle requires all values strictly above v0")
    if w.size < MIN_EXCEEDANCES:
        raise FitFailureError(f"gpd_mle needs at least {MIN_EXCEEDANCES} exceedances")
    wmax = float(np.max(w))
    wmean = float(np.mean(w))
    if wmax - float(np.min(w)) <= 1e-12 * wmax:
        raise FitFailureError("gpd_mle sample is degenerate (all values equal)")

    tiny = 1e-9 / wmean
    lo = -(1.0 - 1e-9) / wmax
    hi = 1e4 / wmean
    grid = np.concatenate([-np.geomspace(-lo, tiny, 81), np.geomspace(tiny, hi, 81)])
    lls = np.full(grid.size, -np.inf)
    for i, eta in enumerate(grid):
        k, ll = _profile_stats(eta, w)
        if np.isfinite(ll) and k > _XI_FLOOR:
            lls[i] = ll
    best = int(np.argmax(lls))
    lo_b = grid[max(best - 1, 0)]
    hi_b = grid[min(best + 1, grid.size - 1)]
    res = minimize_scalar(
        lambda e: -_profile_stats(e, w)[1],
        bounds=(lo_b, hi_b),
        method="bounded",
        options={"xatol": 1e-13 * max(abs(lo_b), abs(hi_b))},
    )
    eta_hat = float(res.x)
    k_hat, ll_hat = _profile_stats(eta_hat, w)
    _, ll_zero = _profile_stats(0.0, w)
    if ll_zero >= ll_hat:
        return wmean, 0.0
    sigma = k_hat / eta_hat
    return float(sigma), float(k_hat)


def _segment_means(flat, starts, lengths):
    return np.add.reduceat(flat, starts) / lengths


def gpd_mle_batch(values, lengths, v0: float = 0.0):
    """Profile MLEs for many samples stored back to back in ``values``.

    Vectorized safeguarded Newton ascent on the profile score, with a scalar
    :func:`gpd_mle` fallback for the stragglers.  Returns ``(sigma, xi, ok)``;
    entries with fewer than 5 exceedances or failed fits have ``ok`` False.
    """
    flat = np.asarray(values, dtype=float).ravel() - v0
    lengths = np.asarray(lengths, dtype=np.int64).ravel()
    if flat.size != int(lengths.sum()):
        raise ConfigError("values length must equal the sum of lengths")
    if flat.size and np.min(flat) <= 0:
        raise DomainError("gpd_mle_batch requires all values strictly above v0")
    d = lengths.size
    sigma = np.full(d, np.nan)
    xi = np.full(d, np.nan)
    ok = lengths >= MIN_EXCEEDANCES

    starts = np.zeros(d, dtype=np.int64)
    np.cumsum(lengths[:-1], out=starts[1:])
    nz = lengths > 0
    wmax = np.ones(d)
    wmin = np.ones(d)
    wmean = np.ones(d)
    msq = np.ones(d)
    if np.any(nz):
        st, ln = starts[nz], lengths[nz].astype(float)
        wmax[nz] = np.maximum.reduceat(flat, st)
        wmin[nz] = np.minimum.reduceat(flat, st)
        wmean[nz] = _segment_means(flat, st, ln)
        msq[nz] = _segment_means(flat * flat, st, ln)
    degenerate = (wmax - wmin) <= 1e-12 * wmax
    ok &= ~degenerate

    var = np.maximum(msq - wmean**2, 1e-300)
    xi0 = np.clip(0.5 * (1.0 - wmean**2 / var), -0.9, 0.9)
    eta = xi0 / (wmean * (1.0 - xi0))
    tiny = 1e-9 / wmean
    eta = np.where(np.abs(eta) < tiny, tiny, eta)
    floor = -(1.0 - 1e-9) / wmax
    ceil = 1e4 / wmean

    best_eta = eta.copy()
    best_ll = np.full(d, -np.inf)
    converged = np.zeros(d, dtype=bool)

    for _ in range(_MLE_MAX_ROUNDS):
        active = ok & ~converged
        if not active.any():
            break
        fmask = np.repeat(active, lengths)
        wa = flat[fmask]
        la = lengths[active]
        na = la.astype(float)
        sa = np.zeros(la.size, dtype=np.int64)
        np.cumsum(la[:-1], out=sa[1:])
        ea = eta[active]

        t = np.repeat(ea, la) * wa
        np.maximum(t, -1.0 + 1e-15, out=t)
        k = _segment_means(np.log1p(t), sa, na)
        r = wa / (1.0 + t)
        k1 = _segment_means(r, sa, na)
        k2 = _segment_means(r * r, sa, na)
        ll = -na * (np.log(k / ea) + k + 1.0)

        improved = ll >= best_ll[active]
        b_eta = np.where(improved, ea, best_eta[active])
        b_ll = np.where(improved, ll, best_ll[active])
        best_eta[active] = b_eta
        best_ll[active] = b_ll

        g = 1.0 / ea - k1 / k - k1
        gp = k2 * (1.0 / k + 1.0) + (k1 / k) ** 2 - 1.0 / ea**2
        step = np.where(gp < 0, g / gp, 0.0)
        push = np.sign(g) * np.maximum(0.5 * np.abs(ea), 0.1 / wmean[active])
        cand = np.where(gp < 0, ea - step, ea + push)
        # not an improvement: retreat halfway toward the best point seen
        cand = np.where(improved, cand, 0.5 * (ea + b_eta))
        # deep in the short-tail pathology region: pull toward zero
        cand = np.where(k < -0.999, 0.5 * ea, cand)
        cand = np.clip(cand, floor[active], ceil[active])
        ta = tiny[active]
        cand = np.where(np.abs(cand) < ta, np.where(cand >= 0, ta, -ta), cand)

        delta = np.abs(cand - ea)
        conv = improved & (delta <= 1e-11 * (np.abs(cand) + ta))
        eta[active] = cand
        converged[active] |= conv

    final = ok.copy()
    if final.any():
        fm = np.repeat(final, lengths)
        wf = flat[fm]
        lf = lengths[final]
        nf = lf.astype(float)
        sf = np.zeros(lf.size, dtype=np.int64)
        np.cumsum(lf[:-1], out=sf[1:])
        ef = best_eta[final]
        t = np.repeat(ef, lf) * wf
        np.maximum(t, -1.0 + 1e-15, out=t)
        kf = _segment_means(np.log1p(t), sf, nf)
        xi[final] = kf
        sigma[final] = kf / ef

    retry = ok & (
        ~converged
        | ~np.isfinite(xi)
        | ~np.isfinite(sigma)
        | (xi <= -0.9999)
        | (sigma <= 0)
    )
    ends = starts + lengths
    for i in np.flatnonzero(retry):
        try:
            sigma[i], xi[i] = gpd_mle(flat[starts[i] : ends[i]], 0.0)
        except (FitFailureError, DomainError):
            ok[i] = False
            sigma[i] = np.nan
            xi[i] = np.nan
    sigma[~ok] = np.nan
    xi[~ok] = np.nan
    return sigma, xi, ok


def random_rotation(rng: np.random.Generator, size=None):
    """Rotation matrices uniform over SO(3), via normalized quaternions."""
    q = rng.standard_normal(4 if size is None else (size, 4))
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rot = np.empty(q.shape[:-1] + (3, 3))
    rot[..., 0, 0] = 1 - 2 * (y * y + z * z)
    rot[..., 0, 1] = 2 * (x * y - z * w)
    rot[..., 0, 2] = 2 * (x * z + y * w)
    rot[..., 1, 0] = 2 * (x * y + z * w)
    rot[..., 1, 1] = 1 - 2 * (x * x + z * z)
    rot[..., 1, 2] = 2 * (y * z - x * w)
    rot[..., 2, 0] = 2 * (x * z - y * w)
    rot[..., 2, 1] = 2 * (y * z + x * w)
    rot[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return rot


def _ellipse_sections(diams, rot, dz):
    """Largest section diameters for a batch of ellipsoids, nan when missed.

    The ellipsoid is the set x'Qx <= 1 with Q = R diag(4/d^2) R'.  Writing
    Q = [[A, b], [b', q]] over (x, y | z), the plane at offset dz cuts it iff
    k = 1 - dz^2 (q - b'A^{-1}b) > 0, and the section's largest diameter is
    2 sqrt(k / lambda_min(A)).
    """
    d = 4.0 / np.asarray(diams, dtype=float) ** 2
    q = np.einsum("kmi,ki,kni->kmn", rot, d, rot)
    a00 = q[:, 0, 0]
    a01 = q[:, 0, 1]
    a11 = q[:, 1, 1]
    b0 = q[:, 0, 2]
    b1 = q[:, 1, 2]
    qzz = q[:, 2, 2]
    det = a00 * a11 - a01 * a01
    lmin = 0.5 * (a00 + a11) - np.sqrt(0.25 * (a00 - a11) ** 2 + a01 * a01)
    # extreme axis ratios can underflow det to 0; nan propagates to a miss
    with np.errstate(divide="ignore", invalid="ignore"):
        binv = (a11 * b0 * b0 - 2.0 * a01 * b0 * b1 + a00 * b1 * b1) / det
        k = 1.0 - dz * dz * (qzz - binv)
        out = np.where(k > 0, 2.0 * np.sqrt(np.abs(k) / lmin), np.nan)
    return out


def ellipse_section(diameters, rotation, dz):
    """Largest diameter of the plane section of a rotated ellipsoid.

    ``diameters`` are the principal diameters (a, b, c) with a >= b >= c > 0;
    ``dz`` is the signed offset of the plane from the center.  Returns None
    when the plane misses (or is tangent to) the ellipsoid.
    """
    a, b, c = (float(v) for v in diameters)
    if not (a >= b >= c > 0):
        raise DomainError("ellipse_section requires diameters a >= b >= c > 0")
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != (3, 3):
        raise DomainError("rotation must be a 3x3 matrix")
    out = _ellipse_sections(
        np.array([[a, b, c]]), rotation[None, :, :], np.array([float(dz)])
    )[0]
    return float(out) if np.isfinite(out) else None


@dataclasses.dataclass(frozen=True)
class StereoConfig:
    """Slab geometry and inclusion law for the section simulator.

    ``lam`` is the inclusion rate per unit slab volume; the slab has unit
    cross-sectional area, thickness ``slab_thickness`` (default 50 * v0) and
    the cutting plane sits at half depth.
    """

    lam: float
    gpd: GPDParams
    shape: str = "spherical"
    slab_thickness: float | None = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError("lam must be finite and >= 0")
        if self.shape not in SHAPES:
            raise ConfigError(f"shape must be one of {SHAPES}")
        if self.gpd.v0 <= 0:
            raise ConfigError("stereo config needs gpd.v0 > 0")
        if self.slab_thickness is None:
            object.__setattr__(self, "slab_thickness", SLAB_FACTOR * self.gpd.v0)
        if not (np.isfinite(self.slab_thickness) and self.slab_thickness >= 2 * self.gpd.v0):
            raise ConfigError("slab_thickness must be finite and >= 2 * v0")

    @property
    def plane_z(self) -> float:
        return 0.5 * self.slab_thickness


def truncation_probability(config: StereoConfig) -> float:
    """Chance that one inclusion diameter exceeds half the slab thickness."""
    return float(1.0 - gpd_cdf(config.plane_z, config.gpd))


def validate_truncation(config: StereoConfig, tol: float = TRUNCATION_TOL) -> None:
    """Reject configs whose slab is too thin for the inclusion law."""
    p = truncation_probability(config)
    if not p < tol:
        raise ConfigError(
            f"P(V > slab_thickness/2) = {p:.3g} >= {tol:g}; increase slab_thickness"
        )


def _finish_sections(y, v0):
    y = y[np.isfinite(y)]
    return y[y > v0]


def simulate_stereo(config: StereoConfig, rng: np.random.Generator) -> np.ndarray:
    """Observed section sizes from the direct slab construction.

    Draw order per dataset: the Poisson count, then center depths, then
    diameters, then (ellipsoids only) the two axis fractions and the
    orientation quaternions.
    """
    gpd = config.gpd
    t_slab = config.slab_thickness
    count = int(rng.poisson(config.lam * t_slab))
    z = rng.uniform(0.0, t_slab, count)
    v = gpd_sample(gpd, rng, count)
    dz = z - config.plane_z
    if config.shape == "spherical":
        hit = np.abs(dz) < 0.5 * v
        y = np.sqrt(v[hit] ** 2 - 4.0 * dz[hit] ** 2)
    else:
        u = rng.random((count, 2))
        rot = random_rotation(rng, count)
        b = v * u.max(axis=1)
        c = v * u.min(axis=1)
        y = _ellipse_sections(np.column_stack([v, b, c]), rot, dz)
    return _finish_sections(y, gpd.v0)


def simulate_stereo_fast(config: StereoConfig, rng: np.random.Generator) -> np.ndarray:
    """Same law as :func:`simulate_stereo`, skipping inclusions that miss.

    Only inclusions whose bounding sphere crosses the plane are generated:
    their count is Poisson(lam * E[min(V, T)]) and the crossing offset
    W = 2|dz| has density proportional to P(V > max(w, v0)) on (0, T).
    Given W, the diameter V is the GPD exceedance above max(W, v0), using
    the threshold-stability scale sigma + xi * (max(W, v0) - v0).  Ellipsoid
    candidates are then thinned by the actual section test.
    """
    gpd = config.gpd
    sigma, xi, v0 = gpd.sigma, gpd.xi, gpd.v0
    total_mass = expected_min_size(gpd, config.slab_thickness)
    count = int(rng.poisson(config.lam * total_mass))
    m = rng.random(count) * total_mass
    over = np.maximum(m - v0, 0.0)
    w = np.where(m <= v0, m, v0 + _invert_survival_mass(sigma, xi, over))
    sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    dz = 0.5 * w * sign
    u2 = rng.random(count)
    thr = np.maximum(w, v0)
    sigma_eff = sigma + xi * (thr - v0)
    if abs(xi) < XI_ZERO_EPS:
        v = thr - sigma_eff * np.log1p(-u2)
    else:
        v = thr + sigma_eff * np.expm1(-xi * np.log1p(-u2)) / xi
    if config.shape == "spherical":
        y = np.sqrt(np.maximum(v * v - w * w, 0.0))
    else:
        u = rng.random((count, 2))
        rot = random_rotation(rng, count)
        b = v * u.max(axis=1)
        c = v * u.min(axis=1)
        y = _ellipse_sections(np.column_stack([v, b, c]), rot, dz)
    return _finish_sections(y, v0)


def stereo_summaries(dataset, v0: float = V0_DEFAULT) -> np.ndarray:
    """Length-7 summary (n', q.5, q.7, q.9, q.95, q.99, q1).

    Empty datasets return the count 0 with all quantiles at the sentinel v0.
    """
    y = np.asarray(dataset, dtype=float).ravel()
    if y.size == 0:
        return np.concatenate([[0.0], np.full(6, float(v0))])
    q = np.quantile(y, [0.5, 0.7, 0.9, 0.95, 0.99, 1.0])
    return np.concatenate([[float(y.size)], q])


def stereo_aux_summaries(dataset, v0: float = V0_DEFAULT):
    """Auxiliary summary (n', sigma, xi) with a fit-status flag.

    The scale and shape come from a generalized Pareto fit to the observed
    sections above v0.  Datasets with fewer than 5 observations, or whose
    fit fails, come back flagged with nan components.
    """
    y = np.asarray(dataset, dtype=float).ravel()
    n = float(y.size)
    if y.size < MIN_EXCEEDANCES:
        return np.array([n, np.nan, np.nan]), FLAG_TOO_FEW
    try:
        sigma, xi = gpd_mle(y, v0)
    except (FitFailureError, DomainError):
        return np.array([n, np.nan, np.nan]), FLAG_MLE_FAILURE
    return np.array([n, sigma, xi]), FLAG_OK


@dataclasses.dataclass(frozen=True)
class SplineGaussianAux:
    """Componentwise Gaussian conditionals theta_j | s'_j from spline fits."""

    fits: tuple
    residual_sds: tuple
    gcv_fallback: tuple

    @property
    def dim(self) -> int:
        return len(self.fits)

    def conditional_means(self, aux) -> np.ndarray:
        """Spline means at one s' vector or a matrix of rows."""
        aux = np.atleast_2d(np.asarray(aux, dtype=float))
        if aux.shape[1] != self.dim:
            raise ConfigError(f"expected {self.dim} summary columns")
        cols = [self.fits[j].predict(aux[:, j]) for j in range(self.dim)]
        out = np.column_stack(cols)
        return out if out.shape[0] > 1 else out[0]

    def marginals(self, aux) -> list[GaussianMarginal]:
        """Per-margin Gaussian marginals at a single s' vector."""
        aux = np.asarray(aux, dtype=float).ravel()
        if aux.size != self.dim:
            raise ConfigError(f"expected {self.dim} summary components")
        return [
            GaussianMarginal(float(self.fits[j].predict(aux[j])), self.residual_sds[j])
            for j in range(self.dim)
        ]


def spline_gaussian_aux(thetas, aux_summaries) -> SplineGaussianAux:
    """Fit per-margin smoothing splines of theta_j on s'_j over a bank.

    Margins pair componentwise (rate with n', scale with sigma, shape with
    xi).  Each margin j gets a penalized cubic smoothing spline with GCV
    penalty selection; the Gaussian conditional sd is the residual standard
    deviation of that fit.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    aux = np.atleast_2d(np.asarray(aux_summaries, dtype=float))
    if thetas.shape != aux.shape:
        raise ConfigError("thetas and aux_summaries must have matching shapes")
    if thetas.shape[0] < MIN_AUX_BANK:
        raise ConfigError(f"spline_gaussian_aux needs at least {MIN_AUX_BANK} rows")
    if not (np.all(np.isfinite(thetas)) and np.all(np.isfinite(aux))):
        raise ConfigError("spline_gaussian_aux requires finite, unflagged rows")
    fits = []
    for j in range(thetas.shape[1]):
        fits.append(fit_smoothing_spline(aux[:, j], thetas[:, j]))
    return SplineGaussianAux(
        fits=tuple(fits),
        residual_sds=tuple(f.residual_sd for f in fits),
        gcv_fallback=tuple(f.gcv_fallback for f in fits),
    )


class StereoModel(SimulatorModel):
    """Slab section simulator with uniform priors on (lam, sigma, xi)."""

    def __init__(
        self,
        shape: str = "spherical",
        v0: float = V0_DEFAULT,
        slab_thickness: float | None = None,
        bounds=None,
        sampler: str = "thinned",
    ):
        if shape not in SHAPES:
            raise ConfigError(f"shape must be one of {SHAPES}")
        if sampler not in ("thinned", "direct"):
            raise ConfigError("sampler must be 'thinned' or 'direct'")
        if bounds is None:
            bounds = PRIOR_BOUNDS_DEFAULT
        (l_lo, l_hi), (s_lo, s_hi), (x_lo, x_hi) = bounds
        self.shape = shape
        self.v0 = float(v0)
        self.sampler = sampler
        self.name = f"stereo-{shape}"
        self.bounds = tuple((float(a), float(b)) for a, b in bounds)
        self.prior = Prior(
            [
                PriorMargin("uniform", l_lo, l_hi, name="lam"),
                PriorMargin("uniform", s_lo, s_hi, name="sigma"),
                PriorMargin("uniform", x_lo, x_hi, name="xi"),
            ]
        )
        corner = StereoConfig(
            lam=l_hi,
            gpd=GPDParams(sigma=s_hi, xi=x_hi, v0=self.v0),
            shape=shape,
            slab_thickness=slab_thickness,
        )
        self.slab_thickness = corner.slab_thickness
        p_corner = truncation_probability(corner)
        if not p_corner < TRUNCATION_TOL:
            warnings.warn(
                f"slab thickness {self.slab_thickness:g} truncates diameters at the "
                f"prior corner (P = {p_corner:.3g}); inference near that corner is "
                "biased by design",
                RuntimeWarning,
                stacklevel=2,
            )

    def config_for(self, theta) -> StereoConfig:
        lam, sigma, xi = (float(v) for v in np.asarray(theta, dtype=float).ravel())
        return StereoConfig(
            lam=lam,
            gpd=GPDParams(sigma=sigma, xi=xi, v0=self.v0),
            shape=self.shape,
            slab_thickness=self.slab_thickness,
        )

    def simulate(self, theta, rng: np.random.Generator) -> np.ndarray:
        config = self.config_for(theta)
        if self.sampler == "direct":
            return simulate_stereo(config, rng)
        return simulate_stereo_fast(config, rng)

    def summarize(self, dataset) -> np.ndarray:
        return stereo_summaries(dataset, self.v0)

    def aux_summarize(self, dataset):
        return stereo_aux_summaries(dataset, self.v0)
