"""ABC rejection sampling: weight a bank of prior-predictive particles by the
kernel-smoothed distance between their summaries and the observed summary."""

from __future__ import annotations

import dataclasses

import numpy as np

from .core import ParticleSet, SimulatorModel
from .errors import ConfigError
from .kernels import (
    KernelSpec,
    bandwidth_all_nonzero,
    bandwidth_for_count,
    kernel_weight,
    mad_scale,
    scaled_distance,
)
from .marginals import WeightedECDF

__all__ = ["ABCApproximation", "weight_bank", "run_abc", "marginal_of"]


@dataclasses.dataclass
class ABCApproximation:
    """A weighted particle bank targeting the posterior given ``s_obs``."""

    particles: ParticleSet
    s_obs: np.ndarray
    kernel: KernelSpec
    scale: np.ndarray
    distances: np.ndarray
    accept_count: int
    effective_count: int

    @property
    def accepted_index(self) -> np.ndarray:
        return np.flatnonzero(self.particles.weights > 0)

    @property
    def n(self) -> int:
        return self.particles.n


def _resolve_count(n: int, accept_count: int | None, accept_rate: float | None) -> int:
    if (accept_count is None) == (accept_rate is None):
        raise ConfigError("give exactly one of accept_count or accept_rate")
    if accept_rate is not None:
        if not 0 < accept_rate <= 1:
            raise ConfigError("accept_rate must lie in (0, 1]")
        accept_count = max(1, round(accept_rate * n))
    if not 1 <= accept_count <= n:
        raise ConfigError(f"accept_count {accept_count} must lie in [1, {n}]")
    return int(accept_count)


def weight_bank(
    bank: ParticleSet,
    s_obs: np.ndarray,
    accept_count: int | None = None,
    accept_rate: float | None = None,
    kernel_family: str = "epanechnikov",
    scale: np.ndarray | None = None,
) -> ABCApproximation:
    """Attach kernel weights to an existing bank.

    The bandwidth admits ``accept_count`` particles (ties extend it); passing
    ``accept_count == n`` calibrates a bandwidth that keeps every particle.
    The summary scale defaults to the bank's per-column median absolute deviation.
    """
    s_obs = np.asarray(s_obs, dtype=float).ravel()
    if scale is None:
        scale = mad_scale(bank.summaries)
    dists = scaled_distance(bank.summaries, s_obs, scale)
    m = _resolve_count(bank.n, accept_count, accept_rate)
    if m == bank.n:
        h = bandwidth_all_nonzero(dists)
        effective = bank.n
    else:
        h, effective = bandwidth_for_count(dists, m)
    kernel = KernelSpec(kernel_family, h)
    w = kernel_weight(dists, h, kernel_family)
    total = w.sum()
    if total <= 0:
        raise ConfigError("kernel produced no positive weights")
    weighted = ParticleSet(bank.thetas, bank.summaries, w / total, seed=bank.seed)
    return ABCApproximation(weighted, s_obs, kernel, np.asarray(scale, dtype=float), dists, m, effective)


def run_abc(
    model: SimulatorModel,
    s_obs: np.ndarray,
    n: int,
    seed: int,
    accept_count: int | None = None,
    accept_rate: float | None = None,
    kernel_family: str = "epanechnikov",
) -> ABCApproximation:
    """Simulate an ``n``-particle bank from the model and weight it against ``s_obs``."""
    bank = model.sample_particles(n, seed)
    return weight_bank(
        bank,
        s_obs,
        accept_count=accept_count,
        accept_rate=accept_rate,
        kernel_family=kernel_family,
    )


def marginal_of(approx: ABCApproximation, margin: int) -> WeightedECDF:
    """Weighted ECDF of one parameter margin of the approximation."""
    if not 0 <= margin < approx.particles.theta_dim:
        raise ConfigError(f"margin {margin} out of range")
    return WeightedECDF(approx.particles.thetas[:, margin], approx.particles.weights)
