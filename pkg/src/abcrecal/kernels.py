"""Smoothing kernels, scaled distances, and acceptance-count bandwidths."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import ConfigError, DegenerateWeightsError

__all__ = [
    "KERNEL_FAMILIES",
    "KernelSpec",
    "kernel_weight",
    "mad_scale",
    "scaled_distance",
    "bandwidth_for_count",
    "bandwidth_all_nonzero",
]

KERNEL_FAMILIES = ("epanechnikov", "uniform", "gaussian")


@dataclasses.dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth; ``h = inf`` makes every weight equal."""

    family: str
    h: float

    def __post_init__(self) -> None:
        if self.family not in KERNEL_FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if not self.h > 0:
            raise ConfigError("bandwidth h must be positive")

    def weight(self, dist: np.ndarray) -> np.ndarray:
        return kernel_weight(dist, self.h, self.family)


def kernel_weight(dist: np.ndarray, h: float, family: str = "epanechnikov") -> np.ndarray:
    """Unnormalized kernel weight of a distance (vectorized)."""
    if family not in KERNEL_FAMILIES:
        raise ConfigError(f"unknown kernel family {family!r}")
    if not h > 0:
        raise ConfigError("bandwidth h must be positive")
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise ConfigError("distances must be nonnegative")
    if math.isinf(h):
        return np.ones_like(dist)
    if family == "epanechnikov":
        u = dist / h
        return np.where(u < 1.0, 1.0 - u * u, 0.0)
    if family == "uniform":
        return np.where(dist < h, 1.0, 0.0)
    return np.exp(-0.5 * (dist / h) ** 2)


def mad_scale(summaries: np.ndarray) -> np.ndarray:
    """Per-column median absolute deviation; exact-zero columns get scale 1."""
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    med = np.median(summaries, axis=0)
    mad = np.median(np.abs(summaries - med), axis=0)
    return np.where(mad > 0, mad, 1.0)


def scaled_distance(summaries: np.ndarray, s_obs: np.ndarray, scale: np.ndarray | None = None) -> np.ndarray:
    """Euclidean distance between scaled summary rows and a scaled target."""
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    s_obs = np.asarray(s_obs, dtype=float).ravel()
    if s_obs.size != summaries.shape[1]:
        raise ConfigError("summary target length does not match summary columns")
    if scale is None:
        scale = np.ones(s_obs.size)
    scale = np.asarray(scale, dtype=float).ravel()
    if scale.size != s_obs.size or np.any(scale <= 0):
        raise ConfigError("scale must be positive and match the summary dimension")
    diff = (summaries - s_obs) / scale
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def bandwidth_for_count(distances: np.ndarray, m: int) -> tuple[float, int]:
    """Bandwidth giving exactly ``m`` points a nonzero weight, extended over ties.

    Returns ``(h, effective_count)`` where ``h`` is the midpoint between the
    m-th smallest distance and the next strictly larger one. When distances tie
    across that boundary all tied points are admitted, so ``effective_count``
    can exceed ``m``.
    """
    distances = np.asarray(distances, dtype=float).ravel()
    n = distances.size
    if not 1 <= m < n:
        raise ConfigError(f"acceptance count m={m} must satisfy 1 <= m < {n}")
    if np.any(distances < 0) or not np.all(np.isfinite(distances)):
        raise ConfigError("distances must be finite and nonnegative")
    s = np.sort(distances)
    d_m = s[m - 1]
    if d_m == 0 and s[-1] == 0:
        raise DegenerateWeightsError("all distances are zero; cannot calibrate a bandwidth")
    larger = s[s > d_m]
    if larger.size == 0:
        # every remaining distance ties with d_m; any h above it keeps them all
        h = 1.5 * d_m
        return h, n
    h = 0.5 * (d_m + larger[0])
    return h, int(np.sum(s < h))


def bandwidth_all_nonzero(distances: np.ndarray) -> float:
    """Bandwidth giving every point a nonzero weight.

    Extends the midpoint rule past the largest distance by half the final gap
    (or half the largest distance when all points are mutually tied).
    """
    distances = np.asarray(distances, dtype=float).ravel()
    if distances.size < 1:
        raise ConfigError("need at least one distance")
    if np.any(distances < 0) or not np.all(np.isfinite(distances)):
        raise ConfigError("distances must be finite and nonnegative")
    s = np.sort(distances)
    if s[-1] == 0:
        raise DegenerateWeightsError("all distances are zero; cannot calibrate a bandwidth")
    if s.size == 1 or s[-1] == s[0]:
        return 1.5 * s[-1]
    gap = s[-1] - s[s < s[-1]][-1]
    return s[-1] + 0.5 * gap
