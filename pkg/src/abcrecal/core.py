"""Core containers: priors, simulator models, particle banks, and RNG streams.

Every particle draws its randomness from a stream derived from ``(seed, index)``
so that a bank is reproducible bit for bit regardless of execution order.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError

__all__ = [
    "particle_stream",
    "PriorMargin",
    "Prior",
    "SimulatorModel",
    "ParticleSet",
    "sample_prior",
    "write_particles_csv",
    "read_particles_csv",
    "write_manifest",
    "read_manifest",
]


def particle_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for particle ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


@dataclasses.dataclass(frozen=True)
class PriorMargin:
    """One independent prior margin.

    ``kind`` is ``normal(mean, sd)``, ``gamma(shape, rate)`` or ``uniform(low, high)``.
    With ``transform="sqrt"`` the declared distribution applies to the *square* of
    the parameter: sampling returns the square root of a draw and the log density
    includes the Jacobian ``2 * theta``.
    """

    kind: str
    a: float
    b: float
    transform: str | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("normal", "gamma", "uniform"):
            raise ConfigError(f"unknown prior margin kind {self.kind!r}")
        if self.kind == "normal" and self.b <= 0:
            raise ConfigError("normal margin needs sd > 0")
        if self.kind == "gamma" and (self.a <= 0 or self.b <= 0):
            raise ConfigError("gamma margin needs shape > 0 and rate > 0")
        if self.kind == "uniform" and not self.a < self.b:
            raise ConfigError("uniform margin needs low < high")
        if self.transform not in (None, "sqrt"):
            raise ConfigError(f"unknown margin transform {self.transform!r}")

    @property
    def positive(self) -> bool:
        """Whether the margin's support is strictly positive."""
        if self.transform == "sqrt" or self.kind == "gamma":
            return True
        return self.kind == "uniform" and self.a > 0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            draws = rng.normal(self.a, self.b, size=n)
        elif self.kind == "gamma":
            draws = rng.gamma(self.a, 1.0 / self.b, size=n)
        else:
            draws = rng.uniform(self.a, self.b, size=n)
        if self.transform == "sqrt":
            return np.sqrt(draws)
        return draws

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.transform == "sqrt":
            out = np.where(x > 0, self._base_logpdf(x * x) + np.log(2.0 * np.abs(x)), -np.inf)
            return out
        return self._base_logpdf(x)

    def _base_logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            return -0.5 * ((x - self.a) / self.b) ** 2 - math.log(self.b) - 0.5 * math.log(2 * math.pi)
        if self.kind == "gamma":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = (
                    self.a * math.log(self.b)
                    - gammaln(self.a)
                    + (self.a - 1.0) * np.log(x)
                    - self.b * x
                )
            return np.where(x > 0, val, -np.inf)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, -math.log(self.b - self.a), -np.inf)


class Prior:
    """Product of independent :class:`PriorMargin` components."""

    def __init__(self, margins: list[PriorMargin]):
        if not margins:
            raise ConfigError("prior needs at least one margin")
        self.margins = list(margins)

    @property
    def dim(self) -> int:
        return len(self.margins)

    @property
    def names(self) -> list[str]:
        return [m.name or f"theta_{j + 1}" for j, m in enumerate(self.margins)]

    @property
    def positive(self) -> np.ndarray:
        return np.array([m.positive for m in self.margins], dtype=bool)

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        cols = [m.sample(rng, n) for m in self.margins]
        return np.column_stack(cols)

    def logpdf(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.dim:
            raise ConfigError(f"theta has {theta.shape[1]} columns, prior has {self.dim}")
        total = np.zeros(theta.shape[0])
        for j, m in enumerate(self.margins):
            total = total + m.logpdf(theta[:, j])
        return total if total.size > 1 else total[0]


def sample_prior(prior: Prior, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows from the prior, one column per margin."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    return prior.sample(rng, n)


class SimulatorModel:
    """Base class for simulator models.

    Subclasses provide ``prior``, ``simulate(theta, rng) -> dataset`` and a
    deterministic ``summarize(dataset) -> 1-d summary vector``.
    """

    name: str = "model"
    prior: Prior

    def simulate(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def summarize(self, dataset: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def theta_dim(self) -> int:
        return self.prior.dim

    def sample_particles(self, n: int, seed: int) -> "ParticleSet":
        """Draw a bank of ``n`` (theta, summary) pairs with unit weights.

        Particle ``i`` consumes only the stream derived from ``(seed, i)``:
        first the prior draw, then the simulated dataset.
        """
        if n < 1:
            raise ConfigError("n must be >= 1")
        thetas = np.empty((n, self.theta_dim))
        summaries = None
        for i in range(n):
            rng = particle_stream(seed, i)
            theta = self.prior.sample(rng, 1)[0]
            s = np.asarray(self.summarize(self.simulate(theta, rng)), dtype=float)
            if summaries is None:
                summaries = np.empty((n, s.size))
            thetas[i] = theta
            summaries[i] = s
        weights = np.full(n, 1.0 / n)
        return ParticleSet(thetas, summaries, weights, seed=seed)


@dataclasses.dataclass
class ParticleSet:
    """A bank of parameter draws with summaries and nonnegative weights."""

    thetas: np.ndarray
    summaries: np.ndarray
    weights: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        self.summaries = np.atleast_2d(np.asarray(self.summaries, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        n = self.thetas.shape[0]
        if self.summaries.shape[0] != n or self.weights.shape != (n,):
            raise ConfigError("thetas, summaries and weights must share their first dimension")
        if n < 1:
            raise ConfigError("particle set cannot be empty")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ConfigError("weights must be finite and nonnegative")

    @property
    def n(self) -> int:
        return self.thetas.shape[0]

    @property
    def theta_dim(self) -> int:
        return self.thetas.shape[1]

    @property
    def summary_dim(self) -> int:
        return self.summaries.shape[1]


def _format(x: float) -> str:
    return repr(float(x))


def write_particles_csv(path: str | Path, particles: ParticleSet) -> None:
    """Write ``theta_1..theta_d, s_1..s_q, weight`` rows with full precision."""
    path = Path(path)
    d, q = particles.theta_dim, particles.summary_dim
    header = (
        [f"theta_{j + 1}" for j in range(d)]
        + [f"s_{j + 1}" for j in range(q)]
        + ["weight"]
    )
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(particles.n):
            row = (
                [_format(v) for v in particles.thetas[i]]
                + [_format(v) for v in particles.summaries[i]]
                + [_format(particles.weights[i])]
            )
            fh.write(",".join(row) + "\n")


def read_particles_csv(path: str | Path) -> ParticleSet:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    d = sum(1 for c in header if c.startswith("theta_"))
    q = sum(1 for c in header if c.startswith("s_"))
    if header != [f"theta_{j + 1}" for j in range(d)] + [f"s_{j + 1}" for j in range(q)] + ["weight"]:
        raise ConfigError(f"unexpected particle CSV header in {path}")
    return ParticleSet(data[:, :d], data[:, d : d + q], data[:, -1])


def write_manifest(path: str | Path, payload: dict) -> None:
    """Sidecar JSON manifest with stable key order."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
