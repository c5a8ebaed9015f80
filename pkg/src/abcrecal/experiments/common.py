"""Shared plumbing for the experiment drivers.

Covers the run configuration record, deterministic substream derivation,
full-precision CSV emission, and the manifest sidecar every run directory
gets. Reruns with the same config and seed write byte-identical CSVs; the
manifest additionally records wall time, so it is reproducible up to that
field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from ..core import particle_stream, write_manifest
from ..errors import ConfigError

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "observed_stream",
    "replicate_stream",
    "side_stream",
    "format_cell",
    "write_table",
    "config_digest",
    "finish_manifest",
]

EXPERIMENTS = ("lognormal", "twisted", "stereo")

# Substream index ranges under one master seed. Bank particles use indices
# 0..N-1 (core.sample_particles), so auxiliary draws start far above any
# plausible bank size.
_OBSERVED_BASE = 2**40
_SIDE_BASE = 2**41
_REPLICATE_BASE = 2**42


@dataclasses.dataclass
class ExperimentConfig:
    """One experiment run: which study, at what scale, writing where.

    Fields left at ``None`` fall back to the per-experiment desk-scale
    defaults (or the paper-scale ones when ``paper_scale`` is set). ``model``
    carries model-specific overrides such as the true parameter values.
    ``threads`` is accepted for interface stability and recorded in the
    manifest; execution is sequential with per-replicate derived seeds, which
    makes the results independent of the worker count.
    """

    experiment: str
    out_dir: Path
    seed: int = 1
    paper_scale: bool = False
    threads: int = 1
    n: int | None = None
    accept_count: int | None = None
    m_local: int | None = None
    kernel: str | None = None
    estimator: str | None = None
    p_adjust: str | None = None
    replicates: int | None = None
    grid: tuple[int, ...] | None = None
    model: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.grid is not None:
            self.grid = tuple(int(m) for m in self.grid)
            if len(self.grid) == 0:
                raise ConfigError("grid must be nonempty")
        if self.experiment == "twisted" and self.grid is not None and len(self.grid) == 0:
            raise ConfigError("the twisted experiment needs a nonempty grid")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if not self.out_dir.is_dir():
            raise ConfigError(f"output directory {self.out_dir} is not writable")

    def public_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["out_dir"] = str(self.out_dir)
        return out


def observed_stream(seed: int) -> np.random.Generator:
    """Stream reserved for the observed dataset of a run."""
    return particle_stream(seed, _OBSERVED_BASE)


def side_stream(seed: int, which: int) -> np.random.Generator:
    """Streams for auxiliary draws (reference banks, auxiliary samples)."""
    return particle_stream(seed, _SIDE_BASE + which)


def replicate_stream(seed: int, r: int) -> np.random.Generator:
    """Stream for replicate ``r``; replicates are order-independent."""
    return particle_stream(seed, _REPLICATE_BASE + r)


def format_cell(v) -> str:
    """Shortest-roundtrip text for floats, plain text for ints and strings."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: str | Path, header: list[str], rows) -> int:
    """Write a CSV with full-precision numeric cells; returns the row count."""
    path = Path(path)
    count = 0
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ConfigError("row width does not match the header")
            fh.write(",".join(format_cell(v) for v in row) + "\n")
            count += 1
    return count


def config_digest(payload: dict) -> str:
    """Stable hash of a JSON-serializable configuration."""
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def finish_manifest(
    cfg: ExperimentConfig,
    path: Path,
    wall_seconds: float,
    kernel: str,
    counts: dict,
    estimators: list[str],
    flags: dict,
    files: dict,
    extra: dict | None = None,
) -> dict:
    """Assemble and write the run manifest next to the CSV outputs."""
    public = cfg.public_dict()
    payload = {
        "experiment": cfg.experiment,
        "config": public,
        "config_hash": config_digest(public),
        "seed": cfg.seed,
        "kernel": kernel,
        "counts": counts,
        "estimators": estimators,
        "flags": flags,
        "files": files,
        "threads_requested": cfg.threads,
        "threads_effective": 1,
        "wall_seconds": wall_seconds,
    }
    if extra:
        payload.update(extra)
    write_manifest(path, payload)
    return payload
