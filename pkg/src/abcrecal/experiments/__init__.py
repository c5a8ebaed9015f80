"""End-to-end experiment drivers with CSV outputs and JSON manifests.

Each driver consumes an :class:`ExperimentConfig`, runs at desk scale by
default, and writes deterministic artifacts under ``cfg.out_dir``.  Stereo is
imported lazily by the CLI because its model module is comparatively heavy.
"""

from .common import ExperimentConfig, config_digest, finish_manifest
from .lognormal import run_lognormal_experiment
from .twisted import run_twisted_experiment

__all__ = [
    "ExperimentConfig",
    "config_digest",
    "finish_manifest",
    "run_lognormal_experiment",
    "run_twisted_experiment",
    "run_stereo_experiment",
]


def run_stereo_experiment(cfg):
    """Lazy wrapper so importing this package stays light."""
    from .stereo import run_stereo_experiment as _run

    return _run(cfg)
