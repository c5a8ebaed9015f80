"""Likelihood-free inference with marginally recalibrated posteriors.

The package builds approximate posteriors by accept/reject sampling against
summary statistics, then post-processes them: linear regression adjustment of
the particles, and a marginal recalibration step that replaces each particle
with a quantile of the target marginal evaluated at its locally estimated
coverage position.  Coverage diagnostics quantify how far a procedure's
marginals are from calibrated.
"""

from .core import (
    ParticleSet,
    Prior,
    PriorMargin,
    SimulatorModel,
    particle_stream,
    read_manifest,
    read_particles_csv,
    sample_prior,
    write_manifest,
    write_particles_csv,
)
from .diagnostics import (
    CoverageReport,
    UniformityReport,
    coverage_diagnostic,
    ks_two_sample_weighted,
    ks_uniform,
)
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    DomainError,
    FitFailureError,
    InsufficientDataError,
)
from .kernels import KERNEL_FAMILIES, KernelSpec, kernel_weight, mad_scale, scaled_distance
from .marginals import GaussianMarginal, WeightedECDF
from .models import MODEL_NAMES, get_model
from .recalibration import (
    ESTIMATORS,
    P_ADJUSTMENTS,
    RecalibrationResult,
    compute_p,
    recalibrate,
    recalibrate_gaussian,
    target_marginals,
)
from .regression import LinearFit, adjust_p, adjust_theta, fit_weighted_linear
from .rejection import ABCApproximation, marginal_of, run_abc, weight_bank
from .splines import SplineFit, fit_smoothing_spline

__version__ = "0.1.0"

__all__ = [
    "ABCApproximation",
    "ConfigError",
    "CoverageReport",
    "DegenerateWeightsError",
    "DomainError",
    "ESTIMATORS",
    "FitFailureError",
    "GaussianMarginal",
    "InsufficientDataError",
    "KERNEL_FAMILIES",
    "KernelSpec",
    "LinearFit",
    "MODEL_NAMES",
    "P_ADJUSTMENTS",
    "ParticleSet",
    "Prior",
    "PriorMargin",
    "RecalibrationResult",
    "SimulatorModel",
    "SplineFit",
    "UniformityReport",
    "WeightedECDF",
    "adjust_p",
    "adjust_theta",
    "compute_p",
    "coverage_diagnostic",
    "fit_smoothing_spline",
    "fit_weighted_linear",
    "get_model",
    "kernel_weight",
    "ks_two_sample_weighted",
    "ks_uniform",
    "mad_scale",
    "marginal_of",
    "particle_stream",
    "read_manifest",
    "read_particles_csv",
    "recalibrate",
    "recalibrate_gaussian",
    "run_abc",
    "sample_prior",
    "scaled_distance",
    "target_marginals",
    "weight_bank",
    "write_manifest",
    "write_particles_csv",
    "__version__",
]
