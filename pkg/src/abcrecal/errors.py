"""Exception types shared across the package.

Callers are expected to distinguish configuration mistakes, numeric domain
violations, degenerate estimators, undersized inputs, and optimizer failures.
"""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent option combination."""


class DomainError(ValueError):
    """Numeric argument outside the mathematical domain of an operation."""


class InsufficientDataError(ValueError):
    """Too few data points (or too few positive weights) to proceed."""


class DegenerateWeightsError(RuntimeError):
    """A weight vector or estimator collapsed (for example all weights zero)."""


class FitFailureError(RuntimeError):
    """An iterative fit (optimizer, profile search, smoother) did not converge."""
