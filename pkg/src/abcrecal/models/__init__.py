"""Built-in model suites selectable by name."""

from __future__ import annotations

from ..errors import ConfigError
from .gaussian import ConjugateNormalModel
from .lognormal_sum import LognormalSumModel
from .twisted import TwistedModel

_BUILDERS = {
    "conjugate-normal": ConjugateNormalModel,
    "lognormal-sum": LognormalSumModel,
    "twisted-normal": TwistedModel,
}


def _stereo_builder(shape):
    def build(**kwargs):
        from .stereo import StereoModel

        return StereoModel(shape=shape, **kwargs)

    return build


_BUILDERS["stereo-spherical"] = _stereo_builder("spherical")
_BUILDERS["stereo-ellipsoidal"] = _stereo_builder("ellipsoidal")

MODEL_NAMES = tuple(sorted(_BUILDERS))


def get_model(name, **kwargs):
    """Instantiate a built-in model by its registry name."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    return builder(**kwargs)
