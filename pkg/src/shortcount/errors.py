"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A numeric argument is outside its documented domain."""


class EstimatorOverflow(RuntimeError):
    """A register increment would exceed its bit-width.

    Raised by the fixed-probability estimator; the caller decides whether to
    downsample, widen, or drop the update. The dynamic controllers never raise
    this: they absorb overflow by halving.
    """


class ConfigError(ValueError):
    """An experiment configuration is inconsistent or incomplete."""
