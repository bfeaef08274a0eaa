"""Exception types shared across the package."""


class InvalidBandError(ValueError):
    """A requested frequency band cannot be realised at the given sample rate."""


class InvalidWindowError(ValueError):
    """An envelope window length is incompatible with the signal."""


class DegenerateInputError(ValueError):
    """The input carries no usable signal (e.g. an all-zero impulse response)."""


class InsufficientDataError(ValueError):
    """Not enough data points or values to perform the requested estimate."""


class NearSingularError(ValueError):
    """Parameters are too close to a singular configuration to evaluate."""


class ConfigError(ValueError):
    """A configuration document failed validation.

    The message carries the JSON-style path of the offending field,
    e.g. ``positions[3].decay_rates: must be a non-empty list``.
    """
