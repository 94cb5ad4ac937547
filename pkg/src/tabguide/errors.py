"""Typed exceptions shared across the package."""


class TabguideError(Exception):
    """Base class for all package errors."""


class ShapeError(TabguideError):
    """Operand shapes are incompatible; message names the offending operation."""


class UsageError(TabguideError):
    """An API contract was violated (e.g. backward on a consumed tape)."""


class ConfigError(TabguideError):
    """Invalid configuration value."""


class FitError(TabguideError):
    """Encoder/estimator fitting failed (constant column, missing data, ...)."""


class EncodeError(TabguideError):
    """A row cannot be encoded (unseen category, non-numeric value, ...)."""


class DecodeError(TabguideError):
    """An encoded matrix cannot be decoded (wrong width, non-finite, ...)."""


class SpecError(TabguideError):
    """A constraint specification is malformed."""


class TaskError(TabguideError):
    """A mask/scenario generator cannot satisfy its contract."""


class TrainingError(TabguideError):
    """Training diverged or was misconfigured."""


class SamplingError(TabguideError):
    """Sampling produced non-finite values; message names step and row."""


class NotApplicableError(TabguideError):
    """A metric or diagnostic was asked for an object it is not defined on."""
