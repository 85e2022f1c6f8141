"""Exception types shared across the package."""


class TwoscaleError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(TwoscaleError):
    """Array shapes are inconsistent with the model dimensions."""


class NotPositiveDefinite(TwoscaleError):
    """A covariance input or draw is not symmetric positive definite."""


class AllWeightsZero(TwoscaleError):
    """Every particle weight vanished; the ensemble is fully degenerate."""


class ZeroWeightSum(TwoscaleError):
    """Fine-step contribution weights sum to zero."""


class EmptyChain(TwoscaleError):
    """No retained iterations to summarize."""


class SeriesTooShort(TwoscaleError):
    """Series too short for the requested diagnostic."""


class IndexOutOfRange(TwoscaleError, IndexError):
    """Requested dimension or individual index does not exist."""


class ConfigError(TwoscaleError):
    """Invalid, missing, or unknown configuration content."""


class SchemaVersionMismatch(TwoscaleError):
    """File carries an unknown or unsupported schema tag."""


class ChecksumMismatch(TwoscaleError):
    """File content does not match its recorded checksum, or a paired
    artifact does not match the checksum recorded for it."""


class ZeroVarianceWarning(UserWarning):
    """A diagnostic was computed on a constant series."""
