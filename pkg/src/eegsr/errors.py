"""Exception types shared across the package."""


class EegsrError(Exception):
    """Base class for all package errors."""


class ShapeError(EegsrError):
    """Tensor/index dimensions do not satisfy an operation's contract."""


class NumericError(EegsrError):
    """A numeric validation pass found NaN/Inf values."""


class ConfigError(EegsrError):
    """Invalid or unknown configuration key/value."""


class UndefinedMetricError(EegsrError):
    """A metric is mathematically undefined for the given inputs."""


class DatasetIOError(EegsrError):
    """Base class for dataset container read failures."""


class BadMagicError(DatasetIOError):
    """Container file does not start with the expected magic bytes."""


class VersionMismatchError(DatasetIOError):
    """Container file declares an unsupported format version."""


class TruncatedFileError(DatasetIOError):
    """Container file ends before the declared payload is complete."""
