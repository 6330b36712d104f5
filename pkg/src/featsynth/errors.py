"""Exception types shared across the package."""


class FeatsynthError(Exception):
    """Base class for all package errors."""


class DimensionError(FeatsynthError):
    """Tensor shape or length does not match the configured model."""


class ConfigError(FeatsynthError):
    """Invalid configuration value or combination."""


class DegenerateDataError(FeatsynthError):
    """Input data cannot support the requested operation (e.g. K-means with
    fewer distinct points than clusters)."""


class CorruptArchiveError(FeatsynthError):
    """Checkpoint archive is unreadable or fails manifest validation."""


class ConfigMismatchError(FeatsynthError):
    """Checkpoint was produced under an incompatible configuration."""


class DivergenceError(FeatsynthError):
    """Training produced a non-finite loss."""
