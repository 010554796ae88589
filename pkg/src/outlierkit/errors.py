"""Semantic exception types shared across the package."""


class OutlierKitError(Exception):
    """Base class for all errors raised by outlierkit."""


class ConfigError(OutlierKitError, ValueError):
    """An invalid configuration or argument combination."""


class DataError(OutlierKitError, ValueError):
    """Input data cannot be used (unparsable, empty, wrong domain)."""


class DomainError(OutlierKitError, ValueError):
    """A numeric argument lies outside the mathematical domain."""


class DegenerateSampleError(DataError):
    """The sample carries no usable scale information."""


class MissingCriticalValueError(ConfigError):
    """A required simulated critical value is not available."""
