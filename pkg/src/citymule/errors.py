"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
bad input data exits 2, violated internal invariants exit 3.
"""


class CityMuleError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CityMuleError, ValueError):
    """Invalid configuration value, unit string, or scenario parameter."""


class GeometryError(CityMuleError, ValueError):
    """Invalid route geometry argument (circumference, position, time)."""


class FeedFormatError(CityMuleError, ValueError):
    """A GTFS feed is missing required files or contains malformed rows."""


class MetricsError(CityMuleError, ValueError):
    """Metrics lookup or aggregation over incompatible inputs."""


class InvariantViolation(CityMuleError, RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""
