class FrescoError(Exception):
    """Base class for all errors raised by this package."""


class BoundsError(FrescoError, IndexError):
    """A coordinate or block lies outside the configured canvas."""


class ConfigurationError(FrescoError, ValueError):
    """Invalid dimensions, schedule, or mode combination."""


class ScheduleError(ConfigurationError):
    """Times or steps that do not form a valid schedule."""


class GridConsistencyError(FrescoError):
    """A mixed grid violated the partition or finiteness invariant."""


class CannotExpandError(FrescoError, ValueError):
    """Attempt to expand a finest-level token."""


class StaleSelectionError(FrescoError, KeyError):
    """A promotion referenced a token that is not active."""


class InsufficientHistory(FrescoError, ValueError):
    """Fewer than two history entries: temporal variance is undefined."""
