"""Exception types shared across the package."""


class AuxcountError(Exception):
    """Base class for errors raised by this package."""


class IngestionError(AuxcountError):
    """A frame or sample file failed validation on load."""


class CalibrationError(AuxcountError):
    """Bisection could not reach the requested metric.

    Carries the best sharpness and realized metric seen so far, so callers
    can report how close the search got.
    """

    def __init__(self, message, *, best_sharpness=None, best_metric=None):
        super().__init__(message)
        self.best_sharpness = best_sharpness
        self.best_metric = best_metric


class AllocationError(AuxcountError):
    """Sample sizes cannot be spread over the strata as requested."""


class UndefinedMetricError(AuxcountError):
    """A classification metric has a zero denominator."""


class VarianceUndefinedError(AuxcountError):
    """A variance (and anything derived from it) is unavailable."""


class SweepError(AuxcountError):
    """A loss-sweep point could not be produced."""


class ConfigError(AuxcountError):
    """Bad configuration: unknown keys, missing inputs, invalid pairings."""
