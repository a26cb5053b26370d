"""Exception and warning hierarchy shared by all pipeline stages."""

from __future__ import annotations


class MrnError(Exception):
    """Base class for every error raised by this package."""


class ConfigInvalid(MrnError):
    pass


class DataError(MrnError):
    pass


class ComputeError(MrnError):
    pass


# market data
class MissingColumn(DataError):
    pass


class NonPositivePrice(DataError):
    def __init__(self, row: int, column: str, value: float):
        super().__init__(f"non-positive price {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class EmptyPanel(DataError):
    pass


class SessionGridError(DataError):
    """The intraday minute grid cannot be inferred with the requested window length."""


class WeightMismatch(DataError):
    pass


class IntervalNotDivisor(ComputeError):
    pass


# recurrence / multiplex
class WindowTooShort(ComputeError):
    pass


class SizeMismatch(ComputeError):
    pass


# indicators
class SeriesTooShort(ComputeError):
    pass


# jump test
class EmptyDay(ComputeError):
    pass


class TooFewReturns(ComputeError):
    pass


# simulation / calibration
class InvalidRange(ConfigInvalid):
    pass


class AxisMismatch(ComputeError):
    pass


# benchmark
class InsufficientHistory(ComputeError):
    pass


class WindowTooLong(ComputeError):
    pass


class DegenerateTrajectoryWarning(UserWarning):
    """All embedded points coincide; the threshold collapses to zero."""


class EmptyLayersWarning(UserWarning):
    """Neither layer of a pair has off-diagonal edges; the pair is skipped."""


class DegenerateSegmentWarning(UserWarning):
    """Every value in a Kendall segment is equal; tau is reported as 0."""


class ShortSegmentWarning(UserWarning):
    """A peak-detection segment is too short for a meaningful 95th percentile."""


class PriceFloorWarning(UserWarning):
    """A simulated price hit the floor of one currency unit."""
