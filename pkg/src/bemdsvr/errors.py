"""Exception hierarchy.

Two families matter to callers: ``DataError`` (bad or insufficient input,
CLI exit status 2) and ``NumericalError`` (a computation could not proceed,
CLI exit status 3).
"""


class BemdSvrError(Exception):
    """Base class for all package errors."""


class DataError(BemdSvrError, ValueError):
    pass


class NumericalError(BemdSvrError, ArithmeticError):
    pass


class EmptyInputError(DataError):
    pass


class MissingMonthError(DataError):
    def __init__(self, year, month, hour=None):
        self.year, self.month, self.hour = year, month, hour
        where = f" for hour {hour}" if hour is not None else ""
        super().__init__(f"no records for {year:04d}-{month:02d}{where}")


class SchemaError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class NonPositiveBoundError(DataError):
    pass


class ScaleError(DataError):
    """Raised when a transform is applied to a series already on the target scale."""


class TooShortError(DataError):
    pass


class InsufficientHistoryError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class NonFiniteInputError(DataError):
    pass


class UnsupportedDesignError(DataError):
    pass


class InsufficientExtremaError(NumericalError):
    """A projection has too few local maxima to build an envelope."""


class DegenerateSeriesError(NumericalError):
    pass


class RankDeficientError(DegenerateSeriesError):
    pass
