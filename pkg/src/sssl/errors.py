"""Exception types raised across the package."""


class SSSLError(Exception):
    """Base class for all package errors."""


class InvalidParameter(SSSLError, ValueError):
    pass


class NotPositiveDefinite(SSSLError, ValueError):
    pass


class DimensionMismatch(SSSLError, ValueError):
    pass


class ParseError(SSSLError, ValueError):
    def __init__(self, message, row=None, column=None):
        if row is not None and column is not None:
            message = f"{message} (row {row}, column {column})"
        super().__init__(message)
        self.row = row
        self.column = column


class MissingValue(ParseError):
    pass


class ConstantColumn(SSSLError, ValueError):
    def __init__(self, column):
        super().__init__(f"column {column!r} is constant and cannot be standardized")
        self.column = column


class UnsortedTimestamps(SSSLError, ValueError):
    pass


class TargetNotBracketed(SSSLError, ValueError):
    pass


class InsufficientSamples(SSSLError, RuntimeError):
    pass


class SamplerAbort(SSSLError, RuntimeError):
    """Raised when a chain hits a numerical failure.

    ``state`` holds the arrays needed to reproduce the failure.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}
