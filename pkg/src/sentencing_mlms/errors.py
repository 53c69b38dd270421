"""Exception types shared across the package."""


class SentencingError(Exception):
    """Base class for all package errors."""


class ValidationError(SentencingError, ValueError):
    """Input data violates a record or schema invariant."""

    def __init__(self, message, *, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class CapacityError(SentencingError, ValueError):
    """Requested dimension exceeds the supported size."""


class ConfigError(SentencingError, ValueError):
    """Invalid run configuration."""


class QuadratureError(SentencingError, RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""


class StreamError(SentencingError, ValueError):
    """A step of an online run failed; ``step`` is its zero-based index."""

    def __init__(self, message, *, step):
        self.step = step
        super().__init__(f"step {step}: {message}")
