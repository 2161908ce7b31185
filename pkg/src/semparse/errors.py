"""Exception types shared across the package."""


class SemparseError(Exception):
    """Base class for all package errors."""


class IngestionError(SemparseError):
    """Raised when an input file violates its format contract."""


class ParseError(SemparseError):
    """Raised on malformed logical-form text. Carries a position when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ExecutionError(SemparseError):
    """Raised when a well-formed logical form cannot be evaluated."""
