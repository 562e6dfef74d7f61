"""
Errors raised while reading, validating and transforming trajectory data.

Every error derives from TrajpubError (a ValueError) so callers that only
care about "bad input" can catch one type. The management commands map the
concrete classes to exit codes.
"""
from __future__ import annotations


class TrajpubError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DatasetParseError(TrajpubError):
    """Malformed dataset or trace text."""


class DomainError(TrajpubError):
    """A point or parameter outside the declared universe."""


class OrderingError(TrajpubError):
    """Time slots (or raw timestamps) that do not increase."""


class EmptyTrajectoryError(TrajpubError):
    pass


class PreconditionError(TrajpubError):
    """An operation was called outside its documented preconditions."""
