"""Exception types shared across the package.

Exit-code mapping used by the CLI: ValidationError and its subclasses map
to exit 1, I/O problems map to exit 2.
"""

from __future__ import annotations


class QdssError(Exception):
    """Base class for all package errors."""


class ValidationError(QdssError):
    """A value violates a declared bound or shape. Message names the field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ReferentialError(ValidationError):
    """A foreign reference does not resolve to an existing row."""


class DuplicateError(ValidationError):
    """A unique identifier is already present in the store."""


class NotFoundError(QdssError):
    """A lookup by id found nothing."""


class ParseError(ValidationError):
    """A wire-format record could not be decoded.

    Carries the byte offset of the failure within the input line when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class StateError(QdssError):
    """An incident operation was attempted from a state that forbids it."""


class ApprovalRequiredError(StateError):
    """An SOS dispatch was attempted without a recorded operator approval."""


class NoHistoryError(QdssError):
    """Impact prediction requested with an empty past-quake history."""
