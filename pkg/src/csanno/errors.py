"""Exception vocabulary shared across the platform."""

from __future__ import annotations


class CsannoError(Exception):
    """Base class for all domain errors."""


class ValidationError(CsannoError):
    """Input violates a structural rule (bad ids, bad fields, bad values)."""


class PermissionDenied(CsannoError):
    """Caller's role or resource scope does not allow the action."""


class UnknownActionError(CsannoError):
    """Action name outside the closed permission vocabulary."""


class IllegalTransition(CsannoError):
    """Assignment state machine has no such edge."""


class ConflictError(CsannoError):
    """Optimistic concurrency check failed; someone else wrote first."""


class NotFoundError(CsannoError):
    """Referenced entity does not exist."""


class PreconditionError(CsannoError):
    """Operation precondition not met."""


class IncompleteAnnotationError(CsannoError):
    """Submit attempted while tokens remain untagged.

    ``missing`` maps unit_id -> sorted list of untagged token indices.
    """

    def __init__(self, missing: dict[str, list[int]]):
        self.missing = missing
        parts = ", ".join(f"{uid}:{idxs}" for uid, idxs in sorted(missing.items()))
        super().__init__(f"untagged tokens remain: {parts}")


class DecodeError(CsannoError):
    """Raw bytes not decodable under the configured encoding."""

    def __init__(self, encoding: str, offset: int):
        self.encoding = encoding
        self.offset = offset
        super().__init__(f"byte sequence not decodable as {encoding} at offset {offset}")


class NoAnnotatorsError(CsannoError):
    """Overlap planning requires at least one annotator."""


class EmptyTaskError(CsannoError):
    """Overlap planning requires at least one unit."""


class AlignmentError(CsannoError):
    """Paired label sequences differ in length or positions."""


class DegenerateMarginalsError(CsannoError):
    """Kappa undefined: both marginal distributions are the same point mass."""


class NoOverlapError(CsannoError):
    """Task has no shared units, so agreement cannot be computed."""


class InsufficientDataError(CsannoError):
    """Fewer than two submitted annotators on the shared units."""


class EmptyScopeError(CsannoError):
    """Statistic undefined over zero tokens."""


class ParseError(CsannoError):
    """Malformed XML input."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class SchemaError(CsannoError):
    """Well-formed XML that violates the corpus export schema."""

    def __init__(self, element: str, message: str | None = None):
        self.element = element
        super().__init__(message or f"schema violation at {element}")


class AuthenticationError(CsannoError):
    """Bad credentials, expired token, or inactive account."""


class RateLimitedError(CsannoError):
    """Too many failed login attempts for this username."""
