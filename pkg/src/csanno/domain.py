"""Core vocabulary: users, roles, permissions, tags, units, tokens, tasks,
assignments, and the annotation/timing records they produce.

Everything here is an immutable value object; mutation happens only through
persistence transactions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from types import MappingProxyType
from typing import Mapping, Optional

from .errors import (
    IllegalTransition,
    PreconditionError,
    UnknownActionError,
    ValidationError,
)


class Role(enum.Enum):
    ANNOTATOR = "annotator"
    LEAD_ANNOTATOR = "lead_annotator"
    SUPERUSER = "superuser"


#: Closed action vocabulary for the permission matrix.
ACTIONS = frozenset(
    {
        "annotate",
        "submit",
        "save_draft",
        "view_own_stats",
        "create_annotator",
        "grade",
        "view_iaa",
        "manage_users",
        "import_data",
        "export_data",
        "manage_tasks",
    }
)

_ANNOTATOR_ACTIONS = frozenset({"annotate", "submit", "save_draft", "view_own_stats"})
_LEAD_ACTIONS = _ANNOTATOR_ACTIONS | {"create_annotator", "grade", "view_iaa", "manage_tasks"}

PERMISSIONS: Mapping[Role, frozenset[str]] = MappingProxyType(
    {
        Role.ANNOTATOR: _ANNOTATOR_ACTIONS,
        Role.LEAD_ANNOTATOR: _LEAD_ACTIONS,
        Role.SUPERUSER: frozenset(ACTIONS),
    }
)


def check_permission(role: Role, action: str) -> bool:
    """Pure role -> action permission matrix.

    Raises :class:`UnknownActionError` for actions outside the closed
    vocabulary instead of silently returning False.
    """
    if action not in ACTIONS:
        raise UnknownActionError(f"unknown action: {action!r}")
    return action in PERMISSIONS[role]


class TagCategory(enum.Enum):
    LANGUAGE = "language"
    SPECIAL = "special"


#: Special-token categories the pre-tagger may assign, in default precedence
#: order (most specific first).
AUTO_CATEGORIES = (
    "url",
    "emoticon",
    "punct",
    "digit",
    "diacritic",
    "sound_effect",
    "ne",
    "latin",
)


@dataclass(frozen=True)
class TagLabel:
    name: str
    category: TagCategory
    color: str
    auto_assignable: bool

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("tag name must be non-empty")


@dataclass(frozen=True)
class TagSet:
    labels: tuple[TagLabel, ...]

    def names(self) -> tuple[str, ...]:
        return tuple(label.name for label in self.labels)

    def get(self, name: str) -> Optional[TagLabel]:
        for label in self.labels:
            if label.name == name:
                return label
        return None

    def language_tags(self) -> tuple[TagLabel, ...]:
        return tuple(l for l in self.labels if l.category is TagCategory.LANGUAGE)

    def special_tags(self) -> tuple[TagLabel, ...]:
        return tuple(l for l in self.labels if l.category is TagCategory.SPECIAL)


@dataclass(frozen=True)
class TagSetViolation:
    name: str


@dataclass(frozen=True)
class DuplicateName(TagSetViolation):
    pass


@dataclass(frozen=True)
class AutoAssignableLanguageTag(TagSetViolation):
    pass


@dataclass(frozen=True)
class SpecialTagNotAutoAssignable(TagSetViolation):
    pass


def validate_tagset(tag_set: TagSet) -> list[TagSetViolation]:
    """Return one violation per broken tag-set rule (empty list if clean)."""
    violations: list[TagSetViolation] = []
    seen: set[str] = set()
    for label in tag_set.labels:
        if label.name in seen:
            violations.append(DuplicateName(label.name))
        seen.add(label.name)
        if label.category is TagCategory.LANGUAGE and label.auto_assignable:
            violations.append(AutoAssignableLanguageTag(label.name))
        if (
            label.category is TagCategory.SPECIAL
            and label.name in AUTO_CATEGORIES
            and not label.auto_assignable
        ):
            violations.append(SpecialTagNotAutoAssignable(label.name))
    return violations


_SPECIAL_COLORS = {name: ("purple" if name == "ne" else "orange") for name in AUTO_CATEGORIES}
_LANGUAGE_COLORS = {
    "lang1": "green",
    "lang2": "teal",
    "mixed": "olive",
    "ambiguous": "gray",
    "other": "brown",
}


def default_tag_set() -> TagSet:
    """Default label inventory: five human-choice language tags plus the
    eight auto-assignable special categories."""
    labels = [
        TagLabel(name, TagCategory.LANGUAGE, color, auto_assignable=False)
        for name, color in _LANGUAGE_COLORS.items()
    ]
    labels += [
        TagLabel(name, TagCategory.SPECIAL, _SPECIAL_COLORS[name], auto_assignable=True)
        for name in AUTO_CATEGORIES
    ]
    return TagSet(tuple(labels))


@dataclass(frozen=True)
class LanguagePair:
    pair_id: str
    lang_primary: str
    lang_secondary: str
    tag_set: TagSet = field(default_factory=default_tag_set)

    def __post_init__(self) -> None:
        if self.lang_primary == self.lang_secondary:
            raise ValidationError("language pair must use two distinct languages")


@dataclass(frozen=True)
class UserAccount:
    user_id: str
    username: str
    password_digest: str
    role: Role
    language_pairs: frozenset[str] = frozenset()
    active: bool = True

    def __post_init__(self) -> None:
        if not self.username:
            raise ValidationError("username must be non-empty")


class Genre(enum.Enum):
    TWEET = "tweet"
    FORUM = "forum"
    COMMENTARY = "commentary"
    CONVERSATION = "conversation"
    PLAIN = "plain"


#: source_meta keys each genre must carry after ingestion.
REQUIRED_META: Mapping[Genre, frozenset[str]] = MappingProxyType(
    {
        Genre.TWEET: frozenset({"tweet_id", "author_id"}),
        Genre.FORUM: frozenset({"thread_id", "post_id", "post_order", "author", "participants"}),
        Genre.COMMENTARY: frozenset({"line_no"}),
        Genre.CONVERSATION: frozenset({"line_no"}),
        Genre.PLAIN: frozenset({"line_no"}),
    }
)


class TokenState(enum.Enum):
    UNTAGGED = "untagged"
    AUTO_TAGGED = "auto_tagged"
    MANUAL_TAGGED = "manual_tagged"


@dataclass(frozen=True)
class Token:
    """One clickable surface form inside a unit.

    The tagging state is derived from which tags are present, so the
    state/tag invariant cannot be violated by construction. Manual tags may
    be replaced but never removed: tokens never regress to an earlier state.
    """

    index: int
    surface: str
    char_start: int
    char_end: int
    auto_tag: Optional[str] = None
    manual_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.surface:
            raise ValidationError("token surface must be non-empty")
        if self.index < 0:
            raise ValidationError("token index must be >= 0")
        if not (0 <= self.char_start < self.char_end):
            raise ValidationError(
                f"token span must satisfy 0 <= start < end, got [{self.char_start}, {self.char_end})"
            )

    @property
    def state(self) -> TokenState:
        if self.manual_tag is not None:
            return TokenState.MANUAL_TAGGED
        if self.auto_tag is not None:
            return TokenState.AUTO_TAGGED
        return TokenState.UNTAGGED

    def with_auto_tag(self, tag: str) -> "Token":
        """Assign an automatic tag. Never overwrites human work."""
        if self.manual_tag is not None:
            raise PreconditionError(
                f"token {self.index} already carries a manual tag; auto-tagging would overwrite it"
            )
        return Token(self.index, self.surface, self.char_start, self.char_end, tag, None)

    def with_manual_tag(self, tag: str) -> "Token":
        return Token(self.index, self.surface, self.char_start, self.char_end, self.auto_tag, tag)


@dataclass(frozen=True)
class Unit:
    """One annotatable post, tweet, or line, with its ordered tokens."""

    unit_id: str
    genre: Genre
    source_meta: Mapping[str, str]
    tokens: tuple[Token, ...]
    text: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_meta", MappingProxyType(dict(self.source_meta)))
        if not self.tokens:
            raise ValidationError(f"unit {self.unit_id} has no tokens")
        for i, token in enumerate(self.tokens):
            if token.index != i:
                raise ValidationError(
                    f"unit {self.unit_id}: token indices must be contiguous from 0, "
                    f"found {token.index} at position {i}"
                )
            if i > 0 and token.char_start < self.tokens[i - 1].char_end:
                raise ValidationError(
                    f"unit {self.unit_id}: token spans must be ascending and non-overlapping"
                )
        missing = REQUIRED_META[self.genre] - set(self.source_meta)
        if missing:
            raise ValidationError(
                f"unit {self.unit_id}: genre {self.genre.value} requires meta keys {sorted(missing)}"
            )
        if self.text is not None:
            for token in self.tokens:
                if self.text[token.char_start : token.char_end] != token.surface:
                    raise ValidationError(
                        f"unit {self.unit_id}: span of token {token.index} does not match its surface"
                    )


@dataclass(frozen=True)
class Task:
    task_id: str
    pair_id: str
    genre: Genre
    unit_ids: tuple[str, ...]
    overlap_percent: float
    created_by: str

    def __post_init__(self) -> None:
        if not self.unit_ids:
            raise ValidationError("task must contain at least one unit")
        if len(set(self.unit_ids)) != len(self.unit_ids):
            raise ValidationError("task unit ids must be duplicate-free")
        if not 0.0 <= self.overlap_percent <= 1.0:
            raise ValidationError("overlap_percent must lie in [0, 1]")


class AssignmentStatus(enum.Enum):
    ASSIGNED = "assigned"
    IN_PROGRESS = "in_progress"
    SUBMITTED = "submitted"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class Grade(enum.Enum):
    PASS = "pass"
    NO_PASS = "no_pass"


class AssignmentEvent(enum.Enum):
    START = "start"
    SUBMIT = "submit"
    REOPEN = "reopen"


#: The complete annotator-side transition graph. Reviewing (Submitted ->
#: Accepted/Rejected) is grade-driven, see :func:`review_status`.
TRANSITIONS: Mapping[tuple[AssignmentStatus, AssignmentEvent], AssignmentStatus] = MappingProxyType(
    {
        (AssignmentStatus.ASSIGNED, AssignmentEvent.START): AssignmentStatus.IN_PROGRESS,
        (AssignmentStatus.REJECTED, AssignmentEvent.START): AssignmentStatus.IN_PROGRESS,
        (AssignmentStatus.REJECTED, AssignmentEvent.REOPEN): AssignmentStatus.IN_PROGRESS,
        (AssignmentStatus.IN_PROGRESS, AssignmentEvent.SUBMIT): AssignmentStatus.SUBMITTED,
    }
)


def next_status(status: AssignmentStatus, event: AssignmentEvent) -> AssignmentStatus:
    try:
        return TRANSITIONS[(status, event)]
    except KeyError:
        raise IllegalTransition(f"no edge {status.value} --{event.value}-->") from None


def review_status(status: AssignmentStatus, grade: Grade) -> AssignmentStatus:
    if status is not AssignmentStatus.SUBMITTED:
        raise IllegalTransition(f"cannot grade an assignment in status {status.value}")
    return AssignmentStatus.ACCEPTED if grade is Grade.PASS else AssignmentStatus.REJECTED


@dataclass(frozen=True)
class Assignment:
    """One annotator's slice of a task."""

    assignment_id: str
    task_id: str
    annotator_id: str
    unit_ids: tuple[str, ...]
    status: AssignmentStatus = AssignmentStatus.ASSIGNED
    grade: Optional[Grade] = None
    feedback: Optional[str] = None

    def __post_init__(self) -> None:
        graded = self.status in (AssignmentStatus.ACCEPTED, AssignmentStatus.REJECTED)
        if graded and self.grade is None:
            raise ValidationError(f"status {self.status.value} requires a grade")
        if not graded and self.grade is not None:
            raise ValidationError(f"status {self.status.value} must not carry a grade")
        if self.status is AssignmentStatus.ACCEPTED and self.grade is not Grade.PASS:
            raise ValidationError("accepted assignments carry grade Pass")
        if self.status is AssignmentStatus.REJECTED and self.grade is not Grade.NO_PASS:
            raise ValidationError("rejected assignments carry grade NoPass")


class TagSource(enum.Enum):
    AUTO = "auto"
    MANUAL = "manual"


@dataclass(frozen=True)
class AnnotationRecord:
    """One committed token-tag decision with provenance."""

    assignment_id: str
    unit_id: str
    token_index: int
    tag_name: str
    source: TagSource
    annotator_id: str
    timestamp: datetime


@dataclass(frozen=True)
class TimingRecord:
    assignment_id: str
    unit_id: str
    started_at: datetime
    submitted_at: datetime

    def __post_init__(self) -> None:
        if self.submitted_at < self.started_at:
            raise ValidationError("submitted_at must not precede started_at")

    @property
    def duration_seconds(self) -> float:
        return (self.submitted_at - self.started_at).total_seconds()
