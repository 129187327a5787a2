"""Genre-aware corpus ingestion and the lossless XML export/import round trip.

The export schema is fixed: root element ``wasa`` with ``version="1.0"``,
``task`` elements (attributes id, language, genre) containing ``unit``
elements (attribute id plus flattened ``meta_*`` source metadata)
containing ``token`` elements (attributes id, tag, tag_source, annotator,
timestamp; surface form as text content). Attribute order is fixed as
listed, indentation is two spaces, line endings are LF, escaping is
standard XML. One token element is emitted per committed annotation
record, so exporting the same scope twice is byte-identical and
export -> import -> export is the identity on the bytes.
"""

from __future__ import annotations

import itertools
import json
import uuid
import xml.etree.ElementTree as ElementTree
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

from .domain import (
    REQUIRED_META,
    AnnotationRecord,
    Assignment,
    Genre,
    LanguagePair,
    Role,
    TagSource,
    Task,
    Token,
    Unit,
    UserAccount,
    default_tag_set,
)
from .errors import NotFoundError, ParseError, SchemaError, ValidationError
from .preprocess import CleanConfig, TaggerConfig, clean_text, pretag_unit, tokenize
from .storage import Store, new_id
from .timeutil import parse_iso, to_iso, utc_now

XML_ROOT = "wasa"
XML_VERSION = "1.0"

ALL_EXPORT_FIELDS = frozenset(
    {
        "sentence_id",
        "task_id",
        "language",
        "user_id",
        "word_id",
        "word",
        "tag",
        "tag_source",
        "genre",
        "source_meta",
        "timestamps",
    }
)
MANDATORY_CORE = frozenset({"word_id", "word", "tag"})


@dataclass(frozen=True)
class ExportConfig:
    """Which metadata the XML output carries; word id, word, and tag are
    always included."""

    include_fields: frozenset[str] = ALL_EXPORT_FIELDS

    def __post_init__(self) -> None:
        object.__setattr__(self, "include_fields", frozenset(self.include_fields))
        unknown = self.include_fields - ALL_EXPORT_FIELDS
        if unknown:
            raise ValidationError(f"unknown export fields: {sorted(unknown)}")
        missing = MANDATORY_CORE - self.include_fields
        if missing:
            raise ValidationError(f"mandatory export fields missing: {sorted(missing)}")

    @classmethod
    def parse(cls, spec: str) -> "ExportConfig":
        fields = frozenset(f.strip() for f in spec.split(",") if f.strip())
        return cls(fields)

    def has(self, field_name: str) -> bool:
        return field_name in self.include_fields


# --------------------------------------------------------------------- ingest


@dataclass(frozen=True)
class IngestResult:
    units: tuple[Unit, ...]
    skipped: int  # blank-after-cleaning inputs dropped with a warning count


def _build_unit(
    unit_id: str,
    genre: Genre,
    meta: Mapping[str, str],
    raw_text: str,
    clean_config: CleanConfig,
    tagger_config: TaggerConfig,
    pretag: bool,
) -> Optional[Unit]:
    text = clean_text(raw_text, clean_config)
    spans = tokenize(text, tagger_config)
    if not spans:
        return None
    tokens = tuple(Token(i, s, start, end) for i, (s, start, end) in enumerate(spans))
    unit = Unit(unit_id, genre, meta, tokens, text)
    return pretag_unit(unit, tagger_config) if pretag else unit


def ingest_twitter(
    records: Iterable[Mapping[str, str]],
    clean_config: CleanConfig = CleanConfig(),
    tagger_config: TaggerConfig = TaggerConfig(),
    pretag: bool = True,
) -> IngestResult:
    """One Tweet unit per {tweet_id, user_id, text} record; tweet and author
    ids are preserved in the unit metadata."""
    units: list[Unit] = []
    skipped = 0
    seen: set[str] = set()
    for record in records:
        for key in ("tweet_id", "user_id", "text"):
            if key not in record:
                raise ValidationError(f"tweet record missing field {key!r}")
        tweet_id = str(record["tweet_id"])
        if tweet_id in seen:
            raise ValidationError(f"duplicate tweet_id: {tweet_id}")
        seen.add(tweet_id)
        unit = _build_unit(
            f"tw-{tweet_id}",
            Genre.TWEET,
            {"tweet_id": tweet_id, "author_id": str(record["user_id"])},
            record["text"],
            clean_config,
            tagger_config,
            pretag,
        )
        if unit is None:
            skipped += 1
        else:
            units.append(unit)
    return IngestResult(tuple(units), skipped)


def ingest_forum(
    thread: Mapping,
    clean_config: CleanConfig = CleanConfig(),
    tagger_config: TaggerConfig = TaggerConfig(),
    pretag: bool = True,
) -> IngestResult:
    """One Forum unit per post, keeping thread id, post order, author, and
    the participant list (JSON-encoded verbatim) in the metadata."""
    for key in ("thread_id", "posts", "participants"):
        if key not in thread:
            raise ValidationError(f"forum thread missing field {key!r}")
    posts = list(thread["posts"])
    orders = [post.get("order", position) for position, post in enumerate(posts)]
    if sorted(orders) != list(range(len(posts))):
        raise ValidationError(
            f"post order must be contiguous from 0, got {sorted(orders)}"
        )
    participants = json.dumps(list(thread["participants"]), ensure_ascii=False)
    units: list[Unit] = []
    skipped = 0
    for order, post in sorted(zip(orders, posts), key=lambda pair: pair[0]):
        for key in ("post_id", "author", "text"):
            if key not in post:
                raise ValidationError(f"forum post missing field {key!r}")
        unit = _build_unit(
            f"fm-{thread['thread_id']}-{post['post_id']}",
            Genre.FORUM,
            {
                "thread_id": str(thread["thread_id"]),
                "post_id": str(post["post_id"]),
                "post_order": str(order),
                "author": str(post["author"]),
                "participants": participants,
            },
            post["text"],
            clean_config,
            tagger_config,
            pretag,
        )
        if unit is None:
            skipped += 1
        else:
            units.append(unit)
    return IngestResult(tuple(units), skipped)


_PLAIN_GENRES = (Genre.COMMENTARY, Genre.CONVERSATION, Genre.PLAIN)


def ingest_plain(
    lines: Iterable[str],
    genre: Genre = Genre.PLAIN,
    clean_config: CleanConfig = CleanConfig(),
    tagger_config: TaggerConfig = TaggerConfig(),
    pretag: bool = True,
) -> IngestResult:
    """One unit per non-empty line; blank lines are skipped silently."""
    if genre not in _PLAIN_GENRES:
        raise ValidationError(f"line-based ingestion expects one of {_PLAIN_GENRES}")
    units: list[Unit] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        unit = _build_unit(
            f"pl-{uuid.uuid4().hex[:12]}",
            genre,
            {"line_no": str(line_no)},
            line,
            clean_config,
            tagger_config,
            pretag,
        )
        if unit is not None:
            units.append(unit)
    return IngestResult(tuple(units), 0)


# --------------------------------------------------------------- export model


@dataclass(frozen=True)
class TokenExport:
    word_id: int
    word: str
    tag: str
    tag_source: Optional[str] = None
    annotator: Optional[str] = None
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class UnitExport:
    unit_id: Optional[str]
    meta: Mapping[str, str] = field(default_factory=dict)
    tokens: tuple[TokenExport, ...] = ()


@dataclass(frozen=True)
class TaskExport:
    task_id: Optional[str]
    language: Optional[str]
    genre: Optional[str]
    units: tuple[UnitExport, ...] = ()


@dataclass(frozen=True)
class CorpusExport:
    tasks: tuple[TaskExport, ...]


def _attr(name: str, value: Optional[str], include: bool = True) -> str:
    if value is None or not include:
        return ""
    return f" {name}={quoteattr(value)}"


def render_xml(corpus: CorpusExport, config: ExportConfig = ExportConfig()) -> bytes:
    """Serialize with a fixed byte-exact layout; fields outside the config
    are omitted wholesale."""
    out: list[str] = ['<?xml version="1.0" encoding="UTF-8"?>']
    out.append(f'<{XML_ROOT} version="{XML_VERSION}">')
    for task in corpus.tasks:
        attrs = (
            _attr("id", task.task_id, config.has("task_id"))
            + _attr("language", task.language, config.has("language"))
            + _attr("genre", task.genre, config.has("genre"))
        )
        if not task.units:
            out.append(f"  <task{attrs} />")
            continue
        out.append(f"  <task{attrs}>")
        for unit in task.units:
            uattrs = _attr("id", unit.unit_id, config.has("sentence_id"))
            if config.has("source_meta"):
                for key in sorted(unit.meta):
                    uattrs += _attr(f"meta_{key}", unit.meta[key])
            if not unit.tokens:
                out.append(f"    <unit{uattrs} />")
                continue
            out.append(f"    <unit{uattrs}>")
            for token in unit.tokens:
                tattrs = (
                    _attr("id", str(token.word_id))
                    + _attr("tag", token.tag)
                    + _attr("tag_source", token.tag_source, config.has("tag_source"))
                    + _attr("annotator", token.annotator, config.has("user_id"))
                    + _attr("timestamp", token.timestamp, config.has("timestamps"))
                )
                out.append(f"      <token{tattrs}>{escape(token.word)}</token>")
            out.append("    </unit>")
        out.append("  </task>")
    out.append(f"</{XML_ROOT}>")
    return ("\n".join(out) + "\n").encode("utf-8")


_TASK_ATTRS = {"id", "language", "genre"}
_TOKEN_ATTRS = {"id", "tag", "tag_source", "annotator", "timestamp"}


def parse_xml(data: bytes) -> CorpusExport:
    """Parse a document produced by :func:`render_xml` back into the model.

    Malformed XML raises :class:`ParseError` with line/column; well-formed
    documents violating the schema raise :class:`SchemaError` naming the
    offending element or attribute.
    """
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        line, column = exc.position
        raise ParseError(str(exc.msg), line, column) from None
    if root.tag != XML_ROOT:
        raise SchemaError(XML_ROOT, f"root element must be {XML_ROOT!r}, got {root.tag!r}")
    if root.get("version") != XML_VERSION:
        raise SchemaError(f"{XML_ROOT}/@version", "missing or unsupported schema version")
    tasks: list[TaskExport] = []
    for task_el in root:
        if task_el.tag != "task":
            raise SchemaError(task_el.tag, f"unexpected element {task_el.tag!r} under {XML_ROOT}")
        unknown = set(task_el.attrib) - _TASK_ATTRS
        if unknown:
            raise SchemaError(f"task/@{sorted(unknown)[0]}", "unknown attribute")
        units: list[UnitExport] = []
        for unit_el in task_el:
            if unit_el.tag != "unit":
                raise SchemaError(unit_el.tag, f"unexpected element {unit_el.tag!r} under task")
            meta: dict[str, str] = {}
            for name, value in unit_el.attrib.items():
                if name == "id":
                    continue
                if not name.startswith("meta_"):
                    raise SchemaError(f"unit/@{name}", "unknown attribute")
                meta[name[len("meta_") :]] = value
            tokens: list[TokenExport] = []
            for token_el in unit_el:
                if token_el.tag != "token":
                    raise SchemaError(token_el.tag, f"unexpected element {token_el.tag!r} under unit")
                unknown = set(token_el.attrib) - _TOKEN_ATTRS
                if unknown:
                    raise SchemaError(f"token/@{sorted(unknown)[0]}", "unknown attribute")
                if "id" not in token_el.attrib:
                    raise SchemaError("token/@id")
                if "tag" not in token_el.attrib:
                    raise SchemaError("token/@tag")
                try:
                    word_id = int(token_el.attrib["id"])
                except ValueError:
                    raise SchemaError("token/@id", "token id must be an integer") from None
                word = token_el.text or ""
                if not word:
                    raise SchemaError("token/#text", "token surface must be non-empty")
                tokens.append(
                    TokenExport(
                        word_id=word_id,
                        word=word,
                        tag=token_el.attrib["tag"],
                        tag_source=token_el.get("tag_source"),
                        annotator=token_el.get("annotator"),
                        timestamp=token_el.get("timestamp"),
                    )
                )
            units.append(UnitExport(unit_el.get("id"), meta, tuple(tokens)))
        tasks.append(
            TaskExport(task_el.get("id"), task_el.get("language"), task_el.get("genre"), tuple(units))
        )
    return CorpusExport(tuple(tasks))


# ------------------------------------------------------------- store <-> model


def _records_by_unit_for_task(store: Store, task_id: str, annotator_id: Optional[str] = None):
    records = store.records_for_task(task_id)
    if annotator_id is not None:
        records = [r for r in records if r.annotator_id == annotator_id]
    by_unit: dict[str, list] = {}
    for record in records:
        by_unit.setdefault(record.unit_id, []).append(record)
    return by_unit


def _task_export(
    store: Store,
    task_id: str,
    unit_ids: Sequence[str],
    annotator_id: Optional[str] = None,
) -> TaskExport:
    task = store.get_task(task_id)
    by_unit = _records_by_unit_for_task(store, task_id, annotator_id)
    units: list[UnitExport] = []
    for unit_id in unit_ids:
        unit = store.get_unit(unit_id)
        surfaces = {token.index: token.surface for token in unit.tokens}
        tokens = []
        unit_records = sorted(
            by_unit.get(unit_id, []), key=lambda r: (r.annotator_id, r.token_index)
        )
        for record in unit_records:
            tokens.append(
                TokenExport(
                    word_id=record.token_index,
                    word=surfaces[record.token_index],
                    tag=record.tag_name,
                    tag_source=record.source.value,
                    annotator=record.annotator_id,
                    timestamp=to_iso(record.timestamp),
                )
            )
        units.append(UnitExport(unit_id, dict(unit.source_meta), tuple(tokens)))
    return TaskExport(task.task_id, task.pair_id, task.genre.value, tuple(units))


def build_export_corpus(store: Store, scope: str) -> CorpusExport:
    """Materialize the committed annotations of a scope (``corpus``,
    ``task:ID``, or ``assignment:ID``) as an export model."""
    if scope == "corpus":
        tasks = tuple(
            _task_export(store, task.task_id, task.unit_ids) for task in store.list_tasks()
        )
        return CorpusExport(tasks)
    if scope.startswith("task:"):
        task = store.get_task(scope[len("task:") :])
        return CorpusExport((_task_export(store, task.task_id, task.unit_ids),))
    if scope.startswith("assignment:"):
        assignment = store.get_assignment(scope[len("assignment:") :])
        return CorpusExport(
            (
                _task_export(
                    store, assignment.task_id, assignment.unit_ids, assignment.annotator_id
                ),
            )
        )
    raise ValidationError(f"scope must be corpus, task:ID, or assignment:ID, got {scope!r}")


def export_xml(store: Store, scope: str, config: ExportConfig = ExportConfig()) -> bytes:
    return render_xml(build_export_corpus(store, scope), config)


@dataclass(frozen=True)
class ImportSummary:
    n_tasks: int
    n_units: int
    n_records: int


def _annotator_runs(tokens: Sequence[TokenExport]) -> list[tuple[Optional[str], list[TokenExport]]]:
    """Split a unit's token elements into per-annotator runs.

    With annotator attributes, consecutive equal values form a run. Without
    them, a non-increasing word id starts a new run (each annotator's
    records cover a unit completely and in ascending order).
    """
    attributed = [t.annotator is not None for t in tokens]
    if any(attributed) and not all(attributed):
        raise SchemaError("token/@annotator", "mixed attributed and anonymous tokens")
    runs: list[tuple[Optional[str], list[TokenExport]]] = []
    for token in tokens:
        if runs:
            last_key, last_run = runs[-1]
            if token.annotator is not None:
                if token.annotator == last_key:
                    last_run.append(token)
                    continue
            elif token.word_id > last_run[-1].word_id:
                last_run.append(token)
                continue
        runs.append((token.annotator, [token]))
    return runs


class _Importer:
    def __init__(self, store: Store, importer: UserAccount):
        self.store = store
        self.importer = importer
        self.synthetic_counter = itertools.count(1)
        self.n_units = 0
        self.n_records = 0

    def ensure_pair(self, language: Optional[str]) -> str:
        pair_id = language or "imported"
        try:
            self.store.get_pair(pair_id)
        except NotFoundError:
            self.store.create_pair(
                LanguagePair(pair_id, f"{pair_id}:primary", f"{pair_id}:secondary", default_tag_set())
            )
        return pair_id

    def ensure_user(self, user_id: str, pair_id: str) -> str:
        try:
            user = self.store.get_user(user_id)
            if pair_id not in user.language_pairs:
                self.store.update_user(
                    user_id, language_pairs=set(user.language_pairs) | {pair_id}
                )
            return user_id
        except NotFoundError:
            self.store.create_user(
                UserAccount(
                    user_id=user_id,
                    username=user_id,
                    password_digest="!imported",  # never verifiable
                    role=Role.ANNOTATOR,
                    language_pairs=frozenset({pair_id}),
                    active=False,
                )
            )
            return user_id

    @staticmethod
    def infer_genre(meta: Mapping[str, str], genre_attr: Optional[str]) -> Genre:
        """Genre from the task attribute, else from the meta fingerprint, so
        synthesized required keys never pollute re-exported metadata."""
        if genre_attr:
            return Genre(genre_attr)
        if REQUIRED_META[Genre.TWEET] <= meta.keys():
            return Genre.TWEET
        if REQUIRED_META[Genre.FORUM] <= meta.keys():
            return Genre.FORUM
        return Genre.PLAIN

    def import_unit(self, unit: UnitExport, genre_attr: Optional[str], pair_id: str) -> str:
        unit_id = unit.unit_id or f"im-{uuid.uuid4().hex[:12]}"
        surfaces: dict[int, str] = {}
        for token in unit.tokens:
            if surfaces.get(token.word_id, token.word) != token.word:
                raise SchemaError("token/#text", f"conflicting surfaces for token {token.word_id}")
            surfaces[token.word_id] = token.word
        if surfaces:
            if sorted(surfaces) != list(range(len(surfaces))):
                raise SchemaError("token/@id", "token ids must be contiguous from 0")
            ordered = [surfaces[i] for i in range(len(surfaces))]
        else:
            ordered = ["_"]  # placeholder keeps never-annotated units storable
        meta = dict(unit.meta)
        genre = self.infer_genre(meta, genre_attr)
        for key in REQUIRED_META[genre]:
            meta.setdefault(key, "")
        tokens = []
        cursor = 0
        for index, surface in enumerate(ordered):
            tokens.append(Token(index, surface, cursor, cursor + len(surface)))
            cursor += len(surface) + 1
        self.store.add_units(
            pair_id,
            [Unit(unit_id, genre, meta, tuple(tokens), " ".join(ordered))],
        )
        self.n_units += 1
        return unit_id

    def import_task(self, task: TaskExport) -> None:
        pair_id = self.ensure_pair(task.language)
        genre = Genre(task.genre) if task.genre else Genre.PLAIN
        task_id = task.task_id or new_id("task")
        unit_ids: list[str] = []
        unit_runs: list[tuple[str, list[tuple[Optional[str], list[TokenExport]]]]] = []
        for unit in task.units:
            unit_id = self.import_unit(unit, task.genre, pair_id)
            unit_ids.append(unit_id)
            unit_runs.append((unit_id, _annotator_runs(unit.tokens)))
        self.store.create_task(
            Task(task_id, pair_id, genre, tuple(unit_ids), 0.0, self.importer.user_id)
        )
        # Group runs into per-annotator assignments; anonymous runs each get
        # their own synthetic annotator so replayed records never collide.
        per_annotator: dict[str, list[tuple[str, list[TokenExport]]]] = {}
        for unit_id, runs in unit_runs:
            for annotator, run in runs:
                if annotator is None:
                    annotator = f"imported-{next(self.synthetic_counter):06d}"
                per_annotator.setdefault(annotator, []).append((unit_id, run))
        records = []
        assignments = []
        for annotator_id in sorted(per_annotator):
            self.ensure_user(annotator_id, pair_id)
            covered = []
            for unit_id, run in per_annotator[annotator_id]:
                if unit_id not in covered:
                    covered.append(unit_id)
            assignment_id = new_id("asg")
            assignments.append(
                Assignment(
                    assignment_id=assignment_id,
                    task_id=task_id,
                    annotator_id=annotator_id,
                    unit_ids=tuple(covered),
                )
            )
            for unit_id, run in per_annotator[annotator_id]:
                for token in run:
                    records.append(
                        AnnotationRecord(
                            assignment_id=assignment_id,
                            unit_id=unit_id,
                            token_index=token.word_id,
                            tag_name=token.tag,
                            source=TagSource(token.tag_source or "manual"),
                            annotator_id=annotator_id,
                            timestamp=parse_iso(token.timestamp) if token.timestamp else utc_now(),
                        )
                    )
        if assignments:
            self.store.create_assignments(assignments)
        with self.store.transaction() as conn:
            for record in records:
                self.store._insert_record(conn, record)
        self.n_records += len(records)


def import_xml(store: Store, data: bytes, importer: UserAccount) -> ImportSummary:
    """Reconstruct units, tokens, tasks, and annotation records from an
    exported document. Fields absent from the document (dropped by its
    export config) are synthesized neutrally and never round-trip back out
    under the same config."""
    corpus = parse_xml(data)
    state = _Importer(store, importer)
    with store.transaction():
        for task in corpus.tasks:
            state.import_task(task)
    return ImportSummary(len(corpus.tasks), state.n_units, state.n_records)
