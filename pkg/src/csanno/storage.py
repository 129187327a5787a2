"""Transactional SQLite-backed storage for users, corpora, tasks,
assignments, drafts, annotation records, and timing.

A single-file embedded database keeps a desk-scale deployment free of
external services; the narrow method surface would admit a server-grade
relational backend as a drop-in. All writes run inside IMMEDIATE
transactions (one writer at a time, readers never block under WAL), and
unique-role constraints (one active superuser, one active lead per pair)
are enforced by partial unique indexes in the schema itself, not only in
application code.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import uuid
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .distribution import OverlapPlan
from .domain import (
    AnnotationRecord,
    Assignment,
    AssignmentEvent,
    AssignmentStatus,
    Genre,
    Grade,
    LanguagePair,
    Role,
    TagCategory,
    TagLabel,
    TagSet,
    TagSource,
    Task,
    TimingRecord,
    Token,
    Unit,
    UserAccount,
    next_status,
    review_status,
    validate_tagset,
)
from .errors import (
    ConflictError,
    IllegalTransition,
    IncompleteAnnotationError,
    NotFoundError,
    PermissionDenied,
    ValidationError,
)
from .timeutil import parse_iso, to_iso, utc_now

SCHEMA_VERSION = "1"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta(
  key TEXT PRIMARY KEY,
  value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS users(
  user_id TEXT PRIMARY KEY,
  username TEXT NOT NULL,
  username_ci TEXT NOT NULL UNIQUE,
  password_digest TEXT NOT NULL,
  role TEXT NOT NULL CHECK(role IN ('annotator','lead_annotator','superuser')),
  active INTEGER NOT NULL DEFAULT 1 CHECK(active IN (0,1))
);
CREATE UNIQUE INDEX IF NOT EXISTS users_single_active_superuser
  ON users(role) WHERE role='superuser' AND active=1;
CREATE TABLE IF NOT EXISTS language_pairs(
  pair_id TEXT PRIMARY KEY,
  lang_primary TEXT NOT NULL,
  lang_secondary TEXT NOT NULL,
  CHECK(lang_primary <> lang_secondary)
);
CREATE TABLE IF NOT EXISTS tag_labels(
  pair_id TEXT NOT NULL REFERENCES language_pairs(pair_id),
  position INTEGER NOT NULL,
  name TEXT NOT NULL,
  category TEXT NOT NULL CHECK(category IN ('language','special')),
  color TEXT NOT NULL,
  auto_assignable INTEGER NOT NULL,
  PRIMARY KEY(pair_id, name),
  UNIQUE(pair_id, position)
);
CREATE TABLE IF NOT EXISTS user_pairs(
  user_id TEXT NOT NULL REFERENCES users(user_id),
  pair_id TEXT NOT NULL REFERENCES language_pairs(pair_id),
  role TEXT NOT NULL,
  active INTEGER NOT NULL,
  PRIMARY KEY(user_id, pair_id)
);
CREATE UNIQUE INDEX IF NOT EXISTS user_pairs_single_active_lead
  ON user_pairs(pair_id) WHERE role='lead_annotator' AND active=1;
CREATE TABLE IF NOT EXISTS units(
  unit_id TEXT PRIMARY KEY,
  pair_id TEXT NOT NULL REFERENCES language_pairs(pair_id),
  genre TEXT NOT NULL,
  text TEXT,
  source_meta TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tokens(
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  token_index INTEGER NOT NULL,
  surface TEXT NOT NULL,
  char_start INTEGER NOT NULL,
  char_end INTEGER NOT NULL,
  auto_tag TEXT,
  PRIMARY KEY(unit_id, token_index)
);
CREATE TABLE IF NOT EXISTS tasks(
  task_id TEXT PRIMARY KEY,
  pair_id TEXT NOT NULL REFERENCES language_pairs(pair_id),
  genre TEXT NOT NULL,
  overlap_percent REAL NOT NULL,
  created_by TEXT NOT NULL REFERENCES users(user_id)
);
CREATE TABLE IF NOT EXISTS task_units(
  task_id TEXT NOT NULL REFERENCES tasks(task_id),
  position INTEGER NOT NULL,
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  PRIMARY KEY(task_id, position),
  UNIQUE(task_id, unit_id)
);
CREATE TABLE IF NOT EXISTS plan_shared(
  task_id TEXT NOT NULL REFERENCES tasks(task_id),
  position INTEGER NOT NULL,
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  PRIMARY KEY(task_id, position)
);
CREATE TABLE IF NOT EXISTS plan_exclusive(
  task_id TEXT NOT NULL REFERENCES tasks(task_id),
  annotator_id TEXT NOT NULL REFERENCES users(user_id),
  position INTEGER NOT NULL,
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  PRIMARY KEY(task_id, annotator_id, position)
);
CREATE TABLE IF NOT EXISTS assignments(
  assignment_id TEXT PRIMARY KEY,
  task_id TEXT NOT NULL REFERENCES tasks(task_id),
  annotator_id TEXT NOT NULL REFERENCES users(user_id),
  status TEXT NOT NULL CHECK(status IN ('assigned','in_progress','submitted','accepted','rejected')),
  grade TEXT CHECK(grade IN ('pass','no_pass')),
  feedback TEXT,
  version INTEGER NOT NULL DEFAULT 0,
  UNIQUE(task_id, annotator_id),
  CHECK((status IN ('accepted','rejected')) = (grade IS NOT NULL)),
  CHECK(status <> 'accepted' OR grade = 'pass'),
  CHECK(status <> 'rejected' OR grade = 'no_pass')
);
CREATE TABLE IF NOT EXISTS assignment_units(
  assignment_id TEXT NOT NULL REFERENCES assignments(assignment_id),
  position INTEGER NOT NULL,
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  PRIMARY KEY(assignment_id, position),
  UNIQUE(assignment_id, unit_id)
);
CREATE TABLE IF NOT EXISTS annotation_records(
  assignment_id TEXT NOT NULL REFERENCES assignments(assignment_id),
  unit_id TEXT NOT NULL,
  token_index INTEGER NOT NULL,
  tag_name TEXT NOT NULL,
  source TEXT NOT NULL CHECK(source IN ('auto','manual')),
  annotator_id TEXT NOT NULL REFERENCES users(user_id),
  timestamp TEXT NOT NULL,
  PRIMARY KEY(assignment_id, unit_id, token_index),
  FOREIGN KEY(unit_id, token_index) REFERENCES tokens(unit_id, token_index)
);
CREATE TABLE IF NOT EXISTS unit_versions(
  assignment_id TEXT NOT NULL REFERENCES assignments(assignment_id),
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  version INTEGER NOT NULL,
  PRIMARY KEY(assignment_id, unit_id)
);
CREATE TABLE IF NOT EXISTS drafts(
  assignment_id TEXT NOT NULL REFERENCES assignments(assignment_id),
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  payload TEXT NOT NULL,
  version INTEGER NOT NULL,
  saved_at TEXT NOT NULL,
  PRIMARY KEY(assignment_id, unit_id)
);
CREATE TABLE IF NOT EXISTS timing_records(
  assignment_id TEXT NOT NULL REFERENCES assignments(assignment_id),
  unit_id TEXT NOT NULL REFERENCES units(unit_id),
  started_at TEXT NOT NULL,
  submitted_at TEXT NOT NULL,
  duration_seconds REAL NOT NULL,
  PRIMARY KEY(assignment_id, unit_id)
);
"""

_CONSTRAINT_MESSAGES = {
    "users.username_ci": "username already taken (case-insensitive)",
    "users.role": "an active superuser already exists",
    "user_pairs.pair_id": "language pair already has an active lead annotator",
    "task_units.task_id, task_units.unit_id": "task unit ids must be duplicate-free",
}


def _map_integrity_error(exc: sqlite3.IntegrityError) -> Exception:
    message = str(exc)
    for needle, friendly in _CONSTRAINT_MESSAGES.items():
        if needle in message:
            return ValidationError(friendly)
    return ValidationError(message)


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


class Store:
    """Embedded relational store; one instance may be shared across threads
    (each thread gets its own connection)."""

    def __init__(self, path: str | Path = ":memory:"):
        if str(path) == ":memory:":
            # Shared-cache URI so every thread sees the same in-memory db.
            self._uri = f"file:csanno-{uuid.uuid4().hex}?mode=memory&cache=shared"
            self._anchor = sqlite3.connect(self._uri, uri=True, check_same_thread=False)
        else:
            self._uri = f"file:{Path(path).resolve()}"
            self._anchor = None
        self._local = threading.local()
        conn = self._connection()
        conn.executescript(_SCHEMA)  # runs in autocommit mode
        with self.transaction() as conn:
            conn.execute(
                "INSERT OR IGNORE INTO meta(key, value) VALUES ('schema_version', ?)",
                (SCHEMA_VERSION,),
            )

    def _connection(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self._uri, uri=True, timeout=30, isolation_level=None)
            conn.row_factory = sqlite3.Row
            conn.execute("PRAGMA foreign_keys=ON")
            conn.execute("PRAGMA busy_timeout=30000")
            if self._anchor is None:
                conn.execute("PRAGMA journal_mode=WAL")
            self._local.conn = conn
        return conn

    def close(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None
        if self._anchor is not None:
            self._anchor.close()

    @contextmanager
    def transaction(self, write: bool = True) -> Iterator[sqlite3.Connection]:
        """Scope a transaction; nested uses join the enclosing one.

        Writes take the database lock up front (BEGIN IMMEDIATE) so
        concurrent writers serialize; reads get a consistent snapshot.
        """
        conn = self._connection()
        if conn.in_transaction:
            yield conn
            return
        conn.execute("BEGIN IMMEDIATE" if write else "BEGIN")
        try:
            yield conn
        except sqlite3.IntegrityError as exc:
            conn.execute("ROLLBACK")
            raise _map_integrity_error(exc) from exc
        except BaseException:
            conn.execute("ROLLBACK")
            raise
        else:
            conn.execute("COMMIT")

    # ------------------------------------------------------------------ users

    def create_user(self, user: UserAccount) -> UserAccount:
        with self.transaction() as conn:
            for pair_id in user.language_pairs:
                if conn.execute(
                    "SELECT 1 FROM language_pairs WHERE pair_id=?", (pair_id,)
                ).fetchone() is None:
                    raise NotFoundError(f"unknown language pair: {pair_id}")
            conn.execute(
                "INSERT INTO users(user_id, username, username_ci, password_digest, role, active)"
                " VALUES (?,?,?,?,?,?)",
                (
                    user.user_id,
                    user.username,
                    user.username.casefold(),
                    user.password_digest,
                    user.role.value,
                    int(user.active),
                ),
            )
            self._sync_user_pairs(conn, user.user_id, user.language_pairs, user.role, user.active)
        return user

    def _sync_user_pairs(
        self,
        conn: sqlite3.Connection,
        user_id: str,
        pair_ids: Iterable[str],
        role: Role,
        active: bool,
    ) -> None:
        conn.execute("DELETE FROM user_pairs WHERE user_id=?", (user_id,))
        for pair_id in sorted(pair_ids):
            conn.execute(
                "INSERT INTO user_pairs(user_id, pair_id, role, active) VALUES (?,?,?,?)",
                (user_id, pair_id, role.value, int(active)),
            )

    def _row_to_user(self, conn: sqlite3.Connection, row: sqlite3.Row) -> UserAccount:
        pairs = frozenset(
            r["pair_id"]
            for r in conn.execute("SELECT pair_id FROM user_pairs WHERE user_id=?", (row["user_id"],))
        )
        return UserAccount(
            user_id=row["user_id"],
            username=row["username"],
            password_digest=row["password_digest"],
            role=Role(row["role"]),
            language_pairs=pairs,
            active=bool(row["active"]),
        )

    def get_user(self, user_id: str) -> UserAccount:
        with self.transaction(write=False) as conn:
            row = conn.execute("SELECT * FROM users WHERE user_id=?", (user_id,)).fetchone()
            if row is None:
                raise NotFoundError(f"unknown user: {user_id}")
            return self._row_to_user(conn, row)

    def find_user_by_username(self, username: str) -> Optional[UserAccount]:
        with self.transaction(write=False) as conn:
            row = conn.execute(
                "SELECT * FROM users WHERE username_ci=?", (username.casefold(),)
            ).fetchone()
            return None if row is None else self._row_to_user(conn, row)

    def list_users(self) -> list[UserAccount]:
        with self.transaction(write=False) as conn:
            rows = conn.execute("SELECT * FROM users ORDER BY rowid").fetchall()
            return [self._row_to_user(conn, row) for row in rows]

    def update_user(
        self,
        user_id: str,
        *,
        password_digest: Optional[str] = None,
        active: Optional[bool] = None,
        role: Optional[Role] = None,
        language_pairs: Optional[Iterable[str]] = None,
    ) -> UserAccount:
        with self.transaction() as conn:
            row = conn.execute("SELECT * FROM users WHERE user_id=?", (user_id,)).fetchone()
            if row is None:
                raise NotFoundError(f"unknown user: {user_id}")
            current_role = Role(row["role"])
            new_role = role if role is not None else current_role
            new_active = active if active is not None else bool(row["active"])
            if current_role is Role.SUPERUSER and (
                new_role is not Role.SUPERUSER or not new_active
            ):
                raise ValidationError("cannot demote or deactivate the superuser")
            if password_digest is not None:
                conn.execute(
                    "UPDATE users SET password_digest=? WHERE user_id=?", (password_digest, user_id)
                )
            conn.execute(
                "UPDATE users SET role=?, active=? WHERE user_id=?",
                (new_role.value, int(new_active), user_id),
            )
            if language_pairs is not None:
                pair_ids = set(language_pairs)
                for pair_id in pair_ids:
                    if conn.execute(
                        "SELECT 1 FROM language_pairs WHERE pair_id=?", (pair_id,)
                    ).fetchone() is None:
                        raise NotFoundError(f"unknown language pair: {pair_id}")
            else:
                pair_ids = {
                    r["pair_id"]
                    for r in conn.execute(
                        "SELECT pair_id FROM user_pairs WHERE user_id=?", (user_id,)
                    )
                }
            self._sync_user_pairs(conn, user_id, pair_ids, new_role, new_active)
            refreshed = conn.execute("SELECT * FROM users WHERE user_id=?", (user_id,)).fetchone()
            return self._row_to_user(conn, refreshed)

    def ensure_superuser(self, username: str, password_digest: str) -> UserAccount:
        """Create the single superuser account if none is active yet."""
        with self.transaction() as conn:
            row = conn.execute(
                "SELECT * FROM users WHERE role='superuser' AND active=1"
            ).fetchone()
            if row is not None:
                return self._row_to_user(conn, row)
        return self.create_user(
            UserAccount(new_id("user"), username, password_digest, Role.SUPERUSER)
        )

    # ------------------------------------------------------------------ pairs

    def create_pair(self, pair: LanguagePair) -> LanguagePair:
        violations = validate_tagset(pair.tag_set)
        if violations:
            raise ValidationError(f"invalid tag set: {violations}")
        with self.transaction() as conn:
            try:
                conn.execute(
                    "INSERT INTO language_pairs(pair_id, lang_primary, lang_secondary) VALUES (?,?,?)",
                    (pair.pair_id, pair.lang_primary, pair.lang_secondary),
                )
            except sqlite3.IntegrityError:
                raise ValidationError(f"language pair {pair.pair_id} already exists") from None
            for position, label in enumerate(pair.tag_set.labels):
                conn.execute(
                    "INSERT INTO tag_labels(pair_id, position, name, category, color, auto_assignable)"
                    " VALUES (?,?,?,?,?,?)",
                    (
                        pair.pair_id,
                        position,
                        label.name,
                        label.category.value,
                        label.color,
                        int(label.auto_assignable),
                    ),
                )
        return pair

    def get_pair(self, pair_id: str) -> LanguagePair:
        with self.transaction(write=False) as conn:
            row = conn.execute(
                "SELECT * FROM language_pairs WHERE pair_id=?", (pair_id,)
            ).fetchone()
            if row is None:
                raise NotFoundError(f"unknown language pair: {pair_id}")
            labels = tuple(
                TagLabel(
                    r["name"], TagCategory(r["category"]), r["color"], bool(r["auto_assignable"])
                )
                for r in conn.execute(
                    "SELECT * FROM tag_labels WHERE pair_id=? ORDER BY position", (pair_id,)
                )
            )
            return LanguagePair(row["pair_id"], row["lang_primary"], row["lang_secondary"], TagSet(labels))

    def list_pairs(self) -> list[LanguagePair]:
        with self.transaction(write=False) as conn:
            ids = [r["pair_id"] for r in conn.execute("SELECT pair_id FROM language_pairs ORDER BY rowid")]
        return [self.get_pair(pair_id) for pair_id in ids]

    def active_lead_for_pair(self, pair_id: str) -> Optional[UserAccount]:
        with self.transaction(write=False) as conn:
            row = conn.execute(
                "SELECT u.* FROM users u JOIN user_pairs up ON up.user_id = u.user_id"
                " WHERE up.pair_id=? AND up.role='lead_annotator' AND up.active=1",
                (pair_id,),
            ).fetchone()
            return None if row is None else self._row_to_user(conn, row)

    # ------------------------------------------------------------------ corpus

    def add_units(self, pair_id: str, units: Sequence[Unit]) -> None:
        with self.transaction() as conn:
            if conn.execute(
                "SELECT 1 FROM language_pairs WHERE pair_id=?", (pair_id,)
            ).fetchone() is None:
                raise NotFoundError(f"unknown language pair: {pair_id}")
            for unit in units:
                if conn.execute(
                    "SELECT 1 FROM units WHERE unit_id=?", (unit.unit_id,)
                ).fetchone() is not None:
                    raise ValidationError(f"duplicate unit id: {unit.unit_id}")
                conn.execute(
                    "INSERT INTO units(unit_id, pair_id, genre, text, source_meta) VALUES (?,?,?,?,?)",
                    (
                        unit.unit_id,
                        pair_id,
                        unit.genre.value,
                        unit.text,
                        json.dumps(dict(unit.source_meta), ensure_ascii=False, sort_keys=True),
                    ),
                )
                for token in unit.tokens:
                    conn.execute(
                        "INSERT INTO tokens(unit_id, token_index, surface, char_start, char_end, auto_tag)"
                        " VALUES (?,?,?,?,?,?)",
                        (
                            unit.unit_id,
                            token.index,
                            token.surface,
                            token.char_start,
                            token.char_end,
                            token.auto_tag,
                        ),
                    )

    def _unit_from_rows(self, row: sqlite3.Row, token_rows: Sequence[sqlite3.Row]) -> Unit:
        tokens = tuple(
            Token(
                r["token_index"],
                r["surface"],
                r["char_start"],
                r["char_end"],
                r["auto_tag"],
            )
            for r in token_rows
        )
        return Unit(
            unit_id=row["unit_id"],
            genre=Genre(row["genre"]),
            source_meta=json.loads(row["source_meta"]),
            tokens=tokens,
            text=row["text"],
        )

    def get_unit(self, unit_id: str) -> Unit:
        with self.transaction(write=False) as conn:
            row = conn.execute("SELECT * FROM units WHERE unit_id=?", (unit_id,)).fetchone()
            if row is None:
                raise NotFoundError(f"unknown unit: {unit_id}")
            token_rows = conn.execute(
                "SELECT * FROM tokens WHERE unit_id=? ORDER BY token_index", (unit_id,)
            ).fetchall()
            return self._unit_from_rows(row, token_rows)

    def unit_pair(self, unit_id: str) -> str:
        with self.transaction(write=False) as conn:
            row = conn.execute("SELECT pair_id FROM units WHERE unit_id=?", (unit_id,)).fetchone()
            if row is None:
                raise NotFoundError(f"unknown unit: {unit_id}")
            return row["pair_id"]

    def list_units(self, pair_id: Optional[str] = None) -> list[Unit]:
        with self.transaction(write=False) as conn:
            if pair_id is None:
                rows = conn.execute("SELECT * FROM units ORDER BY rowid").fetchall()
            else:
                rows = conn.execute(
                    "SELECT * FROM units WHERE pair_id=? ORDER BY rowid", (pair_id,)
                ).fetchall()
            result = []
            for row in rows:
                token_rows = conn.execute(
                    "SELECT * FROM tokens WHERE unit_id=? ORDER BY token_index", (row["unit_id"],)
                ).fetchall()
                result.append(self._unit_from_rows(row, token_rows))
            return result

    def replace_unit_tokens(self, unit: Unit) -> None:
        """Swap a unit's tokens (re-tokenization or re-pretagging). Refused
        once annotation work references the unit."""
        with self.transaction() as conn:
            if conn.execute(
                "SELECT 1 FROM annotation_records WHERE unit_id=? LIMIT 1", (unit.unit_id,)
            ).fetchone() is not None:
                raise ConflictError(f"unit {unit.unit_id} already has committed annotations")
            if conn.execute(
                "SELECT 1 FROM drafts WHERE unit_id=? LIMIT 1", (unit.unit_id,)
            ).fetchone() is not None:
                raise ConflictError(f"unit {unit.unit_id} has saved drafts")
            conn.execute("DELETE FROM tokens WHERE unit_id=?", (unit.unit_id,))
            for token in unit.tokens:
                conn.execute(
                    "INSERT INTO tokens(unit_id, token_index, surface, char_start, char_end, auto_tag)"
                    " VALUES (?,?,?,?,?,?)",
                    (
                        unit.unit_id,
                        token.index,
                        token.surface,
                        token.char_start,
                        token.char_end,
                        token.auto_tag,
                    ),
                )

    # ------------------------------------------------------------------ tasks

    def create_task(self, task: Task) -> Task:
        with self.transaction() as conn:
            for unit_id in task.unit_ids:
                row = conn.execute("SELECT pair_id FROM units WHERE unit_id=?", (unit_id,)).fetchone()
                if row is None:
                    raise NotFoundError(f"unknown unit: {unit_id}")
                if row["pair_id"] != task.pair_id:
                    raise ValidationError(
                        f"unit {unit_id} belongs to pair {row['pair_id']}, not {task.pair_id}"
                    )
            conn.execute(
                "INSERT INTO tasks(task_id, pair_id, genre, overlap_percent, created_by)"
                " VALUES (?,?,?,?,?)",
                (task.task_id, task.pair_id, task.genre.value, task.overlap_percent, task.created_by),
            )
            for position, unit_id in enumerate(task.unit_ids):
                conn.execute(
                    "INSERT INTO task_units(task_id, position, unit_id) VALUES (?,?,?)",
                    (task.task_id, position, unit_id),
                )
        return task

    def get_task(self, task_id: str) -> Task:
        with self.transaction(write=False) as conn:
            row = conn.execute("SELECT * FROM tasks WHERE task_id=?", (task_id,)).fetchone()
            if row is None:
                raise NotFoundError(f"unknown task: {task_id}")
            unit_ids = tuple(
                r["unit_id"]
                for r in conn.execute(
                    "SELECT unit_id FROM task_units WHERE task_id=? ORDER BY position", (task_id,)
                )
            )
            return Task(
                task_id=row["task_id"],
                pair_id=row["pair_id"],
                genre=Genre(row["genre"]),
                unit_ids=unit_ids,
                overlap_percent=row["overlap_percent"],
                created_by=row["created_by"],
            )

    def list_tasks(self, pair_id: Optional[str] = None) -> list[Task]:
        with self.transaction(write=False) as conn:
            if pair_id is None:
                rows = conn.execute("SELECT task_id FROM tasks ORDER BY rowid").fetchall()
            else:
                rows = conn.execute(
                    "SELECT task_id FROM tasks WHERE pair_id=? ORDER BY rowid", (pair_id,)
                ).fetchall()
        return [self.get_task(r["task_id"]) for r in rows]

    def save_plan(self, task_id: str, plan: OverlapPlan) -> None:
        with self.transaction() as conn:
            for position, unit_id in enumerate(plan.shared_unit_ids):
                conn.execute(
                    "INSERT INTO plan_shared(task_id, position, unit_id) VALUES (?,?,?)",
                    (task_id, position, unit_id),
                )
            for annotator_id, unit_ids in plan.exclusive_unit_ids.items():
                for position, unit_id in enumerate(unit_ids):
                    conn.execute(
                        "INSERT INTO plan_exclusive(task_id, annotator_id, position, unit_id)"
                        " VALUES (?,?,?,?)",
                        (task_id, annotator_id, position, unit_id),
                    )

    def get_plan(self, task_id: str) -> OverlapPlan:
        with self.transaction(write=False) as conn:
            shared = tuple(
                r["unit_id"]
                for r in conn.execute(
                    "SELECT unit_id FROM plan_shared WHERE task_id=? ORDER BY position", (task_id,)
                )
            )
            exclusive: dict[str, list[str]] = {}
            for r in conn.execute(
                "SELECT annotator_id, unit_id FROM plan_exclusive WHERE task_id=?"
                " ORDER BY annotator_id, position",
                (task_id,),
            ):
                exclusive.setdefault(r["annotator_id"], []).append(r["unit_id"])
            annotators = {
                r["annotator_id"]
                for r in conn.execute(
                    "SELECT annotator_id FROM assignments WHERE task_id=?", (task_id,)
                )
            }
            if not shared and not exclusive and not annotators:
                raise NotFoundError(f"no plan stored for task {task_id}")
            for annotator_id in annotators:
                exclusive.setdefault(annotator_id, [])
            return OverlapPlan(shared, {a: tuple(u) for a, u in exclusive.items()})

    # ------------------------------------------------------------ assignments

    def create_assignments(self, assignments: Sequence[Assignment]) -> None:
        with self.transaction() as conn:
            for assignment in assignments:
                conn.execute(
                    "INSERT INTO assignments(assignment_id, task_id, annotator_id, status, grade, feedback)"
                    " VALUES (?,?,?,?,?,?)",
                    (
                        assignment.assignment_id,
                        assignment.task_id,
                        assignment.annotator_id,
                        assignment.status.value,
                        assignment.grade.value if assignment.grade else None,
                        assignment.feedback,
                    ),
                )
                for position, unit_id in enumerate(assignment.unit_ids):
                    conn.execute(
                        "INSERT INTO assignment_units(assignment_id, position, unit_id) VALUES (?,?,?)",
                        (assignment.assignment_id, position, unit_id),
                    )

    def _assignment_from_row(self, conn: sqlite3.Connection, row: sqlite3.Row) -> Assignment:
        unit_ids = tuple(
            r["unit_id"]
            for r in conn.execute(
                "SELECT unit_id FROM assignment_units WHERE assignment_id=? ORDER BY position",
                (row["assignment_id"],),
            )
        )
        return Assignment(
            assignment_id=row["assignment_id"],
            task_id=row["task_id"],
            annotator_id=row["annotator_id"],
            unit_ids=unit_ids,
            status=AssignmentStatus(row["status"]),
            grade=Grade(row["grade"]) if row["grade"] else None,
            feedback=row["feedback"],
        )

    def _get_assignment_row(self, conn: sqlite3.Connection, assignment_id: str) -> sqlite3.Row:
        row = conn.execute(
            "SELECT * FROM assignments WHERE assignment_id=?", (assignment_id,)
        ).fetchone()
        if row is None:
            raise NotFoundError(f"unknown assignment: {assignment_id}")
        return row

    def get_assignment(self, assignment_id: str) -> Assignment:
        with self.transaction(write=False) as conn:
            return self._assignment_from_row(conn, self._get_assignment_row(conn, assignment_id))

    def assignment_version(self, assignment_id: str) -> int:
        with self.transaction(write=False) as conn:
            return self._get_assignment_row(conn, assignment_id)["version"]

    def assignments_for_task(self, task_id: str) -> list[Assignment]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT * FROM assignments WHERE task_id=? ORDER BY annotator_id", (task_id,)
            ).fetchall()
            return [self._assignment_from_row(conn, row) for row in rows]

    def assignments_for_annotator(self, annotator_id: str) -> list[Assignment]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT * FROM assignments WHERE annotator_id=? ORDER BY rowid", (annotator_id,)
            ).fetchall()
            return [self._assignment_from_row(conn, row) for row in rows]

    def _bump_assignment(self, conn: sqlite3.Connection, assignment_id: str) -> None:
        conn.execute(
            "UPDATE assignments SET version = version + 1 WHERE assignment_id=?", (assignment_id,)
        )

    def _missing_indices(
        self, conn: sqlite3.Connection, assignment_id: str, unit_id: str
    ) -> tuple[list[int], bool]:
        """Untagged token indices of a unit under this assignment; second
        element tells whether any committed record exists for the unit."""
        token_rows = conn.execute(
            "SELECT token_index, auto_tag FROM tokens WHERE unit_id=? ORDER BY token_index",
            (unit_id,),
        ).fetchall()
        recorded = {
            r["token_index"]
            for r in conn.execute(
                "SELECT token_index FROM annotation_records WHERE assignment_id=? AND unit_id=?",
                (assignment_id, unit_id),
            )
        }
        missing = [
            r["token_index"]
            for r in token_rows
            if r["token_index"] not in recorded and r["auto_tag"] is None
        ]
        return missing, bool(recorded)

    def transition_assignment(self, assignment_id: str, event: AssignmentEvent) -> Assignment:
        """Drive the assignment state machine inside one write transaction.

        Submit checks token completeness across every assigned unit, then
        materializes endorsement records (source=auto) and zero-length
        timing stamps for fully auto-tagged units the annotator never
        touched, so submitted assignments always carry a complete record
        set.
        """
        with self.transaction() as conn:
            row = self._get_assignment_row(conn, assignment_id)
            status = AssignmentStatus(row["status"])
            new = next_status(status, event)  # raises IllegalTransition
            if event is AssignmentEvent.SUBMIT:
                self._complete_submission(conn, assignment_id, row["annotator_id"])
            conn.execute(
                "UPDATE assignments SET status=?, grade=NULL, version=version+1 WHERE assignment_id=?",
                (new.value, assignment_id),
            )
            return self._assignment_from_row(
                conn, self._get_assignment_row(conn, assignment_id)
            )

    def _complete_submission(
        self, conn: sqlite3.Connection, assignment_id: str, annotator_id: str
    ) -> None:
        unit_ids = [
            r["unit_id"]
            for r in conn.execute(
                "SELECT unit_id FROM assignment_units WHERE assignment_id=? ORDER BY position",
                (assignment_id,),
            )
        ]
        incomplete: dict[str, list[int]] = {}
        untouched_complete: list[str] = []
        for unit_id in unit_ids:
            missing, has_records = self._missing_indices(conn, assignment_id, unit_id)
            if missing:
                incomplete[unit_id] = missing
            elif not has_records:
                untouched_complete.append(unit_id)
        if incomplete:
            raise IncompleteAnnotationError(incomplete)
        now = utc_now()
        now_iso = to_iso(now)
        for unit_id in untouched_complete:
            for r in conn.execute(
                "SELECT token_index, auto_tag FROM tokens WHERE unit_id=? ORDER BY token_index",
                (unit_id,),
            ):
                self._insert_record(
                    conn,
                    AnnotationRecord(
                        assignment_id,
                        unit_id,
                        r["token_index"],
                        r["auto_tag"],
                        TagSource.AUTO,
                        annotator_id,
                        now,
                    ),
                )
        for unit_id in unit_ids:
            if conn.execute(
                "SELECT 1 FROM timing_records WHERE assignment_id=? AND unit_id=?",
                (assignment_id, unit_id),
            ).fetchone() is None:
                conn.execute(
                    "INSERT INTO timing_records(assignment_id, unit_id, started_at, submitted_at, duration_seconds)"
                    " VALUES (?,?,?,?,0)",
                    (assignment_id, unit_id, now_iso, now_iso),
                )

    def review_assignment(
        self, assignment_id: str, grade: Grade, feedback: Optional[str] = None
    ) -> Assignment:
        with self.transaction() as conn:
            row = self._get_assignment_row(conn, assignment_id)
            new = review_status(AssignmentStatus(row["status"]), grade)  # IllegalTransition
            conn.execute(
                "UPDATE assignments SET status=?, grade=?, feedback=?, version=version+1"
                " WHERE assignment_id=?",
                (new.value, grade.value, feedback, assignment_id),
            )
            return self._assignment_from_row(
                conn, self._get_assignment_row(conn, assignment_id)
            )

    # ------------------------------------------------------------- annotation

    def _require_owned_in_progress(
        self, conn: sqlite3.Connection, assignment_id: str, caller_id: str, unit_id: str
    ) -> sqlite3.Row:
        row = self._get_assignment_row(conn, assignment_id)
        if row["annotator_id"] != caller_id:
            raise PermissionDenied("assignment belongs to another annotator")
        if AssignmentStatus(row["status"]) is not AssignmentStatus.IN_PROGRESS:
            raise IllegalTransition(
                f"assignment is {row['status']}, not in_progress"
            )
        if conn.execute(
            "SELECT 1 FROM assignment_units WHERE assignment_id=? AND unit_id=?",
            (assignment_id, unit_id),
        ).fetchone() is None:
            raise NotFoundError(f"unit {unit_id} is not part of assignment {assignment_id}")
        return row

    def save_draft(
        self,
        assignment_id: str,
        caller_id: str,
        unit_id: str,
        tags: Mapping[int, str],
    ) -> int:
        """Store a partial token->tag map; the latest draft per unit wins."""
        with self.transaction() as conn:
            self._require_owned_in_progress(conn, assignment_id, caller_id, unit_id)
            n_tokens = conn.execute(
                "SELECT COUNT(*) AS n FROM tokens WHERE unit_id=?", (unit_id,)
            ).fetchone()["n"]
            for index in tags:
                if not 0 <= int(index) < n_tokens:
                    raise ValidationError(f"token index {index} out of range for unit {unit_id}")
            previous = conn.execute(
                "SELECT version FROM drafts WHERE assignment_id=? AND unit_id=?",
                (assignment_id, unit_id),
            ).fetchone()
            version = (previous["version"] + 1) if previous else 1
            payload = json.dumps({str(k): v for k, v in tags.items()}, sort_keys=True)
            conn.execute(
                "INSERT INTO drafts(assignment_id, unit_id, payload, version, saved_at)"
                " VALUES (?,?,?,?,?)"
                " ON CONFLICT(assignment_id, unit_id) DO UPDATE SET"
                " payload=excluded.payload, version=excluded.version, saved_at=excluded.saved_at",
                (assignment_id, unit_id, payload, version, to_iso(utc_now())),
            )
            self._bump_assignment(conn, assignment_id)
            return version

    def load_draft(self, assignment_id: str, unit_id: str) -> Optional[dict[int, str]]:
        with self.transaction(write=False) as conn:
            row = conn.execute(
                "SELECT payload FROM drafts WHERE assignment_id=? AND unit_id=?",
                (assignment_id, unit_id),
            ).fetchone()
            if row is None:
                return None
            return {int(k): v for k, v in json.loads(row["payload"]).items()}

    def _insert_record(self, conn: sqlite3.Connection, record: AnnotationRecord) -> None:
        """Single-record insert; split out so fault-injection tests can make
        a mid-transaction write fail."""
        conn.execute(
            "INSERT INTO annotation_records(assignment_id, unit_id, token_index, tag_name,"
            " source, annotator_id, timestamp) VALUES (?,?,?,?,?,?,?)",
            (
                record.assignment_id,
                record.unit_id,
                record.token_index,
                record.tag_name,
                record.source.value,
                record.annotator_id,
                to_iso(record.timestamp) if isinstance(record.timestamp, datetime) else record.timestamp,
            ),
        )

    def submit_unit_annotations(
        self,
        assignment_id: str,
        caller_id: str,
        unit_id: str,
        tags: Mapping[int, str],
        expected_version: int = 0,
        started_at: Optional[datetime] = None,
    ) -> tuple[list[AnnotationRecord], int]:
        """Commit the complete tag list for one unit atomically.

        Replaces any earlier records for the unit, deletes its draft, writes
        the timing record, and bumps the per-unit version counter. A stale
        ``expected_version`` (someone else committed first) raises
        :class:`ConflictError` and writes nothing.
        """
        with self.transaction() as conn:
            self._require_owned_in_progress(conn, assignment_id, caller_id, unit_id)
            token_rows = conn.execute(
                "SELECT token_index, auto_tag FROM tokens WHERE unit_id=? ORDER BY token_index",
                (unit_id,),
            ).fetchall()
            expected_indices = {r["token_index"] for r in token_rows}
            provided = {int(k): v for k, v in tags.items()}
            missing = sorted(expected_indices - provided.keys())
            if missing or provided.keys() - expected_indices:
                extra = sorted(provided.keys() - expected_indices)
                if extra:
                    raise ValidationError(f"unknown token indices for unit {unit_id}: {extra}")
                raise IncompleteAnnotationError({unit_id: missing})
            pair_id = conn.execute(
                "SELECT pair_id FROM units WHERE unit_id=?", (unit_id,)
            ).fetchone()["pair_id"]
            valid_tags = {
                r["name"]
                for r in conn.execute("SELECT name FROM tag_labels WHERE pair_id=?", (pair_id,))
            }
            for index, tag in provided.items():
                if tag not in valid_tags:
                    raise ValidationError(f"unknown tag {tag!r} for pair {pair_id}")
            current_row = conn.execute(
                "SELECT version FROM unit_versions WHERE assignment_id=? AND unit_id=?",
                (assignment_id, unit_id),
            ).fetchone()
            current_version = current_row["version"] if current_row else 0
            if current_version != expected_version:
                raise ConflictError(
                    f"unit {unit_id} is at version {current_version}, caller expected {expected_version}"
                )
            auto_tags = {r["token_index"]: r["auto_tag"] for r in token_rows}
            now = utc_now()
            conn.execute(
                "DELETE FROM annotation_records WHERE assignment_id=? AND unit_id=?",
                (assignment_id, unit_id),
            )
            records = []
            for index in sorted(provided):
                tag = provided[index]
                source = TagSource.AUTO if tag == auto_tags[index] else TagSource.MANUAL
                record = AnnotationRecord(assignment_id, unit_id, index, tag, source, caller_id, now)
                self._insert_record(conn, record)
                records.append(record)
            conn.execute(
                "DELETE FROM drafts WHERE assignment_id=? AND unit_id=?", (assignment_id, unit_id)
            )
            self._write_timing(conn, assignment_id, unit_id, started_at or now, now)
            new_version = current_version + 1
            conn.execute(
                "INSERT INTO unit_versions(assignment_id, unit_id, version) VALUES (?,?,?)"
                " ON CONFLICT(assignment_id, unit_id) DO UPDATE SET version=excluded.version",
                (assignment_id, unit_id, new_version),
            )
            self._bump_assignment(conn, assignment_id)
            return records, new_version

    def _write_timing(
        self,
        conn: sqlite3.Connection,
        assignment_id: str,
        unit_id: str,
        started_at: datetime,
        submitted_at: datetime,
    ) -> TimingRecord:
        record = TimingRecord(assignment_id, unit_id, started_at, submitted_at)  # validates order
        conn.execute(
            "INSERT INTO timing_records(assignment_id, unit_id, started_at, submitted_at, duration_seconds)"
            " VALUES (?,?,?,?,?)"
            " ON CONFLICT(assignment_id, unit_id) DO UPDATE SET"
            " started_at=excluded.started_at, submitted_at=excluded.submitted_at,"
            " duration_seconds=excluded.duration_seconds",
            (
                assignment_id,
                unit_id,
                to_iso(started_at),
                to_iso(submitted_at),
                record.duration_seconds,
            ),
        )
        return record

    def record_timing(
        self, assignment_id: str, unit_id: str, started_at: datetime, submitted_at: datetime
    ) -> TimingRecord:
        """One timing record per (assignment, unit); re-submission overwrites."""
        if submitted_at < started_at:
            raise ValidationError("submitted_at must not precede started_at")
        with self.transaction() as conn:
            self._get_assignment_row(conn, assignment_id)
            return self._write_timing(conn, assignment_id, unit_id, started_at, submitted_at)

    # ---------------------------------------------------------------- queries

    def _record_from_row(self, row: sqlite3.Row) -> AnnotationRecord:
        return AnnotationRecord(
            assignment_id=row["assignment_id"],
            unit_id=row["unit_id"],
            token_index=row["token_index"],
            tag_name=row["tag_name"],
            source=TagSource(row["source"]),
            annotator_id=row["annotator_id"],
            timestamp=parse_iso(row["timestamp"]),
        )

    def records_for_assignment(self, assignment_id: str) -> list[AnnotationRecord]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT * FROM annotation_records WHERE assignment_id=?"
                " ORDER BY unit_id, token_index",
                (assignment_id,),
            ).fetchall()
            return [self._record_from_row(r) for r in rows]

    def records_for_task(self, task_id: str) -> list[AnnotationRecord]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT ar.* FROM annotation_records ar"
                " JOIN assignments a ON a.assignment_id = ar.assignment_id"
                " WHERE a.task_id=? ORDER BY ar.unit_id, ar.annotator_id, ar.token_index",
                (task_id,),
            ).fetchall()
            return [self._record_from_row(r) for r in rows]

    def all_records(self) -> list[AnnotationRecord]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT * FROM annotation_records ORDER BY unit_id, annotator_id, token_index"
            ).fetchall()
            return [self._record_from_row(r) for r in rows]

    def timing_records_for_assignment(self, assignment_id: str) -> list[TimingRecord]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT * FROM timing_records WHERE assignment_id=? ORDER BY unit_id",
                (assignment_id,),
            ).fetchall()
            return [
                TimingRecord(
                    r["assignment_id"], r["unit_id"], parse_iso(r["started_at"]), parse_iso(r["submitted_at"])
                )
                for r in rows
            ]

    def timing_records_for_task(self, task_id: str) -> list[TimingRecord]:
        with self.transaction(write=False) as conn:
            rows = conn.execute(
                "SELECT tr.* FROM timing_records tr"
                " JOIN assignments a ON a.assignment_id = tr.assignment_id"
                " WHERE a.task_id=? ORDER BY tr.assignment_id, tr.unit_id",
                (task_id,),
            ).fetchall()
            return [
                TimingRecord(
                    r["assignment_id"], r["unit_id"], parse_iso(r["started_at"]), parse_iso(r["submitted_at"])
                )
                for r in rows
            ]

    # ------------------------------------------------------------------ views

    def load_assignment_view(self, assignment_id: str, caller: UserAccount) -> dict:
        """Consistent snapshot of an assignment with units, tokens, committed
        tags, drafts, versions, and timing. Readable by the owner, an active
        lead of the task's pair, or the superuser."""
        with self.transaction(write=False) as conn:
            row = self._get_assignment_row(conn, assignment_id)
            task_row = conn.execute(
                "SELECT pair_id FROM tasks WHERE task_id=?", (row["task_id"],)
            ).fetchone()
            pair_id = task_row["pair_id"]
            if not self._may_view(conn, caller, row["annotator_id"], pair_id):
                raise PermissionDenied("not the owner, the pair's lead, or the superuser")
            assignment = self._assignment_from_row(conn, row)
            units = []
            for unit_id in assignment.unit_ids:
                unit_row = conn.execute("SELECT * FROM units WHERE unit_id=?", (unit_id,)).fetchone()
                token_rows = conn.execute(
                    "SELECT * FROM tokens WHERE unit_id=? ORDER BY token_index", (unit_id,)
                ).fetchall()
                committed = {
                    r["token_index"]: {"tag": r["tag_name"], "source": r["source"]}
                    for r in conn.execute(
                        "SELECT token_index, tag_name, source FROM annotation_records"
                        " WHERE assignment_id=? AND unit_id=?",
                        (assignment_id, unit_id),
                    )
                }
                draft_row = conn.execute(
                    "SELECT payload FROM drafts WHERE assignment_id=? AND unit_id=?",
                    (assignment_id, unit_id),
                ).fetchone()
                version_row = conn.execute(
                    "SELECT version FROM unit_versions WHERE assignment_id=? AND unit_id=?",
                    (assignment_id, unit_id),
                ).fetchone()
                timing_row = conn.execute(
                    "SELECT duration_seconds FROM timing_records WHERE assignment_id=? AND unit_id=?",
                    (assignment_id, unit_id),
                ).fetchone()
                tokens = []
                for t in token_rows:
                    record = committed.get(t["token_index"])
                    manual_tag = (
                        record["tag"] if record and record["source"] == "manual" else None
                    )
                    tokens.append(
                        {
                            "index": t["token_index"],
                            "surface": t["surface"],
                            "char_start": t["char_start"],
                            "char_end": t["char_end"],
                            "auto_tag": t["auto_tag"],
                            "manual_tag": manual_tag,
                            "committed_tag": record["tag"] if record else None,
                        }
                    )
                units.append(
                    {
                        "unit_id": unit_id,
                        "genre": unit_row["genre"],
                        "text": unit_row["text"],
                        "source_meta": json.loads(unit_row["source_meta"]),
                        "tokens": tokens,
                        "draft": json.loads(draft_row["payload"]) if draft_row else None,
                        "unit_version": version_row["version"] if version_row else 0,
                        "duration_seconds": timing_row["duration_seconds"] if timing_row else None,
                    }
                )
            return {
                "assignment_id": assignment.assignment_id,
                "task_id": assignment.task_id,
                "pair_id": pair_id,
                "annotator_id": assignment.annotator_id,
                "status": assignment.status.value,
                "grade": assignment.grade.value if assignment.grade else None,
                "feedback": assignment.feedback,
                "version": row["version"],
                "units": units,
            }

    def _may_view(
        self, conn: sqlite3.Connection, caller: UserAccount, owner_id: str, pair_id: str
    ) -> bool:
        if caller.role is Role.SUPERUSER:
            return True
        if caller.user_id == owner_id:
            return True
        if caller.role is Role.LEAD_ANNOTATOR and caller.active and pair_id in caller.language_pairs:
            return True
        return False

    # ------------------------------------------------------------------ audit

    def audit(self) -> list[str]:
        """Full-scan referential-integrity and invariant check."""
        problems: list[str] = []
        with self.transaction(write=False) as conn:
            for row in conn.execute("PRAGMA foreign_key_check"):
                problems.append(
                    f"dangling foreign key: table {row[0]} rowid {row[1]} -> {row[2]}"
                )
            n_super = conn.execute(
                "SELECT COUNT(*) AS n FROM users WHERE role='superuser' AND active=1"
            ).fetchone()["n"]
            if n_super != 1:
                problems.append(f"expected exactly one active superuser, found {n_super}")
            for row in conn.execute(
                "SELECT pair_id, COUNT(*) AS n FROM user_pairs"
                " WHERE role='lead_annotator' AND active=1 GROUP BY pair_id HAVING n > 1"
            ):
                problems.append(f"pair {row['pair_id']} has {row['n']} active leads")
            for row in conn.execute(
                "SELECT assignment_id FROM assignments"
                " WHERE (status IN ('accepted','rejected')) <> (grade IS NOT NULL)"
            ):
                problems.append(f"assignment {row['assignment_id']} has inconsistent grade/status")
            for row in conn.execute(
                "SELECT ar.assignment_id, ar.unit_id FROM annotation_records ar"
                " LEFT JOIN assignment_units au"
                "   ON au.assignment_id = ar.assignment_id AND au.unit_id = ar.unit_id"
                " WHERE au.unit_id IS NULL"
            ):
                problems.append(
                    f"record for unit {row['unit_id']} outside assignment {row['assignment_id']}"
                )
        return problems
