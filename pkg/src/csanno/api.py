"""JSON-over-HTTP boundary: authentication, role-filtered endpoints for the
whole workflow, and the concurrency contract for simultaneous annotator
teams.

Request handling is stateless (bearer session tokens, all durable state in
the store); the only in-process mutable state is the token cache and the
login rate limiter. Every endpoint's allow/deny behavior is the permission
matrix plus a resource-scope rule:

* ``own_assignment`` - annotation writes (start/draft/submit): the caller
  must own the assignment, whatever their role.
* ``read_assignment`` - owner, an active lead of the task's pair, or the
  superuser.
* ``pair`` - lead operations: leads act within their own language pairs,
  the superuser anywhere.
* ``none`` - no resource scoping beyond the role gate.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Optional

from fastapi import Depends, FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__, formats, workflow
from .domain import (
    AssignmentEvent,
    Genre,
    Grade,
    LanguagePair,
    Role,
    TagCategory,
    TagLabel,
    TagSet,
    UserAccount,
    default_tag_set,
)
from .errors import (
    AuthenticationError,
    ConflictError,
    CsannoError,
    DecodeError,
    EmptyScopeError,
    IllegalTransition,
    IncompleteAnnotationError,
    InsufficientDataError,
    NoOverlapError,
    NotFoundError,
    ParseError,
    PermissionDenied,
    RateLimitedError,
    SchemaError,
    ValidationError,
)
from .preprocess import CleanConfig, TaggerConfig
from .security import DUMMY_DIGEST, hash_password, new_session_token, verify_password
from .storage import Store, new_id
from .timeutil import parse_iso
from .workflow import require_pair_scope, require_permission


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8040
    data_dir: str = "./csanno-data"
    session_ttl_seconds: int = 8 * 3600
    rate_limit_max_failures: int = 5
    rate_limit_window_seconds: int = 300

    @classmethod
    def from_env(cls, env: Mapping[str, str], **overrides) -> "ServiceConfig":
        values = {
            "host": env.get("CSANNO_HOST", cls.host),
            "port": int(env.get("CSANNO_PORT", cls.port)),
            "data_dir": env.get("CSANNO_DATA_DIR", cls.data_dir),
            "session_ttl_seconds": int(env.get("CSANNO_SESSION_TTL", cls.session_ttl_seconds)),
            "rate_limit_max_failures": int(
                env.get("CSANNO_RATE_LIMIT_MAX", cls.rate_limit_max_failures)
            ),
            "rate_limit_window_seconds": int(
                env.get("CSANNO_RATE_LIMIT_WINDOW", cls.rate_limit_window_seconds)
            ),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class _Session:
    token: str
    user_id: str
    issued_at: float
    expires_at: float


class TokenCache:
    """In-process session tokens with expiry; logout and password changes
    invalidate immediately."""

    def __init__(self, ttl_seconds: int):
        self._ttl = ttl_seconds
        self._lock = threading.Lock()
        self._sessions: dict[str, _Session] = {}

    def issue(self, user_id: str) -> _Session:
        now = time.time()
        session = _Session(new_session_token(), user_id, now, now + self._ttl)
        with self._lock:
            self._sessions[session.token] = session
        return session

    def resolve(self, token: str) -> str:
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                raise AuthenticationError("unknown session token")
            if session.expires_at < time.time():
                del self._sessions[token]
                raise AuthenticationError("session expired")
            return session.user_id

    def revoke(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)

    def revoke_user(self, user_id: str) -> None:
        with self._lock:
            stale = [t for t, s in self._sessions.items() if s.user_id == user_id]
            for token in stale:
                del self._sessions[token]


class LoginRateLimiter:
    """Per-username failed-attempt window."""

    def __init__(self, max_failures: int, window_seconds: int):
        self._max = max_failures
        self._window = window_seconds
        self._lock = threading.Lock()
        self._failures: dict[str, list[float]] = {}

    def check(self, username: str) -> None:
        key = username.casefold()
        now = time.time()
        with self._lock:
            recent = [t for t in self._failures.get(key, []) if now - t < self._window]
            self._failures[key] = recent
            if len(recent) >= self._max:
                raise RateLimitedError(f"too many failed logins for {username!r}")

    def record_failure(self, username: str) -> None:
        with self._lock:
            self._failures.setdefault(username.casefold(), []).append(time.time())

    def reset(self, username: str) -> None:
        with self._lock:
            self._failures.pop(username.casefold(), None)


#: (method, route) -> (action, scope rule); the acceptance sweep walks this
#: table and cross-checks every role against the permission matrix.
ENDPOINT_ACTIONS: dict[tuple[str, str], tuple[Optional[str], str]] = {
    ("POST", "/auth/logout"): (None, "none"),
    ("GET", "/me"): (None, "none"),
    ("GET", "/me/stats"): ("view_own_stats", "none"),
    ("GET", "/pairs"): (None, "none"),
    ("GET", "/assignments"): ("annotate", "none"),
    ("GET", "/assignments/{assignment_id}"): ("annotate", "read_assignment"),
    ("POST", "/assignments/{assignment_id}/start"): ("annotate", "own_assignment"),
    ("PUT", "/assignments/{assignment_id}/units/{unit_id}/draft"): ("save_draft", "own_assignment"),
    ("POST", "/assignments/{assignment_id}/units/{unit_id}/submit"): ("submit", "own_assignment"),
    ("POST", "/assignments/{assignment_id}/submit"): ("submit", "own_assignment"),
    ("POST", "/assignments/{assignment_id}/reopen"): ("grade", "pair"),
    ("POST", "/assignments/{assignment_id}/review"): ("grade", "pair"),
    ("GET", "/tasks"): ("manage_tasks", "none"),
    ("POST", "/tasks"): ("manage_tasks", "pair"),
    ("GET", "/tasks/{task_id}"): ("manage_tasks", "pair"),
    ("POST", "/tasks/{task_id}/assign"): ("manage_tasks", "pair"),
    ("GET", "/tasks/{task_id}/submissions"): ("grade", "pair"),
    ("GET", "/tasks/{task_id}/iaa"): ("view_iaa", "pair"),
    ("GET", "/tasks/{task_id}/tag-distribution"): ("view_iaa", "pair"),
    ("GET", "/tasks/{task_id}/timing"): ("view_iaa", "pair"),
    ("POST", "/users"): ("create_annotator", "none"),  # manage_users for non-annotator roles
    ("GET", "/users"): ("manage_users", "none"),
    ("PATCH", "/users/{user_id}"): ("manage_users", "none"),
    ("DELETE", "/users/{user_id}"): ("manage_users", "none"),
    ("POST", "/pairs"): ("manage_users", "none"),
    ("POST", "/ingest"): ("import_data", "none"),
    ("POST", "/import"): ("import_data", "none"),
    ("GET", "/export"): ("export_data", "none"),
}

_ERROR_STATUS: list[tuple[type, int]] = [
    (AuthenticationError, 401),
    (PermissionDenied, 403),
    (RateLimitedError, 429),
    (NotFoundError, 404),
    (ConflictError, 409),
    (IllegalTransition, 409),
    (IncompleteAnnotationError, 422),
    (DecodeError, 422),
    (ParseError, 422),
    (SchemaError, 422),
    (NoOverlapError, 422),
    (InsufficientDataError, 422),
    (EmptyScopeError, 422),
    (ValidationError, 422),
]


def _status_for(exc: CsannoError) -> int:
    for exc_type, status in _ERROR_STATUS:
        if isinstance(exc, exc_type):
            return status
    return 500


class LoginBody(BaseModel):
    username: str
    password: str


class CreateUserBody(BaseModel):
    username: str
    password: str
    role: str = "annotator"
    language_pairs: list[str] = []


class PatchUserBody(BaseModel):
    password: Optional[str] = None
    active: Optional[bool] = None
    role: Optional[str] = None
    language_pairs: Optional[list[str]] = None


class CreatePairBody(BaseModel):
    pair_id: str
    lang_primary: str
    lang_secondary: str
    language_labels: Optional[list[str]] = None


class CreateTaskBody(BaseModel):
    pair_id: str
    genre: str
    unit_ids: list[str]
    overlap_percent: float


class AssignBody(BaseModel):
    annotator_ids: list[str]


class DraftBody(BaseModel):
    tags: dict[int, str]


class SubmitUnitBody(BaseModel):
    tags: dict[int, str]
    version: int = 0
    started_at: Optional[str] = None


class ReviewBody(BaseModel):
    grade: str
    feedback: Optional[str] = None


class IngestBody(BaseModel):
    pair_id: str
    genre: str
    records: Optional[list[dict]] = None  # tweet genre
    thread: Optional[dict] = None  # forum genre
    lines: Optional[list[str]] = None  # plain-style genres
    pretag: bool = True
    gazetteer: Optional[list[str]] = None


def _user_payload(user: UserAccount) -> dict:
    return {
        "user_id": user.user_id,
        "username": user.username,
        "role": user.role.value,
        "language_pairs": sorted(user.language_pairs),
        "active": user.active,
    }


def _assignment_payload(assignment) -> dict:
    return {
        "assignment_id": assignment.assignment_id,
        "task_id": assignment.task_id,
        "annotator_id": assignment.annotator_id,
        "unit_ids": list(assignment.unit_ids),
        "status": assignment.status.value,
        "grade": assignment.grade.value if assignment.grade else None,
        "feedback": assignment.feedback,
    }


def _tagset_payload(tag_set: TagSet) -> list[dict]:
    return [
        {
            "name": label.name,
            "category": label.category.value,
            "color": label.color,
            "auto_assignable": label.auto_assignable,
        }
        for label in tag_set.labels
    ]


def create_app(
    store: Store,
    config: ServiceConfig = ServiceConfig(),
    ui_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="csanno", version=__version__)
    tokens = TokenCache(config.session_ttl_seconds)
    limiter = LoginRateLimiter(
        config.rate_limit_max_failures, config.rate_limit_window_seconds
    )
    app.state.store = store
    app.state.tokens = tokens

    @app.exception_handler(CsannoError)
    async def _domain_error(request: Request, exc: CsannoError):
        body = {"detail": str(exc)}
        if isinstance(exc, IncompleteAnnotationError):
            body["missing"] = exc.missing
        return JSONResponse(status_code=_status_for(exc), content=body)

    def current_user(authorization: Optional[str] = Header(default=None)) -> UserAccount:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthenticationError("missing bearer token")
        user_id = tokens.resolve(authorization[len("Bearer ") :])
        user = store.get_user(user_id)
        if not user.active:
            raise AuthenticationError("account deactivated")
        return user

    def require(action: str):
        def dependency(user: UserAccount = Depends(current_user)) -> UserAccount:
            require_permission(user, action)
            return user

        return dependency

    # ----------------------------------------------------------------- auth

    @app.post("/auth/login")
    def login(body: LoginBody):
        limiter.check(body.username)
        user = store.find_user_by_username(body.username)
        digest = user.password_digest if user else DUMMY_DIGEST
        ok = verify_password(body.password, digest)
        if not ok or user is None:
            limiter.record_failure(body.username)
            raise AuthenticationError("bad credentials")
        if not user.active:
            raise PermissionDenied("account deactivated")
        limiter.reset(body.username)
        session = tokens.issue(user.user_id)
        return {
            "token": session.token,
            "user": _user_payload(user),
            "expires_at": _iso_from_epoch(session.expires_at),
        }

    @app.post("/auth/logout")
    def logout(
        user: UserAccount = Depends(current_user),
        authorization: Optional[str] = Header(default=None),
    ):
        tokens.revoke(authorization[len("Bearer ") :])
        return {"ok": True}

    # ------------------------------------------------------------------- me

    @app.get("/me")
    def me(user: UserAccount = Depends(current_user)):
        return _user_payload(user)

    @app.get("/me/stats")
    def me_stats(user: UserAccount = Depends(require("view_own_stats"))):
        return workflow.annotator_stats(store, user)

    # ------------------------------------------------------------ assignments

    @app.get("/assignments")
    def list_assignments(user: UserAccount = Depends(require("annotate"))):
        return [_assignment_payload(a) for a in store.assignments_for_annotator(user.user_id)]

    @app.get("/assignments/{assignment_id}")
    def load_assignment(assignment_id: str, user: UserAccount = Depends(require("annotate"))):
        return store.load_assignment_view(assignment_id, user)

    def _require_owner(assignment_id: str, user: UserAccount):
        assignment = store.get_assignment(assignment_id)
        if assignment.annotator_id != user.user_id:
            raise PermissionDenied("assignment belongs to another annotator")
        return assignment

    @app.post("/assignments/{assignment_id}/start")
    def start_assignment(assignment_id: str, user: UserAccount = Depends(require("annotate"))):
        _require_owner(assignment_id, user)
        return _assignment_payload(
            workflow.transition_assignment(store, user, assignment_id, AssignmentEvent.START)
        )

    @app.put("/assignments/{assignment_id}/units/{unit_id}/draft")
    def save_draft(
        assignment_id: str,
        unit_id: str,
        body: DraftBody,
        user: UserAccount = Depends(require("save_draft")),
    ):
        _require_owner(assignment_id, user)
        version = workflow.save_draft(store, user, assignment_id, unit_id, body.tags)
        return {"draft_version": version}

    @app.post("/assignments/{assignment_id}/units/{unit_id}/submit")
    def submit_unit(
        assignment_id: str,
        unit_id: str,
        body: SubmitUnitBody,
        user: UserAccount = Depends(require("submit")),
    ):
        _require_owner(assignment_id, user)
        started = parse_iso(body.started_at) if body.started_at else None
        records, version = workflow.submit_unit(
            store, user, assignment_id, unit_id, body.tags, body.version, started
        )
        return {"committed": len(records), "unit_version": version}

    @app.post("/assignments/{assignment_id}/submit")
    def submit_assignment(assignment_id: str, user: UserAccount = Depends(require("submit"))):
        _require_owner(assignment_id, user)
        return _assignment_payload(
            workflow.transition_assignment(store, user, assignment_id, AssignmentEvent.SUBMIT)
        )

    @app.post("/assignments/{assignment_id}/reopen")
    def reopen_assignment(assignment_id: str, user: UserAccount = Depends(require("grade"))):
        return _assignment_payload(
            workflow.transition_assignment(store, user, assignment_id, AssignmentEvent.REOPEN)
        )

    @app.post("/assignments/{assignment_id}/review")
    def review_assignment(
        assignment_id: str, body: ReviewBody, user: UserAccount = Depends(require("grade"))
    ):
        try:
            grade = Grade(body.grade)
        except ValueError:
            raise ValidationError(f"grade must be pass or no_pass, got {body.grade!r}") from None
        return _assignment_payload(
            workflow.review_submission(store, user, assignment_id, grade, body.feedback)
        )

    # ----------------------------------------------------------------- tasks

    @app.get("/tasks")
    def list_tasks(user: UserAccount = Depends(require("manage_tasks"))):
        if user.role is Role.SUPERUSER:
            tasks = store.list_tasks()
        else:
            tasks = [t for p in sorted(user.language_pairs) for t in store.list_tasks(p)]
        return [_task_payload(t) for t in tasks]

    def _task_payload(task) -> dict:
        return {
            "task_id": task.task_id,
            "pair_id": task.pair_id,
            "genre": task.genre.value,
            "unit_ids": list(task.unit_ids),
            "overlap_percent": task.overlap_percent,
            "created_by": task.created_by,
        }

    @app.post("/tasks")
    def create_task(body: CreateTaskBody, user: UserAccount = Depends(require("manage_tasks"))):
        try:
            genre = Genre(body.genre)
        except ValueError:
            raise ValidationError(f"unknown genre: {body.genre!r}") from None
        task = workflow.create_task(
            store, user, body.pair_id, genre, body.unit_ids, body.overlap_percent
        )
        return _task_payload(task)

    def _scoped_task(task_id: str, user: UserAccount):
        task = store.get_task(task_id)
        require_pair_scope(user, task.pair_id)
        return task

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str, user: UserAccount = Depends(require("manage_tasks"))):
        return _task_payload(_scoped_task(task_id, user))

    @app.post("/tasks/{task_id}/assign")
    def assign_task(
        task_id: str, body: AssignBody, user: UserAccount = Depends(require("manage_tasks"))
    ):
        _scoped_task(task_id, user)
        assignments = workflow.assign_task(store, user, task_id, body.annotator_ids)
        return [_assignment_payload(a) for a in assignments]

    @app.get("/tasks/{task_id}/submissions")
    def list_submissions(task_id: str, user: UserAccount = Depends(require("grade"))):
        _scoped_task(task_id, user)
        return [
            _assignment_payload(a)
            for a in store.assignments_for_task(task_id)
            if a.status.value == "submitted"
        ]

    @app.get("/tasks/{task_id}/iaa")
    def task_iaa(task_id: str, user: UserAccount = Depends(require("view_iaa"))):
        _scoped_task(task_id, user)
        report = workflow.iaa_report_for_task(store, task_id)
        return {
            "pairs": [
                {
                    "annotator_a": a,
                    "annotator_b": b,
                    "observed_agreement": entry.observed_agreement,
                    "kappa": entry.kappa,
                    "n_tokens": entry.n_tokens,
                }
                for (a, b), entry in sorted(report.entries.items())
            ],
            "mean_observed_agreement": report.mean_observed_agreement,
        }

    @app.get("/tasks/{task_id}/tag-distribution")
    def task_tag_distribution(task_id: str, user: UserAccount = Depends(require("view_iaa"))):
        _scoped_task(task_id, user)
        return workflow.tag_distribution_for_scope(store, f"task:{task_id}")

    @app.get("/tasks/{task_id}/timing")
    def task_timing(task_id: str, user: UserAccount = Depends(require("view_iaa"))):
        _scoped_task(task_id, user)
        stats = workflow.timing_stats_for_scope(store, f"task:{task_id}")
        return {
            "n": stats.n,
            "mean": stats.mean,
            "median": stats.median,
            "min": stats.min,
            "max": stats.max,
        }

    # ----------------------------------------------------------------- users

    @app.post("/users", status_code=201)
    def create_user(body: CreateUserBody, user: UserAccount = Depends(current_user)):
        try:
            role = Role(body.role)
        except ValueError:
            raise ValidationError(f"unknown role: {body.role!r}") from None
        if role is Role.ANNOTATOR:
            require_permission(user, "create_annotator")
            if user.role is Role.LEAD_ANNOTATOR:
                outside = set(body.language_pairs) - user.language_pairs
                if outside:
                    raise PermissionDenied(
                        f"lead may only create annotators in their own pairs, not {sorted(outside)}"
                    )
        else:
            require_permission(user, "manage_users")
        created = store.create_user(
            UserAccount(
                user_id=new_id("user"),
                username=body.username,
                password_digest=hash_password(body.password),
                role=role,
                language_pairs=frozenset(body.language_pairs),
            )
        )
        return _user_payload(created)

    @app.get("/users")
    def list_users(user: UserAccount = Depends(require("manage_users"))):
        return [_user_payload(u) for u in store.list_users()]

    @app.patch("/users/{user_id}")
    def patch_user(
        user_id: str, body: PatchUserBody, user: UserAccount = Depends(require("manage_users"))
    ):
        role = None
        if body.role is not None:
            try:
                role = Role(body.role)
            except ValueError:
                raise ValidationError(f"unknown role: {body.role!r}") from None
        digest = hash_password(body.password) if body.password is not None else None
        updated = store.update_user(
            user_id,
            password_digest=digest,
            active=body.active,
            role=role,
            language_pairs=body.language_pairs,
        )
        if body.password is not None or body.active is False:
            tokens.revoke_user(user_id)
        return _user_payload(updated)

    @app.delete("/users/{user_id}")
    def delete_user(user_id: str, user: UserAccount = Depends(require("manage_users"))):
        updated = store.update_user(user_id, active=False)
        tokens.revoke_user(user_id)
        return _user_payload(updated)

    # ----------------------------------------------------------------- pairs

    @app.get("/pairs")
    def list_pairs(user: UserAccount = Depends(current_user)):
        return [
            {
                "pair_id": p.pair_id,
                "lang_primary": p.lang_primary,
                "lang_secondary": p.lang_secondary,
                "tag_set": _tagset_payload(p.tag_set),
            }
            for p in store.list_pairs()
        ]

    @app.post("/pairs", status_code=201)
    def create_pair(body: CreatePairBody, user: UserAccount = Depends(require("manage_users"))):
        tag_set = default_tag_set()
        if body.language_labels:
            language = tuple(
                TagLabel(name, TagCategory.LANGUAGE, "green", False)
                for name in body.language_labels
            )
            tag_set = TagSet(language + tag_set.special_tags())
        pair = store.create_pair(
            LanguagePair(body.pair_id, body.lang_primary, body.lang_secondary, tag_set)
        )
        return {"pair_id": pair.pair_id}

    # ---------------------------------------------------------- corpus i/o

    @app.post("/ingest")
    def ingest(body: IngestBody, user: UserAccount = Depends(require("import_data"))):
        try:
            genre = Genre(body.genre)
        except ValueError:
            raise ValidationError(f"unknown genre: {body.genre!r}") from None
        tagger = TaggerConfig(gazetteer=frozenset(body.gazetteer or ()))
        if genre is Genre.TWEET:
            if body.records is None:
                raise ValidationError("tweet ingestion requires 'records'")
            result = formats.ingest_twitter(body.records, CleanConfig(), tagger, body.pretag)
        elif genre is Genre.FORUM:
            if body.thread is None:
                raise ValidationError("forum ingestion requires 'thread'")
            result = formats.ingest_forum(body.thread, CleanConfig(), tagger, body.pretag)
        else:
            if body.lines is None:
                raise ValidationError("line-based ingestion requires 'lines'")
            result = formats.ingest_plain(body.lines, genre, CleanConfig(), tagger, body.pretag)
        store.add_units(body.pair_id, result.units)
        return {
            "ingested": len(result.units),
            "skipped": result.skipped,
            "unit_ids": [u.unit_id for u in result.units],
        }

    @app.get("/export")
    def export(
        scope: str = Query(...),
        fields: Optional[str] = Query(default=None),
        user: UserAccount = Depends(require("export_data")),
    ):
        config = formats.ExportConfig.parse(fields) if fields else formats.ExportConfig()
        document = formats.export_xml(store, scope, config)
        return Response(content=document, media_type="application/xml")

    @app.post("/import")
    async def import_document(request: Request, user: UserAccount = Depends(require("import_data"))):
        data = await request.body()
        summary = formats.import_xml(store, data, user)
        return {
            "tasks": summary.n_tasks,
            "units": summary.n_units,
            "records": summary.n_records,
        }

    # ---------------------------------------------------------------- health

    @app.get("/health")
    def health():
        try:
            store.list_pairs()
            storage = "ok"
        except Exception:
            storage = "error"
        return {"version": __version__, "storage": storage}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _iso_from_epoch(epoch: float) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).isoformat()
