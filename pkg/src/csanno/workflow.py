"""Permission-checked orchestration of the annotation lifecycle.

Functions here join the pure domain rules (permission matrix, overlap
planner, state machine, agreement metrics) with the transactional store.
The HTTP layer and the CLI both call through this module.
"""

from __future__ import annotations

from datetime import datetime
from typing import Mapping, Optional, Sequence

from . import metrics
from .distribution import plan_overlap
from .domain import (
    Assignment,
    AssignmentEvent,
    AssignmentStatus,
    Genre,
    Grade,
    Role,
    Task,
    UserAccount,
    check_permission,
)
from .errors import ConflictError, NotFoundError, PermissionDenied, ValidationError
from .storage import Store, new_id

_QUALIFYING = (AssignmentStatus.SUBMITTED, AssignmentStatus.ACCEPTED)


def require_permission(user: UserAccount, action: str) -> None:
    if not user.active:
        raise PermissionDenied("account is deactivated")
    if not check_permission(user.role, action):
        raise PermissionDenied(f"role {user.role.value} may not {action}")


def require_pair_scope(user: UserAccount, pair_id: str) -> None:
    """Leads act only within their own language pairs; the superuser is
    unscoped."""
    if user.role is Role.SUPERUSER:
        return
    if pair_id not in user.language_pairs:
        raise PermissionDenied(f"no access to language pair {pair_id}")


def create_task(
    store: Store,
    creator: UserAccount,
    pair_id: str,
    genre: Genre,
    unit_ids: Sequence[str],
    overlap_percent: float,
) -> Task:
    require_permission(creator, "manage_tasks")
    require_pair_scope(creator, pair_id)
    task = Task(
        task_id=new_id("task"),
        pair_id=pair_id,
        genre=genre,
        unit_ids=tuple(unit_ids),
        overlap_percent=overlap_percent,
        created_by=creator.user_id,
    )
    return store.create_task(task)


def assign_task(
    store: Store, caller: UserAccount, task_id: str, annotator_ids: Sequence[str]
) -> list[Assignment]:
    """Plan the overlap partition and create one Assigned slice per
    annotator; the plan is persisted for later agreement pairing."""
    require_permission(caller, "manage_tasks")
    task = store.get_task(task_id)
    require_pair_scope(caller, task.pair_id)
    if store.assignments_for_task(task_id):
        raise ConflictError(f"task {task_id} already has assignments")
    for annotator_id in annotator_ids:
        annotator = store.get_user(annotator_id)
        if not annotator.active:
            raise ValidationError(f"annotator {annotator_id} is deactivated")
        if annotator.role is not Role.ANNOTATOR:
            raise ValidationError(f"user {annotator_id} is not an annotator")
        if task.pair_id not in annotator.language_pairs:
            raise ValidationError(
                f"annotator {annotator_id} is not registered for pair {task.pair_id}"
            )
    plan = plan_overlap(task.unit_ids, annotator_ids, task.overlap_percent)
    assignments = [
        Assignment(
            assignment_id=new_id("asg"),
            task_id=task_id,
            annotator_id=annotator_id,
            unit_ids=plan.units_for(annotator_id),
        )
        for annotator_id in sorted(annotator_ids)
    ]
    with store.transaction():
        store.save_plan(task_id, plan)
        store.create_assignments(assignments)
    return assignments


def transition_assignment(
    store: Store, caller: UserAccount, assignment_id: str, event: AssignmentEvent
) -> Assignment:
    assignment = store.get_assignment(assignment_id)
    if event is AssignmentEvent.REOPEN:
        require_permission(caller, "grade")
        task = store.get_task(assignment.task_id)
        require_pair_scope(caller, task.pair_id)
    else:
        action = "submit" if event is AssignmentEvent.SUBMIT else "annotate"
        require_permission(caller, action)
        if assignment.annotator_id != caller.user_id:
            raise PermissionDenied("assignment belongs to another annotator")
    return store.transition_assignment(assignment_id, event)


def review_submission(
    store: Store,
    lead: UserAccount,
    assignment_id: str,
    grade: Grade,
    feedback: Optional[str] = None,
) -> Assignment:
    require_permission(lead, "grade")
    assignment = store.get_assignment(assignment_id)
    task = store.get_task(assignment.task_id)
    require_pair_scope(lead, task.pair_id)
    return store.review_assignment(assignment_id, grade, feedback)


def save_draft(
    store: Store,
    caller: UserAccount,
    assignment_id: str,
    unit_id: str,
    tags: Mapping[int, str],
) -> int:
    require_permission(caller, "save_draft")
    return store.save_draft(assignment_id, caller.user_id, unit_id, tags)


def submit_unit(
    store: Store,
    caller: UserAccount,
    assignment_id: str,
    unit_id: str,
    tags: Mapping[int, str],
    expected_version: int = 0,
    started_at: Optional[datetime] = None,
):
    require_permission(caller, "submit")
    return store.submit_unit_annotations(
        assignment_id, caller.user_id, unit_id, tags, expected_version, started_at
    )


def iaa_report_for_task(store: Store, task_id: str) -> metrics.IaaReport:
    """Pairwise agreement over the task's shared units, computed from the
    committed records of submitted or accepted assignments."""
    store.get_task(task_id)  # NotFoundError for unknown ids
    plan = store.get_plan(task_id)
    shared = set(plan.shared_unit_ids)
    labels_by_annotator: dict[str, dict[tuple[str, int], str]] = {}
    for assignment in store.assignments_for_task(task_id):
        if assignment.status not in _QUALIFYING:
            continue
        labels_by_annotator[assignment.annotator_id] = {
            (r.unit_id, r.token_index): r.tag_name
            for r in store.records_for_assignment(assignment.assignment_id)
            if r.unit_id in shared
        }
    return metrics.pairwise_iaa_matrix(plan.shared_unit_ids, labels_by_annotator)


def _parse_scope(scope: str) -> tuple[str, Optional[str]]:
    if scope == "corpus":
        return "corpus", None
    for prefix in ("task", "assignment"):
        if scope.startswith(prefix + ":"):
            ident = scope[len(prefix) + 1 :]
            if not ident:
                raise ValidationError(f"empty id in scope {scope!r}")
            return prefix, ident
    raise ValidationError(f"scope must be corpus, task:ID, or assignment:ID, got {scope!r}")


def records_in_scope(store: Store, scope: str):
    kind, ident = _parse_scope(scope)
    if kind == "corpus":
        return store.all_records()
    if kind == "task":
        store.get_task(ident)
        return store.records_for_task(ident)
    store.get_assignment(ident)
    return store.records_for_assignment(ident)


def tag_distribution_for_scope(store: Store, scope: str) -> dict[str, int]:
    return metrics.tag_distribution(r.tag_name for r in records_in_scope(store, scope))


def timing_stats_for_scope(store: Store, scope: str) -> metrics.TimingStats:
    kind, ident = _parse_scope(scope)
    if kind == "assignment":
        store.get_assignment(ident)
        records = store.timing_records_for_assignment(ident)
    elif kind == "task":
        store.get_task(ident)
        records = store.timing_records_for_task(ident)
    else:
        records = [
            t
            for task in store.list_tasks()
            for t in store.timing_records_for_task(task.task_id)
        ]
    return metrics.timing_stats(records)


def annotator_stats(store: Store, annotator: UserAccount) -> dict:
    """The per-annotator status view: progress, grades, and speed."""
    assignments = store.assignments_for_annotator(annotator.user_id)
    rows = []
    all_durations: list[float] = []
    for assignment in assignments:
        records = store.records_for_assignment(assignment.assignment_id)
        timings = store.timing_records_for_assignment(assignment.assignment_id)
        durations = [t.duration_seconds for t in timings]
        all_durations.extend(durations)
        total_tokens = sum(
            len(store.get_unit(unit_id).tokens) for unit_id in assignment.unit_ids
        )
        stats = metrics.timing_stats(durations)
        rows.append(
            {
                "assignment_id": assignment.assignment_id,
                "task_id": assignment.task_id,
                "status": assignment.status.value,
                "grade": assignment.grade.value if assignment.grade else None,
                "feedback": assignment.feedback,
                "n_units": len(assignment.unit_ids),
                "n_units_submitted": len({r.unit_id for r in records}),
                "n_tokens": total_tokens,
                "n_tokens_annotated": len(records),
                "mean_seconds_per_unit": stats.mean,
            }
        )
    overall = metrics.timing_stats(all_durations)
    return {
        "annotator_id": annotator.user_id,
        "assignments": rows,
        "n_tokens_annotated": sum(r["n_tokens_annotated"] for r in rows),
        "timing": {
            "n": overall.n,
            "mean": overall.mean,
            "median": overall.median,
            "min": overall.min,
            "max": overall.max,
        },
    }
