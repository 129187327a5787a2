import hypothesis
import pytest

from csanno import workflow
from csanno.domain import (
    AssignmentEvent,
    Genre,
    LanguagePair,
    Role,
    Token,
    Unit,
    UserAccount,
)
from csanno.security import hash_password
from csanno.storage import Store

hypothesis.settings.register_profile("fast", max_examples=25)
hypothesis.settings.register_profile("thorough", max_examples=300)

PASSWORD = "correct horse battery staple"
#: one digest for every test account; hashing is deliberately slow.
DIGEST = hash_password(PASSWORD)


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "test.db")
    yield s
    s.close()


class Team:
    """A bootstrapped instance: superuser, one pair with a lead, two
    annotators."""

    def __init__(self, store: Store):
        self.store = store
        self.superuser = store.ensure_superuser("admin", DIGEST)
        self.pair = store.create_pair(LanguagePair("ar-en", "arz", "en"))
        self.lead = store.create_user(
            UserAccount("lead-1", "layla", DIGEST, Role.LEAD_ANNOTATOR, frozenset({"ar-en"}))
        )
        self.a1 = store.create_user(
            UserAccount("ann-1", "amal", DIGEST, Role.ANNOTATOR, frozenset({"ar-en"}))
        )
        self.a2 = store.create_user(
            UserAccount("ann-2", "badr", DIGEST, Role.ANNOTATOR, frozenset({"ar-en"}))
        )


@pytest.fixture
def team(store):
    return Team(store)


def plain_unit(unit_id: str, *surfaces: str, genre: Genre = Genre.PLAIN) -> Unit:
    tokens = []
    cursor = 0
    for i, surface in enumerate(surfaces):
        tokens.append(Token(i, surface, cursor, cursor + len(surface)))
        cursor += len(surface) + 1
    return Unit(unit_id, genre, {"line_no": "1"}, tuple(tokens), " ".join(surfaces))


def seed_units(team: Team, n_units: int = 4, n_tokens: int = 3) -> list[Unit]:
    """Plain dialect-word units that the pre-tagger leaves untagged."""
    units = [
        plain_unit(f"unit-{i:03d}", *[f"عا{i}م{j}" for j in range(n_tokens)])
        for i in range(n_units)
    ]
    team.store.add_units(team.pair.pair_id, units)
    return units


def seed_task(team: Team, n_units: int = 4, overlap: float = 0.5, n_tokens: int = 3):
    """Units + task + assignments for both annotators."""
    units = seed_units(team, n_units, n_tokens)
    task = workflow.create_task(
        team.store,
        team.lead,
        team.pair.pair_id,
        Genre.PLAIN,
        [u.unit_id for u in units],
        overlap,
    )
    assignments = workflow.assign_task(
        team.store, team.lead, task.task_id, [team.a1.user_id, team.a2.user_id]
    )
    return task, assignments, units


def annotate_everything(team: Team, user, assignment, tag: str = "lang1"):
    """Start, fully tag every unit, and submit the assignment."""
    store = team.store
    if store.get_assignment(assignment.assignment_id).status.value in ("assigned", "rejected"):
        workflow.transition_assignment(
            store, user, assignment.assignment_id, AssignmentEvent.START
        )
    for unit_id in assignment.unit_ids:
        unit = store.get_unit(unit_id)
        view = store.load_assignment_view(assignment.assignment_id, user)
        unit_view = next(u for u in view["units"] if u["unit_id"] == unit_id)
        tags = {t.index: tag for t in unit.tokens}
        workflow.submit_unit(
            store,
            user,
            assignment.assignment_id,
            unit_id,
            tags,
            expected_version=unit_view["unit_version"],
        )
    return workflow.transition_assignment(
        store, user, assignment.assignment_id, AssignmentEvent.SUBMIT
    )
