"""End-to-end walkthrough on a throwaway database: bootstrap accounts,
ingest a small tweet corpus, distribute an overlapping task to two
annotators, simulate their work, grade it, and print the quality reports
plus an XML export.

Run: python scripts/demo_workflow.py
"""

import random
import tempfile
from pathlib import Path

from csanno import workflow
from csanno.domain import (
    AssignmentEvent,
    Genre,
    Grade,
    LanguagePair,
    Role,
    UserAccount,
)
from csanno.formats import ExportConfig, export_xml, ingest_twitter
from csanno.preprocess import TaggerConfig
from csanno.security import hash_password
from csanno.storage import Store, new_id

TWEETS = [
    {"tweet_id": "9001", "user_id": "u1", "text": "عايز اروح بكرة http://t.co/xyz"},
    {"tweet_id": "9002", "user_id": "u1", "text": "النهاردة كان يوم جامد اوي :-)"},
    {"tweet_id": "9003", "user_id": "u2", "text": "صباح الخير يا مصر 2018"},
    {"tweet_id": "9004", "user_id": "u3", "text": "هههههه والله كده برضه"},
    {"tweet_id": "9005", "user_id": "u2", "text": "check this weekend game !!!"},
    {"tweet_id": "9006", "user_id": "u4", "text": "يلا بينا دلوقتي www.example.com"},
]


def main() -> None:
    rng = random.Random(7)
    with tempfile.TemporaryDirectory() as tmp:
        store = Store(Path(tmp) / "demo.db")
        digest = hash_password("demo password")
        superuser = store.ensure_superuser("admin", digest)
        pair = store.create_pair(LanguagePair("arz-en", "arz", "en"))
        lead = store.create_user(
            UserAccount(new_id("user"), "layla", digest, Role.LEAD_ANNOTATOR, frozenset({"arz-en"}))
        )
        workers = [
            store.create_user(
                UserAccount(new_id("user"), name, digest, Role.ANNOTATOR, frozenset({"arz-en"}))
            )
            for name in ("amal", "badr")
        ]

        tagger = TaggerConfig(gazetteer=frozenset({"مصر", "القاهرة"}))
        result = ingest_twitter(TWEETS, tagger_config=tagger)
        store.add_units("arz-en", result.units)
        units = store.list_units("arz-en")
        n_tokens = sum(len(u.tokens) for u in units)
        n_auto = sum(t.auto_tag is not None for u in units for t in u.tokens)
        print(f"ingested {len(units)} tweets, {n_tokens} tokens, {n_auto} pre-tagged")

        task = workflow.create_task(
            store, lead, "arz-en", Genre.TWEET, [u.unit_id for u in units], overlap_percent=0.5
        )
        assignments = workflow.assign_task(
            store, lead, task.task_id, [w.user_id for w in workers]
        )
        print(f"task {task.task_id}: {len(units)} units, overlap 50%")
        for a in assignments:
            print(f"  {a.annotator_id}: {len(a.unit_ids)} units")

        tag_names = [t.name for t in pair.tag_set.language_tags()]
        by_id = {w.user_id: w for w in workers}
        for assignment in assignments:
            worker = by_id[assignment.annotator_id]
            workflow.transition_assignment(
                store, worker, assignment.assignment_id, AssignmentEvent.START
            )
            for unit_id in assignment.unit_ids:
                unit = store.get_unit(unit_id)
                tags = {
                    t.index: t.auto_tag if t.auto_tag else rng.choice(tag_names)
                    for t in unit.tokens
                }
                workflow.submit_unit(
                    store, worker, assignment.assignment_id, unit_id, tags, 0
                )
            workflow.transition_assignment(
                store, worker, assignment.assignment_id, AssignmentEvent.SUBMIT
            )
        print("both annotators submitted")

        graded = workflow.review_submission(
            store, lead, assignments[0].assignment_id, Grade.PASS
        )
        print(f"lead graded {graded.annotator_id}: {graded.grade.value}")

        report = workflow.iaa_report_for_task(store, task.task_id)
        for (a, b), entry in sorted(report.entries.items()):
            kappa = "n/a" if entry.kappa is None else f"{entry.kappa:.3f}"
            print(
                f"IAA {a} vs {b}: observed {entry.observed_agreement:.3f}, "
                f"kappa {kappa}, {entry.n_tokens} shared tokens"
            )
        print(f"task mean observed agreement: {report.mean_observed_agreement:.3f}")

        distribution = workflow.tag_distribution_for_scope(store, f"task:{task.task_id}")
        print("tag distribution:", dict(sorted(distribution.items())))

        stats = workflow.timing_stats_for_scope(store, f"task:{task.task_id}")
        print(f"timing: {stats.n} units, mean {stats.mean:.2f}s")

        document = export_xml(store, f"task:{task.task_id}", ExportConfig())
        print("\n--- export preview ---")
        print("\n".join(document.decode().splitlines()[:12]))
        store.close()


if __name__ == "__main__":
    main()
