import json

from csanno import workflow
from csanno.cli import main
from csanno.domain import Genre, Role, UserAccount
from csanno.formats import parse_xml
from csanno.storage import Store
from conftest import DIGEST, annotate_everything, seed_units


def init_instance(tmp_path, name="wsdir"):
    data_dir = tmp_path / name
    code = main(
        [
            "--data-dir",
            str(data_dir),
            "init",
            "--superuser-name",
            "admin",
            "--superuser-password",
            "hunter2hunter2",
            "--pair",
            "ar-en",
            "--pair-languages",
            "arz:en",
        ]
    )
    assert code == 0
    return data_dir


def test_init_creates_superuser_and_pair(tmp_path):
    data_dir = init_instance(tmp_path)
    store = Store(data_dir / "csanno.db")
    users = store.list_users()
    assert [u.role.value for u in users] == ["superuser"]
    assert [p.pair_id for p in store.list_pairs()] == ["ar-en"]
    store.close()


def test_ingest_tweets_and_export_corpus(tmp_path):
    data_dir = init_instance(tmp_path)
    tweets = tmp_path / "tweets.jsonl"
    tweets.write_text(
        "\n".join(
            json.dumps(r, ensure_ascii=False)
            for r in [
                {"tweet_id": "1", "user_id": "u1", "text": "عايز اروح http://t.co/x"},
                {"tweet_id": "2", "user_id": "u2", "text": "صباح الخير 2018"},
            ]
        ),
        encoding="utf-8",
    )
    assert main(["--data-dir", str(data_dir), "ingest", "--genre", "tweet", "--in", str(tweets), "--pair", "ar-en"]) == 0

    store = Store(data_dir / "csanno.db")
    units = store.list_units("ar-en")
    assert len(units) == 2
    assert units[0].tokens[2].auto_tag == "url"
    store.close()

    out = tmp_path / "corpus.xml"
    assert main(["--data-dir", str(data_dir), "export", "--scope", "corpus", "--out", str(out)]) == 0
    parse_xml(out.read_bytes())  # well-formed and schema-valid


def test_ingest_forum_and_plain(tmp_path):
    data_dir = init_instance(tmp_path)
    thread = tmp_path / "thread.json"
    thread.write_text(
        json.dumps(
            {
                "thread_id": "t1",
                "participants": ["a", "b"],
                "posts": [
                    {"post_id": "0", "author": "a", "text": "اهلا وسهلا"},
                    {"post_id": "1", "author": "b", "text": "اهلا بيك"},
                ],
            },
            ensure_ascii=False,
        ),
        encoding="utf-8",
    )
    assert main(["--data-dir", str(data_dir), "ingest", "--genre", "forum", "--in", str(thread), "--pair", "ar-en"]) == 0
    lines = tmp_path / "lines.txt"
    lines.write_text("سطر اول\n\nسطر تاني\n", encoding="utf-8")
    assert main(["--data-dir", str(data_dir), "ingest", "--genre", "plain", "--in", str(lines), "--pair", "ar-en"]) == 0
    store = Store(data_dir / "csanno.db")
    assert len(store.list_units("ar-en")) == 4
    store.close()


class InstanceShim:
    """Duck-types conftest.Team over a CLI-initialized database."""

    def __init__(self, store):
        self.store = store
        self.pair = store.get_pair("ar-en")
        self.lead = store.create_user(
            UserAccount("lead-1", "layla", DIGEST, Role.LEAD_ANNOTATOR, frozenset({"ar-en"}))
        )
        self.a1 = store.create_user(
            UserAccount("ann-1", "amal", DIGEST, Role.ANNOTATOR, frozenset({"ar-en"}))
        )


def test_export_import_round_trip_via_cli(tmp_path):
    data_dir = init_instance(tmp_path, "first")
    store = Store(data_dir / "csanno.db")
    team = InstanceShim(store)
    lead, a1 = team.lead, team.a1
    units = seed_units(team, 2)
    task = workflow.create_task(store, lead, "ar-en", Genre.PLAIN, [u.unit_id for u in units], 1.0)
    (assignment,) = workflow.assign_task(store, lead, task.task_id, ["ann-1"])
    annotate_everything(team, a1, assignment)
    store.close()

    exported = tmp_path / "dump.xml"
    assert main(["--data-dir", str(data_dir), "export", "--scope", f"task:{task.task_id}", "--out", str(exported)]) == 0

    second = init_instance(tmp_path, "second")
    assert main(["--data-dir", str(second), "import", "--in", str(exported)]) == 0
    re_exported = tmp_path / "dump2.xml"
    assert main(["--data-dir", str(second), "export", "--scope", "corpus", "--out", str(re_exported)]) == 0
    assert exported.read_bytes() == re_exported.read_bytes()


def test_exit_codes(tmp_path):
    data_dir = init_instance(tmp_path)
    # 2: I/O error (file does not exist)
    assert main(["--data-dir", str(data_dir), "ingest", "--genre", "plain", "--in", str(tmp_path / "nope.txt"), "--pair", "ar-en"]) == 2
    # 1: validation error (unknown scope)
    out = tmp_path / "x.xml"
    assert main(["--data-dir", str(data_dir), "export", "--scope", "galaxy:9", "--out", str(out)]) == 1
    # 1: unknown pair
    lines = tmp_path / "l.txt"
    lines.write_text("نص\n", encoding="utf-8")
    assert main(["--data-dir", str(data_dir), "ingest", "--genre", "plain", "--in", str(lines), "--pair", "xx-yy"]) == 1
    # 1: import of garbage
    bad = tmp_path / "bad.xml"
    bad.write_text("<wasa", encoding="utf-8")
    assert main(["--data-dir", str(data_dir), "import", "--in", str(bad)]) == 1


def test_ingest_requires_initialized_instance(tmp_path):
    lines = tmp_path / "l.txt"
    lines.write_text("نص\n", encoding="utf-8")
    code = main(["--data-dir", str(tmp_path / "fresh"), "ingest", "--genre", "plain", "--in", str(lines), "--pair", "ar-en"])
    assert code == 1
