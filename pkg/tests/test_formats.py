import pytest
from hypothesis import given
from hypothesis import strategies as st

from csanno import workflow
from csanno.domain import REQUIRED_META, Genre
from csanno.errors import ParseError, SchemaError, ValidationError
from csanno.formats import (
    ExportConfig,
    export_xml,
    import_xml,
    ingest_forum,
    ingest_plain,
    ingest_twitter,
    parse_xml,
    render_xml,
)
from csanno.storage import Store
from conftest import Team, annotate_everything, seed_task


class TestExportConfig:
    def test_core_must_be_included(self):
        with pytest.raises(ValidationError):
            ExportConfig(frozenset({"word_id", "word"}))  # tag missing

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            ExportConfig(frozenset({"word_id", "word", "tag", "color"}))

    def test_parse_from_comma_list(self):
        config = ExportConfig.parse("word_id, word ,tag,genre")
        assert config.include_fields == {"word_id", "word", "tag", "genre"}


class TestIngestTwitter:
    RECORDS = [
        {"tweet_id": "1001", "user_id": "u9", "text": "عايز اروح http://t.co/x"},
        {"tweet_id": "1002", "user_id": "u9", "text": "صباح الخير :-)"},
        {"tweet_id": "1003", "user_id": "u7", "text": "hello from cairo"},
    ]

    def test_three_records_three_units(self):
        result = ingest_twitter(self.RECORDS)
        assert len(result.units) == 3
        assert result.skipped == 0
        unit = result.units[0]
        assert unit.genre is Genre.TWEET
        assert unit.source_meta["tweet_id"] == "1001"
        assert unit.source_meta["author_id"] == "u9"
        assert [t.surface for t in unit.tokens] == ["عايز", "اروح", "http://t.co/x"]
        assert unit.tokens[2].auto_tag == "url"

    def test_duplicate_tweet_id(self):
        with pytest.raises(ValidationError, match="duplicate tweet_id"):
            ingest_twitter([self.RECORDS[0], self.RECORDS[0]])

    def test_whitespace_only_tweet_skipped_with_warning_count(self):
        result = ingest_twitter(
            [{"tweet_id": "1", "user_id": "u", "text": "   "}] + self.RECORDS
        )
        assert len(result.units) == 3
        assert result.skipped == 1

    def test_missing_field(self):
        with pytest.raises(ValidationError, match="missing field"):
            ingest_twitter([{"tweet_id": "1", "text": "x"}])


class TestIngestForum:
    THREAD = {
        "thread_id": "th1",
        "participants": ["abu_ali", "um_salama"],
        "posts": [
            {"post_id": "p0", "author": "abu_ali", "text": "السلام عليكم"},
            {"post_id": "p1", "author": "um_salama", "text": "وعليكم السلام"},
            {"post_id": "p2", "author": "abu_ali", "text": "ازيك يا جماعة"},
            {"post_id": "p3", "author": "um_salama", "text": "تمام الحمد لله"},
        ],
    }

    def test_four_posts_in_order(self):
        result = ingest_forum(self.THREAD)
        assert len(result.units) == 4
        assert [u.source_meta["post_order"] for u in result.units] == ["0", "1", "2", "3"]
        assert result.units[2].source_meta["author"] == "abu_ali"
        assert result.units[0].source_meta["thread_id"] == "th1"

    def test_participants_preserved_verbatim(self):
        result = ingest_forum(self.THREAD)
        for unit in result.units:
            assert unit.source_meta["participants"] == '["abu_ali", "um_salama"]'

    def test_order_gap_rejected(self):
        thread = dict(self.THREAD)
        thread["posts"] = [
            {"post_id": "a", "order": 0, "author": "x", "text": "اهلا"},
            {"post_id": "b", "order": 1, "author": "x", "text": "بيك"},
            {"post_id": "c", "order": 3, "author": "x", "text": "يا"},
        ]
        with pytest.raises(ValidationError, match="contiguous"):
            ingest_forum(thread)


class TestIngestPlain:
    def test_one_unit_per_nonempty_line(self):
        lines = ["سطر اول", "", "سطر تاني", "   ", "سطر تالت", "رابع", "خامس"]
        result = ingest_plain(lines, Genre.COMMENTARY)
        assert len(result.units) == 5
        assert result.units[0].source_meta["line_no"] == "1"
        assert result.units[1].source_meta["line_no"] == "3"
        assert all(u.genre is Genre.COMMENTARY for u in result.units)

    def test_tweet_genre_rejected_here(self):
        with pytest.raises(ValidationError):
            ingest_plain(["x"], Genre.TWEET)

    def test_tokens_match_tokenizer(self):
        from csanno.preprocess import tokenize

        line = "التعليق ده جامد اوي !!!"
        result = ingest_plain([line])
        assert [t.surface for t in result.units[0].tokens] == [s for s, _, _ in tokenize(line)]


WORDS = st.sampled_from(["عايز", "اروح", "بكرة", "يعني", "hello", "2018", "!!!"])
TEXTS = st.lists(WORDS, min_size=1, max_size=6).map(" ".join)


class TestRequiredMetaPerGenre:
    @given(st.lists(TEXTS, min_size=1, max_size=4))
    def test_tweets_carry_required_meta(self, texts):
        records = [
            {"tweet_id": str(i), "user_id": f"u{i}", "text": text}
            for i, text in enumerate(texts)
        ]
        for unit in ingest_twitter(records).units:
            assert REQUIRED_META[Genre.TWEET] <= set(unit.source_meta)

    @given(st.lists(TEXTS, min_size=1, max_size=4))
    def test_forum_posts_carry_required_meta(self, texts):
        thread = {
            "thread_id": "t",
            "participants": ["a", "b"],
            "posts": [
                {"post_id": str(i), "author": "a", "text": text}
                for i, text in enumerate(texts)
            ],
        }
        for unit in ingest_forum(thread).units:
            assert REQUIRED_META[Genre.FORUM] <= set(unit.source_meta)

    @given(st.lists(st.one_of(TEXTS, st.just("")), min_size=1, max_size=6))
    def test_plain_lines_carry_required_meta(self, lines):
        for genre in (Genre.PLAIN, Genre.COMMENTARY, Genre.CONVERSATION):
            for unit in ingest_plain(lines, genre).units:
                assert REQUIRED_META[genre] <= set(unit.source_meta)


def corpus_with_annotations(tmp_path, overlap=0.5):
    store = Store(tmp_path / "a.db")
    team = Team(store)
    task, assignments, units = seed_task(team, n_units=4, overlap=overlap)
    ordered = sorted(assignments, key=lambda x: x.annotator_id)
    annotate_everything(team, team.a1, ordered[0], tag="lang1")
    annotate_everything(team, team.a2, ordered[1], tag="lang2")
    return store, team, task


class TestExportXml:
    def test_two_token_document_structure(self, team):
        task, assignments, units = seed_task(team, n_units=1, overlap=1.0, n_tokens=2)
        a = next(x for x in assignments if x.annotator_id == "ann-1")
        annotate_everything(team, team.a1, a)
        config = ExportConfig.parse("word_id,word,tag")
        document = export_xml(team.store, f"task:{task.task_id}", config).decode()
        assert document.startswith('<?xml version="1.0" encoding="UTF-8"?>\n<wasa version="1.0">')
        assert document.count("<token") == 2
        assert 'id="0" tag="lang1"' in document
        assert "annotator=" not in document
        assert "meta_" not in document

    def test_deterministic_bytes(self, tmp_path):
        store, team, task = corpus_with_annotations(tmp_path)
        first = export_xml(store, "corpus")
        second = export_xml(store, "corpus")
        assert first == second

    def test_token_count_equals_committed_record_count(self, tmp_path):
        store, team, task = corpus_with_annotations(tmp_path)
        for scope, records in [
            (f"task:{task.task_id}", store.records_for_task(task.task_id)),
            ("corpus", store.all_records()),
        ]:
            document = export_xml(store, scope)
            assert document.count(b"<token ") == len(records)

    def test_field_filtering_drops_annotator(self, tmp_path):
        store, team, task = corpus_with_annotations(tmp_path)
        full = export_xml(store, "corpus").decode()
        assert "annotator=" in full
        trimmed = export_xml(
            store, "corpus", ExportConfig.parse("word_id,word,tag,tag_source")
        ).decode()
        assert "annotator=" not in trimmed
        assert "timestamp=" not in trimmed

    def test_assignment_scope_limits_units_and_annotator(self, tmp_path):
        store, team, task = corpus_with_annotations(tmp_path)
        a1 = next(
            x for x in store.assignments_for_task(task.task_id) if x.annotator_id == "ann-1"
        )
        document = export_xml(store, f"assignment:{a1.assignment_id}").decode()
        assert 'annotator="ann-1"' in document
        assert 'annotator="ann-2"' not in document

    def test_escaping(self, team):
        from conftest import plain_unit

        unit = plain_unit("u-esc", "a<b", "x&y", '"q"')
        team.store.add_units("ar-en", [unit])
        task = workflow.create_task(team.store, team.lead, "ar-en", Genre.PLAIN, ["u-esc"], 0.0)
        (a,) = workflow.assign_task(team.store, team.lead, task.task_id, ["ann-1"])
        from csanno.domain import AssignmentEvent

        workflow.transition_assignment(team.store, team.a1, a.assignment_id, AssignmentEvent.START)
        workflow.submit_unit(
            team.store, team.a1, a.assignment_id, "u-esc", {0: "other", 1: "other", 2: "punct"}, 0
        )
        document = export_xml(team.store, f"task:{task.task_id}")
        assert b"a&lt;b" in document
        assert b"x&amp;y" in document
        parsed = parse_xml(document)
        words = [t.word for t in parsed.tasks[0].units[0].tokens]
        assert words == ["a<b", "x&y", '"q"']


class TestImportErrors:
    def test_truncated_document(self):
        with pytest.raises(ParseError) as err:
            parse_xml(b'<?xml version="1.0"?>\n<wasa version="1.0">\n  <task')
        assert err.value.line >= 1

    def test_missing_tag_attribute(self):
        doc = (
            b'<?xml version="1.0"?><wasa version="1.0"><task id="t"><unit id="u">'
            b'<token id="0">word</token></unit></task></wasa>'
        )
        with pytest.raises(SchemaError) as err:
            parse_xml(doc)
        assert err.value.element == "token/@tag"

    def test_wrong_root(self):
        with pytest.raises(SchemaError):
            parse_xml(b'<corpus version="1.0"/>')

    def test_wrong_version(self):
        with pytest.raises(SchemaError):
            parse_xml(b'<wasa version="9.9"/>')

    def test_unknown_element(self):
        with pytest.raises(SchemaError):
            parse_xml(b'<wasa version="1.0"><blob/></wasa>')

    def test_unknown_attribute(self):
        with pytest.raises(SchemaError):
            parse_xml(b'<wasa version="1.0"><task flavor="x"/></wasa>')


class TestRoundTrip:
    def _round_trip(self, tmp_path, config):
        store_a, team_a, task = corpus_with_annotations(tmp_path)
        doc1 = export_xml(store_a, "corpus", config)
        store_b = Store(tmp_path / "b.db")
        team_b = Team(store_b)
        import_xml(store_b, doc1, team_b.superuser)
        doc2 = export_xml(store_b, "corpus", config)
        assert doc1 == doc2
        return doc1

    def test_full_fields(self, tmp_path):
        self._round_trip(tmp_path, ExportConfig())

    def test_core_only(self, tmp_path):
        self._round_trip(tmp_path, ExportConfig.parse("word_id,word,tag"))

    def test_anonymous_annotators_preserved_structurally(self, tmp_path):
        doc = self._round_trip(
            tmp_path, ExportConfig.parse("word_id,word,tag,sentence_id,task_id")
        )
        # shared units carry two annotation layers even without annotator ids
        assert doc.count(b'<token id="0"') >= 2

    def test_unannotated_units_survive(self, tmp_path):
        store = Store(tmp_path / "a.db")
        team = Team(store)
        task, assignments, units = seed_task(team, n_units=3, overlap=0.0)
        doc1 = export_xml(store, "corpus")
        assert doc1.count(b"<unit") == 3
        store_b = Store(tmp_path / "b.db")
        team_b = Team(store_b)
        import_xml(store_b, doc1, team_b.superuser)
        doc2 = export_xml(store_b, "corpus")
        assert doc1 == doc2

    def test_import_reconstructs_fields(self, tmp_path):
        store_a, team_a, task = corpus_with_annotations(tmp_path)
        doc = export_xml(store_a, "corpus")
        model = parse_xml(doc)
        (task_model,) = model.tasks
        assert task_model.task_id == task.task_id
        assert task_model.language == "ar-en"
        assert task_model.genre == "plain"
        assert len(task_model.units) == 4
        unit = task_model.units[0]
        assert unit.meta["line_no"] == "1"
        # shared unit: both annotators' records present
        annotators = {t.annotator for t in unit.tokens}
        assert annotators == {"ann-1", "ann-2"}

    def test_model_render_parse_render_identity(self, tmp_path):
        store, team, task = corpus_with_annotations(tmp_path)
        doc = export_xml(store, "corpus")
        assert render_xml(parse_xml(doc)) == doc
