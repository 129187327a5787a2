import threading

import pytest
from fastapi.testclient import TestClient

from csanno.api import ServiceConfig, create_app
from conftest import PASSWORD, annotate_everything, seed_task


@pytest.fixture
def client(team):
    app = create_app(team.store, ServiceConfig())
    with TestClient(app) as c:
        c.team = team
        yield c


def login(client, username, password=PASSWORD):
    response = client.post("/auth/login", json={"username": username, "password": password})
    assert response.status_code == 200, response.text
    return {"Authorization": f"Bearer {response.json()['token']}"}


class TestAuth:
    def test_health_is_public(self, client):
        body = client.get("/health").json()
        assert body["storage"] == "ok"
        assert "version" in body

    def test_login_returns_token_and_expiry(self, client):
        response = client.post("/auth/login", json={"username": "amal", "password": PASSWORD})
        body = response.json()
        assert response.status_code == 200
        assert len(body["token"]) >= 32
        assert body["user"]["role"] == "annotator"
        assert "expires_at" in body

    def test_wrong_password(self, client):
        response = client.post("/auth/login", json={"username": "amal", "password": "nope"})
        assert response.status_code == 401

    def test_unknown_user(self, client):
        response = client.post("/auth/login", json={"username": "ghost", "password": "x"})
        assert response.status_code == 401

    def test_deactivated_account_forbidden(self, client):
        su = login(client, "admin")
        user_id = client.team.a1.user_id
        assert client.delete(f"/users/{user_id}", headers=su).status_code == 200
        response = client.post("/auth/login", json={"username": "amal", "password": PASSWORD})
        assert response.status_code == 403

    def test_rate_limit_kicks_in(self, team):
        app = create_app(team.store, ServiceConfig(rate_limit_max_failures=3))
        with TestClient(app) as client:
            for _ in range(3):
                assert (
                    client.post("/auth/login", json={"username": "amal", "password": "bad"}).status_code
                    == 401
                )
            blocked = client.post("/auth/login", json={"username": "amal", "password": PASSWORD})
            assert blocked.status_code == 429

    def test_token_expiry(self, team):
        app = create_app(team.store, ServiceConfig(session_ttl_seconds=-1))
        with TestClient(app) as client:
            headers = login(client, "amal")
            assert client.get("/me", headers=headers).status_code == 401

    def test_logout_invalidates(self, client):
        headers = login(client, "amal")
        assert client.get("/me", headers=headers).status_code == 200
        assert client.post("/auth/logout", headers=headers).status_code == 200
        assert client.get("/me", headers=headers).status_code == 401

    def test_password_change_invalidates_sessions(self, client):
        headers = login(client, "amal")
        su = login(client, "admin")
        user_id = client.team.a1.user_id
        response = client.patch(
            f"/users/{user_id}", json={"password": "brand new pw 123"}, headers=su
        )
        assert response.status_code == 200
        assert client.get("/me", headers=headers).status_code == 401
        login(client, "amal", "brand new pw 123")

    def test_missing_token(self, client):
        assert client.get("/me").status_code == 401


class TestAnnotationFlow:
    def test_full_cycle(self, client):
        team = client.team
        task, assignments, units = seed_task(team, n_units=2, overlap=1.0)
        amal = login(client, "amal")

        listed = client.get("/assignments", headers=amal).json()
        assert len(listed) == 1
        aid = listed[0]["assignment_id"]
        assert listed[0]["status"] == "assigned"

        assert client.post(f"/assignments/{aid}/start", headers=amal).status_code == 200

        view = client.get(f"/assignments/{aid}", headers=amal).json()
        assert view["status"] == "in_progress"
        unit = view["units"][0]

        draft = client.put(
            f"/assignments/{aid}/units/{unit['unit_id']}/draft",
            json={"tags": {0: "lang1"}},
            headers=amal,
        )
        assert draft.status_code == 200
        assert draft.json()["draft_version"] == 1

        for unit in view["units"]:
            tags = {str(t["index"]): "lang1" for t in unit["tokens"]}
            response = client.post(
                f"/assignments/{aid}/units/{unit['unit_id']}/submit",
                json={"tags": tags, "version": unit["unit_version"]},
                headers=amal,
            )
            assert response.status_code == 200, response.text

        submitted = client.post(f"/assignments/{aid}/submit", headers=amal)
        assert submitted.status_code == 200
        assert submitted.json()["status"] == "submitted"

        layla = login(client, "layla")
        queue = client.get(f"/tasks/{task.task_id}/submissions", headers=layla).json()
        assert [a["assignment_id"] for a in queue] == [aid]
        review = client.post(
            f"/assignments/{aid}/review",
            json={"grade": "no_pass", "feedback": "retag unit 1"},
            headers=layla,
        )
        assert review.status_code == 200
        assert review.json()["status"] == "rejected"

        stats = client.get("/me/stats", headers=amal).json()
        assert stats["assignments"][0]["grade"] == "no_pass"
        assert stats["assignments"][0]["feedback"] == "retag unit 1"

        assert client.post(f"/assignments/{aid}/start", headers=amal).status_code == 200

    def test_incomplete_submit_lists_missing(self, client):
        team = client.team
        task, assignments, units = seed_task(team, n_units=1, overlap=1.0)
        amal = login(client, "amal")
        aid = next(a for a in assignments if a.annotator_id == "ann-1").assignment_id
        client.post(f"/assignments/{aid}/start", headers=amal)
        response = client.post(f"/assignments/{aid}/submit", headers=amal)
        assert response.status_code == 422
        assert response.json()["missing"] == {units[0].unit_id: [0, 1, 2]}

    def test_stale_version_conflicts(self, client):
        team = client.team
        task, assignments, units = seed_task(team, n_units=1, overlap=1.0)
        amal = login(client, "amal")
        aid = next(a for a in assignments if a.annotator_id == "ann-1").assignment_id
        client.post(f"/assignments/{aid}/start", headers=amal)
        tags = {"0": "lang1", "1": "lang1", "2": "lang1"}
        url = f"/assignments/{aid}/units/{units[0].unit_id}/submit"
        assert client.post(url, json={"tags": tags, "version": 0}, headers=amal).status_code == 200
        stale = client.post(url, json={"tags": tags, "version": 0}, headers=amal)
        assert stale.status_code == 409

    def test_double_submit_race_exactly_one_success(self, client):
        team = client.team
        task, assignments, units = seed_task(team, n_units=1, overlap=1.0)
        amal = login(client, "amal")
        aid = next(a for a in assignments if a.annotator_id == "ann-1").assignment_id
        client.post(f"/assignments/{aid}/start", headers=amal)
        url = f"/assignments/{aid}/units/{units[0].unit_id}/submit"
        statuses = []
        barrier = threading.Barrier(2)

        def submit(tag):
            barrier.wait()
            response = client.post(
                url,
                json={"tags": {"0": tag, "1": tag, "2": tag}, "version": 0},
                headers=amal,
            )
            statuses.append(response.status_code)

        threads = [threading.Thread(target=submit, args=(t,)) for t in ("lang1", "lang2")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(statuses) == [200, 409]

    def test_foreign_assignment_denied(self, client):
        team = client.team
        task, assignments, _ = seed_task(team)
        badr = login(client, "badr")
        foreign = next(a for a in assignments if a.annotator_id == "ann-1").assignment_id
        assert client.get(f"/assignments/{foreign}", headers=badr).status_code == 403
        assert client.post(f"/assignments/{foreign}/start", headers=badr).status_code == 403

    def test_lead_reads_assignment_readonly(self, client):
        team = client.team
        task, assignments, _ = seed_task(team)
        layla = login(client, "layla")
        aid = assignments[0].assignment_id
        assert client.get(f"/assignments/{aid}", headers=layla).status_code == 200
        assert client.post(f"/assignments/{aid}/start", headers=layla).status_code == 403


class TestReportsApi:
    def test_iaa_and_distribution_and_timing(self, client):
        team = client.team
        task, assignments, _ = seed_task(team, n_units=4, overlap=0.5)
        ordered = sorted(assignments, key=lambda a: a.annotator_id)
        annotate_everything(team, team.a1, ordered[0], tag="lang1")
        annotate_everything(team, team.a2, ordered[1], tag="lang1")
        layla = login(client, "layla")

        iaa = client.get(f"/tasks/{task.task_id}/iaa", headers=layla).json()
        assert iaa["mean_observed_agreement"] == 1.0
        (pair,) = iaa["pairs"]
        assert pair["observed_agreement"] == 1.0
        assert pair["n_tokens"] == 6

        dist = client.get(f"/tasks/{task.task_id}/tag-distribution", headers=layla).json()
        assert dist == {"lang1": 18}

        timing = client.get(f"/tasks/{task.task_id}/timing", headers=layla).json()
        assert timing["n"] == 6

    def test_iaa_insufficient_data(self, client):
        team = client.team
        task, assignments, _ = seed_task(team, n_units=4, overlap=0.5)
        layla = login(client, "layla")
        response = client.get(f"/tasks/{task.task_id}/iaa", headers=layla)
        assert response.status_code == 422


class TestAdminApi:
    def test_lead_creates_annotator_in_own_pair(self, client):
        layla = login(client, "layla")
        response = client.post(
            "/users",
            json={
                "username": "karim",
                "password": "pw pw pw pw",
                "role": "annotator",
                "language_pairs": ["ar-en"],
            },
            headers=layla,
        )
        assert response.status_code == 201
        assert response.json()["role"] == "annotator"

    def test_lead_cannot_create_outside_own_pair(self, client):
        su = login(client, "admin")
        client.post(
            "/pairs",
            json={"pair_id": "es-en", "lang_primary": "es", "lang_secondary": "en"},
            headers=su,
        )
        layla = login(client, "layla")
        response = client.post(
            "/users",
            json={
                "username": "karim",
                "password": "pw pw pw pw",
                "role": "annotator",
                "language_pairs": ["es-en"],
            },
            headers=layla,
        )
        assert response.status_code == 403

    def test_lead_cannot_create_lead(self, client):
        layla = login(client, "layla")
        response = client.post(
            "/users",
            json={"username": "zib", "password": "pw pw pw pw", "role": "lead_annotator"},
            headers=layla,
        )
        assert response.status_code == 403

    def test_superuser_full_crud(self, client):
        su = login(client, "admin")
        client.post(
            "/pairs",
            json={"pair_id": "es-en", "lang_primary": "es", "lang_secondary": "en"},
            headers=su,
        )
        created = client.post(
            "/users",
            json={
                "username": "pilar",
                "password": "pw pw pw pw",
                "role": "lead_annotator",
                "language_pairs": ["es-en"],
            },
            headers=su,
        ).json()
        assert created["role"] == "lead_annotator"
        users = client.get("/users", headers=su).json()
        assert any(u["username"] == "pilar" for u in users)
        patched = client.patch(
            f"/users/{created['user_id']}", json={"active": False}, headers=su
        ).json()
        assert patched["active"] is False

    def test_pair_listing_includes_tagset(self, client):
        amal = login(client, "amal")
        pairs = client.get("/pairs", headers=amal).json()
        assert pairs[0]["pair_id"] == "ar-en"
        names = {t["name"] for t in pairs[0]["tag_set"]}
        assert {"lang1", "lang2", "ne", "url", "punct"} <= names


class TestCorpusApi:
    def test_ingest_export_import(self, client):
        team = client.team
        su = login(client, "admin")
        ingest = client.post(
            "/ingest",
            json={
                "pair_id": "ar-en",
                "genre": "tweet",
                "records": [
                    {"tweet_id": "1", "user_id": "u", "text": "عايز http://t.co/x"},
                    {"tweet_id": "2", "user_id": "u", "text": "تمام 2018"},
                ],
            },
            headers=su,
        )
        assert ingest.status_code == 200, ingest.text
        assert ingest.json()["ingested"] == 2

        export = client.get("/export", params={"scope": "corpus"}, headers=su)
        assert export.status_code == 200
        assert export.headers["content-type"].startswith("application/xml")

        imported = client.post(
            "/import", content=export.content, headers={**su, "Content-Type": "application/xml"}
        )
        assert imported.status_code == 200

    def test_ingest_denied_for_lead(self, client):
        layla = login(client, "layla")
        response = client.post(
            "/ingest",
            json={"pair_id": "ar-en", "genre": "plain", "lines": ["نص"]},
            headers=layla,
        )
        assert response.status_code == 403

    def test_export_requires_permission(self, client):
        amal = login(client, "amal")
        assert client.get("/export", params={"scope": "corpus"}, headers=amal).status_code == 403

    def test_unknown_task_404(self, client):
        layla = login(client, "layla")
        assert client.get("/tasks/ghost", headers=layla).status_code == 404


def test_optional_ui_mount(team, tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<!doctype html><title>csanno</title>", encoding="utf-8")
    app = create_app(team.store, ServiceConfig(), ui_dir=str(ui))
    with TestClient(app) as client:
        response = client.get("/ui/")
        assert response.status_code == 200
        assert "csanno" in response.text
        # the API surface is untouched by the mount
        assert client.get("/health").json()["storage"] == "ok"
