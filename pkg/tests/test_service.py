from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from schemqa.engine import build_engine
from schemqa.service import create_app
from schemqa.trace import canonical_json

from .conftest import FIXTURES, GOLDEN, fixture_engine_config

Q1 = "Which vessel condenses the overhead vapor from the distillation tower?"


@pytest.fixture()
def client():
    return TestClient(create_app(build_engine(fixture_engine_config())))


def test_healthz_counts(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["documents"] == 2
    assert body["chunks"] == 12  # (5 text + 1 image) chunks per document at 60/30
    assert body["sessions"] == 0


def test_ask_matches_golden_response(client):
    response = client.post("/v1/ask", json={"session_id": "default", "question": Q1})
    assert response.status_code == 200
    golden = (GOLDEN / "service_ask_response.json").read_text()
    assert canonical_json(response.json()) + "\n" == golden


def test_ask_missing_question_is_400(client):
    response = client.post("/v1/ask", json={"session_id": "s"})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "invalid_request"


def test_ask_unknown_task_is_400(client):
    response = client.post("/v1/ask", json={"question": "q", "task": "RIDDLE"})
    assert response.status_code == 400


def test_ask_mc_without_options_is_400(client):
    response = client.post("/v1/ask", json={"question": "q", "task": "MC_VQA"})
    assert response.status_code == 400
    assert "mc_options" in response.json()["error"]["message"]


def test_trace_endpoint_roundtrip(client):
    assert client.get("/v1/sessions/nope/trace").status_code == 404
    client.post("/v1/ask", json={"session_id": "s7", "question": Q1})
    response = client.get("/v1/sessions/s7/trace")
    assert response.status_code == 200
    body = response.json()
    assert body["session_id"] == "s7"
    assert len(body["traces"]) == 1
    assert body["traces"][0]["request_id"] == "s7-0001"
    assert body["traces"][0]["final"]["answer"] == "the reflux drum"


def test_eval_endpoint_inline_records(client):
    records = [json.loads(line) for line in (FIXTURES / "eval_five.jsonl").read_text().splitlines()]
    response = client.post("/v1/eval", json={"records": records})
    assert response.status_code == 200
    body = response.json()
    assert body["count"] == 5
    assert body["corpus"]["MC_VQA"]["exact_match"] == 1.0


def test_eval_endpoint_requires_input(client):
    assert client.post("/v1/eval", json={}).status_code == 400


def test_ingest_endpoint_rebuilds_index(client):
    response = client.post(
        "/v1/ingest", json={"manifest_path": str(FIXTURES / "bundle" / "manifest.json")}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["documents"] == 2
    assert body["chunks"] == 12
    assert body["kind_counts"] == {"PFD": 1, "PID": 1}


def test_ingest_bad_manifest_is_400(client):
    response = client.post("/v1/ingest", json={"manifest_path": "/nonexistent/manifest.json"})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "missingfile"


def test_concurrent_asks_no_trace_corruption(client):
    """8 parallel scripted asks in distinct sessions; each trace must be
    complete, self-consistent, and replay-equal."""

    def ask(session: str):
        response = client.post("/v1/ask", json={"session_id": session, "question": Q1})
        assert response.status_code == 200
        return session, response.json()

    sessions = [f"conc-{i}" for i in range(8)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(ask, sessions))

    reference = canonical_json({k: v for k, v in results[0][1].items() if k not in ("request_id", "session_id")})
    for session, body in results:
        assert body["answer"] == "the reflux drum"
        assert body["request_id"] == f"{session}-0001"
        stripped = {k: v for k, v in body.items() if k not in ("request_id", "session_id")}
        assert canonical_json(stripped) == reference
        trace = client.get(f"/v1/sessions/{session}/trace").json()
        calls = trace["traces"][0]["calls"]
        assert [c["kind"] for c in calls] == [
            "ROUTE", "REACT", "REACT", "CAN", "SUM", "SUM", "VAL", "VAL", "RANK", "JUDGE",
        ]


def test_static_mount_serves_frontend_when_configured(tmp_path):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html><body>chat client</body></html>")
    config = fixture_engine_config({"server": {"static_dir": str(static)}})
    client = TestClient(create_app(build_engine(config)))
    page = client.get("/")
    assert page.status_code == 200
    assert "chat client" in page.text
    # API routes keep precedence over the static mount
    assert client.get("/healthz").json()["status"] == "ok"
    assert client.post("/v1/ask", json={"session_id": "s", "question": Q1}).status_code == 200


def test_bearer_token_guard(monkeypatch):
    monkeypatch.setenv("TEST_SERVICE_TOKEN", "sesame")
    config = fixture_engine_config({"server": {"bearer_token_env": "TEST_SERVICE_TOKEN"}})
    client = TestClient(create_app(build_engine(config)))
    assert client.get("/healthz").status_code == 200  # health stays open
    denied = client.post("/v1/ask", json={"question": Q1})
    assert denied.status_code == 401
    allowed = client.post(
        "/v1/ask", json={"question": Q1}, headers={"Authorization": "Bearer sesame"}
    )
    assert allowed.status_code == 200
