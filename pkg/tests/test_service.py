from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from typedmem.engine import MemoryEngine
from typedmem.errors import ProviderError
from typedmem.service import create_app
from typedmem.store import open_store


class Down:
    model_id = "down"

    def complete(self, prompt: str) -> str:
        raise ProviderError("upstream unavailable", elapsed_s=0.01)


@pytest.fixture
def engine(tmp_path):
    eng = MemoryEngine(open_store(tmp_path / "svc.db", 64, test_mode=True), test_mode=True)
    yield eng
    eng.store.close()


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200 and resp.json() == {"status": "ok"}


def test_turn_then_query_sees_record(client):
    posted = client.post("/users/ana/turns", json={"text": "My favorite color is teal.", "timestamp": "2024-07-22T10:55:00+00:00"})
    assert posted.status_code == 200
    body = posted.json()
    assert body["mask"] == {"epi": False, "sem": True, "pro": False} and body["record_ids"] == ["sem-000001"]
    answer = client.post("/users/ana/query", json={"question": "What is Ana's favorite color?"}).json()
    assert [e["record_id"] for e in answer["evidence"]] == ["sem-000001"]
    assert set(answer["latency"]) == {"search_s", "generation_s", "total_s"}
    assert answer["latency"]["total_s"] >= answer["latency"]["search_s"]


def test_memories_listing_and_isolation(client):
    client.post("/users/ana/turns", json={"text": "Yesterday I went to Lisbon.", "timestamp": "2024-07-22T10:55:00+00:00"})
    client.post("/users/bo/turns", json={"text": "My favorite food is ramen.", "timestamp": "2024-07-22T10:56:00+00:00"})
    ana = client.get("/users/ana/memories").json()["memories"]
    assert [m["owner_id"] for m in ana] == ["ana"] and ana[0]["store_type"] == "epi"
    assert client.get("/users/bo/memories", params={"type": "epi"}).json() == {"memories": []}
    bad = client.get("/users/bo/memories", params={"type": "nope"})
    assert bad.status_code == 400 and bad.json()["field"] == "type"


@pytest.mark.parametrize(
    "path,body,field",
    [
        ("/users/ana/turns", {"txt": "hi"}, "text"),
        ("/users/ana/turns", {"text": ""}, "text"),
        ("/users/ana/query", {"question": "q", "k": 0}, "k"),
        ("/users/ana/query", {}, "question"),
    ],
)
def test_malformed_bodies_name_the_field(client, path, body, field):
    resp = client.post(path, json=body)
    assert resp.status_code == 400
    payload = resp.json()
    assert payload["code"] == "validation_error" and payload["field"] == field and field in payload["message"]


def test_bad_timestamp_is_400(client):
    resp = client.post("/users/ana/turns", json={"text": "hello", "timestamp": "someday"})
    assert resp.status_code == 400


def test_provider_failure_is_502(tmp_path):
    eng = MemoryEngine(open_store(tmp_path / "p.db", 64), answerer=Down())
    try:
        resp = TestClient(create_app(eng)).post("/users/ana/query", json={"question": "anything?"})
    finally:
        eng.store.close()
    assert resp.status_code == 502 and resp.json()["code"] == "provider_error"


def test_store_failure_is_500(client, engine):
    engine.store.close()
    resp = client.get("/users/ana/memories")
    assert resp.status_code == 500 and resp.json()["code"] == "store_error"


def test_concurrent_ingest_preserves_per_user_order(client, engine):
    texts = [f"Note number {i} about gardening." for i in range(20)]

    def post(i):
        return client.post("/users/ana/turns", json={"text": texts[i], "timestamp": "2024-07-22T10:55:00+00:00"})

    with ThreadPoolExecutor(8) as pool:
        assert all(r.status_code == 200 for r in pool.map(post, range(20)))
    records = [r for kind in ("epi", "sem", "pro") for r in engine.store.list(kind, "ana")]
    assert sorted(r.source_turn for r in records) == list(range(20))
