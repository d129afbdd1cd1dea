from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from harmkit.corpus import Category, Corpus, Sample
from harmkit.service import AnnotationStore, create_app

from .conftest import make_corpus


@pytest.fixture
def store(tmp_path, small_rulebase) -> AnnotationStore:
    store = AnnotationStore(small_rulebase, out_dir=tmp_path)
    store.create_session("s1", make_corpus(3))
    return store


@pytest.fixture
def client(store) -> TestClient:
    return TestClient(create_app(store))


def _decide(client, sample_id, decision, annotator="ann"):
    return client.post("/sessions/s1/decisions", json={
        "sample_id": sample_id, "decision": decision, "annotator": annotator})


def test_list_sessions(client):
    doc = client.get("/sessions").json()
    assert doc["sessions"][0]["id"] == "s1"
    assert doc["sessions"][0]["size"] == 18


def test_next_returns_sample_and_hints(client, store):
    resp = client.get("/sessions/s1/next")
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["sample"]["id"] == "s0"
    assert isinstance(doc["hints"], list)
    assert doc["rulebase_version"] == store.rulebase.version


def test_next_with_planted_hint(tmp_path, small_rulebase):
    store = AnnotationStore(small_rulebase, out_dir=tmp_path)
    store.create_session("s1", Corpus("c", [
        Sample(id="x", text="今晚时时彩开盘", label=Category.GAMBLING)]))
    client = TestClient(create_app(store))
    doc = client.get("/sessions/s1/next").json()
    hits = doc["hints"]
    assert hits and hits[0]["term"] == "时时彩"
    raw = "今晚时时彩开盘".encode("utf-8")
    assert raw[hits[0]["start"]:hits[0]["end"]].decode("utf-8") == "时时彩"


def test_next_unknown_session(client):
    resp = client.get("/sessions/ghost/next")
    assert resp.status_code == 404
    assert resp.json()["code"] == "unknown_session"


def test_decision_roundtrip_and_progress(client):
    resp = _decide(client, "s0", {"kind": "retain_matched", "rule_id": "g1"})
    assert resp.status_code == 200
    assert resp.json()["ok"] is True
    progress = client.get("/sessions/s1/progress").json()
    assert progress["counts"]["Gambling"]["retained"] == 1

    resp = _decide(client, "s1", {"kind": "discard", "reason": "错标"})
    assert resp.status_code == 200
    progress = client.get("/sessions/s1/progress").json()
    assert progress["counts"]["Gambling"]["discarded"] == 1


def test_decision_conflict_409(client):
    _decide(client, "s0", {"kind": "discard"})
    resp = _decide(client, "s0", {"kind": "discard"})
    assert resp.status_code == 409
    assert resp.json()["code"] == "decision_conflict"


def test_decision_unknown_sample_404(client):
    resp = _decide(client, "ghost", {"kind": "discard"})
    assert resp.status_code == 404
    assert resp.json()["code"] == "unknown_sample"


def test_decision_with_new_rule_bumps_rulebase(client, store):
    before = store.rulebase.version
    resp = _decide(client, "s0", {
        "kind": "retain_rule_change",
        "new_rule": {"id": "fresh", "category": "Fraud",
                     "title": "新", "body": "新规则。", "hint_terms": ["词"]}})
    assert resp.status_code == 200
    assert resp.json()["rulebase_version"] == before + 1
    doc = client.get("/rulebase").json()
    assert any(r["id"] == "fresh" for r in doc["rules"])


def test_decision_log_persisted(client, store, tmp_path):
    _decide(client, "s0", {"kind": "discard"})
    log = store._log_path("s1")
    assert log.exists()
    events = [json.loads(line) for line in log.read_text().splitlines()]
    assert events[0]["sample_id"] == "s0"
    assert events[0]["decision"]["kind"] == "discard"


def test_finalize_success_and_file(client, store, tmp_path):
    # retain everything, then finalize with m=3
    while True:
        nxt = client.get("/sessions/s1/next")
        if nxt.status_code == 404:
            break
        sid = nxt.json()["sample"]["id"]
        _decide(client, sid, {"kind": "retain_matched", "rule_id": "g1"})
    resp = client.post("/sessions/s1/finalize", json={"m": 3, "seed": 1})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["count"] == 18
    assert (tmp_path / "benchmark-s1-m3.jsonl").exists()


def test_finalize_shortfall_409(client):
    _decide(client, "s0", {"kind": "retain_matched", "rule_id": "g1"})
    resp = client.post("/sessions/s1/finalize", json={"m": 2, "seed": 0})
    assert resp.status_code == 409
    doc = resp.json()
    assert doc["code"] == "shortfall"
    assert doc["detail"]["counts"]["Gambling"] == 1


def test_queue_empty_signal(tmp_path, small_rulebase):
    store = AnnotationStore(small_rulebase, out_dir=tmp_path)
    store.create_session("s1", Corpus("c", [
        Sample(id="only", text="文本", label=Category.ABUSE)]))
    client = TestClient(create_app(store))
    _decide(client, "only", {"kind": "discard"})
    resp = client.get("/sessions/s1/next")
    assert resp.status_code == 404
    assert resp.json()["code"] == "queue_empty"


def test_rulebase_endpoints(client, store):
    doc = client.get("/rulebase").json()
    assert doc["version"] == store.rulebase.version
    assert "rendered" in doc and doc["rendered"].startswith("博彩：")

    resp = client.post("/rulebase/rules", json={
        "id": "x1", "category": "Abuse", "title": "新", "body": "新增规则。",
        "hint_terms": ["新词"]})
    assert resp.status_code == 200
    v1 = resp.json()["version"]

    dup = client.post("/rulebase/rules", json={
        "id": "x1", "category": "Abuse", "body": "重复。"})
    assert dup.status_code == 409
    assert dup.json()["code"] == "duplicate_rule"

    resp = client.patch("/rulebase/rules/x1", json={"body": "修改后的规则。"})
    assert resp.status_code == 200
    assert resp.json()["version"] == v1 + 1

    missing = client.patch("/rulebase/rules/ghost", json={"body": "x"})
    assert missing.status_code == 404

    doc = client.get("/rulebase").json()
    body = next(r["body"] for r in doc["rules"] if r["id"] == "x1")
    assert body == "修改后的规则。"


def test_rule_edit_affects_session_hints(client, store):
    # adding a rule with a hint term shows up in subsequent next() calls
    client.post("/rulebase/rules", json={
        "id": "hinted", "category": "Gambling", "body": "新规则。",
        "hint_terms": ["文本0"]})
    doc = client.get("/sessions/s1/next").json()
    assert any(h["rule_id"] == "hinted" for h in doc["hints"])


def test_restore_session_replays_log(tmp_path, small_rulebase):
    corpus = make_corpus(2)
    store = AnnotationStore(small_rulebase, out_dir=tmp_path)
    store.create_session("s1", corpus)
    client = TestClient(create_app(store))
    _decide(client, "s0", {"kind": "discard"})
    _decide(client, "s1", {"kind": "retain_matched", "rule_id": "g1"})
    progress = client.get("/sessions/s1/progress").json()

    fresh_store = AnnotationStore(small_rulebase, out_dir=tmp_path)
    fresh_store.restore_session("s1", make_corpus(2))
    fresh_client = TestClient(create_app(fresh_store))
    assert fresh_client.get("/sessions/s1/progress").json() == progress
