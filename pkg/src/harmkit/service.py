"""HTTP/JSON API for annotation sessions and the rule base.

This is the contract the browser console speaks. Decision submission is
linearized per store (single logical writer); reads serve snapshots. Errors
are always {code, message, detail}.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .annotation import (
    AnnotationSession,
    DecisionConflict,
    append_event,
    decision_from_json,
    read_events,
    replay_session,
)
from .corpus import Category, Corpus, export_jsonl
from .errors import DataValidationError, ShortfallError
from .rulebase import Rule, RuleBase, add_rule, render_rules, update_rule


class AnnotationStore:
    """Owns the sessions, the shared rule base, and the decision logs."""

    def __init__(self, rulebase: RuleBase, out_dir: str | Path = "."):
        self.rulebase = rulebase
        self.sessions: dict[str, AnnotationSession] = {}
        self.out_dir = Path(out_dir)
        self.lock = threading.Lock()

    def create_session(self, session_id: str, candidates: Corpus) -> AnnotationSession:
        with self.lock:
            if session_id in self.sessions:
                raise DataValidationError(f"session {session_id!r} already exists")
            session = AnnotationSession(session_id, candidates, self.rulebase)
            self.sessions[session_id] = session
            return session

    def restore_session(self, session_id: str, candidates: Corpus) -> AnnotationSession:
        """Rebuilds a session from its decision log if one exists on disk."""
        log = self._log_path(session_id)
        if log.exists():
            session = replay_session(session_id, candidates, self.rulebase,
                                     read_events(log))
            with self.lock:
                self.sessions[session_id] = session
                self.rulebase = session.rulebase
            return session
        return self.create_session(session_id, candidates)

    def get(self, session_id: str) -> AnnotationSession | None:
        return self.sessions.get(session_id)

    def _log_path(self, session_id: str) -> Path:
        return self.out_dir / f"session-{session_id}.log.jsonl"


def _error(status: int, code: str, message: str, detail=None) -> JSONResponse:
    return JSONResponse(status_code=status, content={
        "code": code, "message": message, "detail": detail})


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="harmkit annotation service")

    def _session_or_error(session_id: str):
        session = store.get(session_id)
        if session is None:
            return None, _error(404, "unknown_session",
                                f"no session {session_id!r}")
        return session, None

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [
            {"id": s.id, "status": s.status, "size": len(s.candidates)}
            for s in store.sessions.values()]}

    @app.get("/sessions/{session_id}/next")
    def next_sample(session_id: str, category: str | None = None):
        session, err = _session_or_error(session_id)
        if err:
            return err
        cat = None
        if category:
            try:
                cat = Category.parse(category)
            except DataValidationError as exc:
                return _error(400, "bad_category", str(exc))
        try:
            nxt = session.next_sample(cat)
        except DecisionConflict as exc:
            return _error(409, "session_finalized", str(exc))
        if nxt is None:
            return _error(404, "queue_empty", "no undecided samples remain",
                          {"category": category})
        sample, hints = nxt
        return {
            "sample": {"id": sample.id, "text": sample.text,
                       "label": sample.label.canonical,
                       "label_zh": sample.label.zh,
                       "source": sample.source},
            "hints": [{"rule_id": h.rule_id, "term": h.term,
                       "start": h.start, "end": h.end} for h in hints],
            "rulebase_version": session.rulebase.version,
        }

    @app.post("/sessions/{session_id}/decisions")
    def submit_decision(session_id: str, body: dict):
        session, err = _session_or_error(session_id)
        if err:
            return err
        try:
            decision = decision_from_json(body.get("decision") or {})
            sample_id = body["sample_id"]
            annotator = body.get("annotator", "")
        except (KeyError, DataValidationError) as exc:
            return _error(400, "bad_request", str(exc))
        with store.lock:
            try:
                version = session.submit_decision(sample_id, decision, annotator)
            except DecisionConflict as exc:
                return _error(409, "decision_conflict", str(exc))
            except DataValidationError as exc:
                return _error(404, "unknown_sample", str(exc))
            store.rulebase = session.rulebase
            for other in store.sessions.values():
                if other is not session and other.status == "active":
                    other.rulebase = store.rulebase
            append_event(store._log_path(session_id),
                         session.decisions[sample_id].to_json())
        return {"ok": True, "rulebase_version": version}

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str):
        session, err = _session_or_error(session_id)
        if err:
            return err
        return session.progress()

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str, body: dict):
        session, err = _session_or_error(session_id)
        if err:
            return err
        try:
            m = int(body["m"])
            seed = int(body.get("seed", 0))
        except (KeyError, TypeError, ValueError):
            return _error(400, "bad_request", "finalize requires integer m")
        with store.lock:
            try:
                benchmark = session.finalize(m, seed)
            except ShortfallError as exc:
                return _error(409, "shortfall", str(exc),
                              {"requested": exc.requested, "counts": exc.counts})
            except DecisionConflict as exc:
                return _error(409, "session_finalized", str(exc))
            except DataValidationError as exc:
                return _error(400, "bad_request", str(exc))
            out = store.out_dir / f"benchmark-{session_id}-m{m}.jsonl"
            count = export_jsonl(benchmark, out)
        return {"ok": True, "benchmark_path": str(out), "count": count}

    @app.get("/rulebase")
    def get_rulebase():
        rb = store.rulebase
        return {
            "version": rb.version,
            "rules": [r.to_json() for r in rb.rules],
            "rendered": render_rules(rb),
        }

    @app.post("/rulebase/rules")
    def post_rule(body: dict):
        with store.lock:
            rb = store.rulebase
            try:
                category = Category.parse(body["category"])
                rule = Rule(
                    id=body["id"],
                    category=category,
                    ordinal=int(body.get("ordinal") or rb.next_ordinal(category)),
                    title=body.get("title", ""),
                    body=body["body"],
                    hint_terms=tuple(body.get("hint_terms", [])),
                )
            except KeyError as exc:
                return _error(400, "bad_request", f"missing field {exc}")
            except DataValidationError as exc:
                return _error(400, "bad_request", str(exc))
            try:
                store.rulebase = add_rule(rb, rule)
            except DataValidationError as exc:
                return _error(409, "duplicate_rule", str(exc))
            for session in store.sessions.values():
                if session.status == "active":
                    session.rulebase = store.rulebase
        return {"ok": True, "version": store.rulebase.version}

    @app.patch("/rulebase/rules/{rule_id}")
    def patch_rule(rule_id: str, body: dict):
        with store.lock:
            try:
                store.rulebase = update_rule(
                    store.rulebase, rule_id, body["body"],
                    body.get("hint_terms"))
            except KeyError as exc:
                return _error(400, "bad_request", f"missing field {exc}")
            except DataValidationError as exc:
                return _error(404, "unknown_rule", str(exc))
            for session in store.sessions.values():
                if session.status == "active":
                    session.rulebase = store.rulebase
        return {"ok": True, "version": store.rulebase.version}

    return app


def serve(store: AnnotationStore, host: str = "127.0.0.1", port: int = 8321):
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port)
