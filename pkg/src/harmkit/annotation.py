"""Iterative human-annotation sessions over a candidate corpus.

Each sample receives exactly one decision: retain because it matches an
existing rule, retain while changing the rule base (new rule or update), or
discard. Decisions are an append-only event log; replaying the log against
the initial state reproduces the session exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .corpus import CATEGORY_ORDER, Category, Corpus, Sample, balanced_sample
from .errors import DataValidationError, HarmkitError
from .rulebase import HintMatch, Rule, RuleBase, add_rule, match_hints, update_rule


class DecisionConflict(HarmkitError):
    """The sample already has a decision, or the session is finalized."""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class RetainMatched:
    rule_id: str
    kind = "retain_matched"


@dataclass(frozen=True)
class NewRulePayload:
    id: str
    category: Category
    title: str
    body: str
    hint_terms: tuple[str, ...] = ()


@dataclass(frozen=True)
class RuleUpdatePayload:
    rule_id: str
    body: str
    hint_terms: tuple[str, ...] | None = None


@dataclass(frozen=True)
class RetainWithRuleChange:
    """Retain the sample while adding a rule or updating an existing one."""
    new_rule: NewRulePayload | None = None
    update: RuleUpdatePayload | None = None
    kind = "retain_rule_change"

    def __post_init__(self):
        if (self.new_rule is None) == (self.update is None):
            raise DataValidationError(
                "retain_rule_change carries exactly one of new_rule/update")


@dataclass(frozen=True)
class Discard:
    reason: str = ""
    kind = "discard"


Decision = RetainMatched | RetainWithRuleChange | Discard


def decision_to_json(decision: Decision) -> dict:
    if isinstance(decision, RetainMatched):
        return {"kind": decision.kind, "rule_id": decision.rule_id}
    if isinstance(decision, RetainWithRuleChange):
        if decision.new_rule is not None:
            nr = decision.new_rule
            return {"kind": decision.kind, "new_rule": {
                "id": nr.id, "category": nr.category.canonical,
                "title": nr.title, "body": nr.body,
                "hint_terms": list(nr.hint_terms)}}
        up = decision.update
        out = {"kind": decision.kind, "update": {
            "rule_id": up.rule_id, "body": up.body}}
        if up.hint_terms is not None:
            out["update"]["hint_terms"] = list(up.hint_terms)
        return out
    if isinstance(decision, Discard):
        return {"kind": decision.kind, "reason": decision.reason}
    raise DataValidationError(f"unknown decision type {type(decision).__name__}")


def decision_from_json(obj: dict) -> Decision:
    kind = obj.get("kind")
    if kind == "retain_matched":
        return RetainMatched(rule_id=obj["rule_id"])
    if kind == "retain_rule_change":
        if "new_rule" in obj:
            nr = obj["new_rule"]
            return RetainWithRuleChange(new_rule=NewRulePayload(
                id=nr["id"], category=Category.parse(nr["category"]),
                title=nr.get("title", ""), body=nr["body"],
                hint_terms=tuple(nr.get("hint_terms", []))))
        if "update" in obj:
            up = obj["update"]
            hints = tuple(up["hint_terms"]) if "hint_terms" in up else None
            return RetainWithRuleChange(update=RuleUpdatePayload(
                rule_id=up["rule_id"], body=up["body"], hint_terms=hints))
        raise DataValidationError("retain_rule_change without payload")
    if kind == "discard":
        return Discard(reason=obj.get("reason", ""))
    raise DataValidationError(f"unknown decision kind {kind!r}")


@dataclass(frozen=True)
class DecisionRecord:
    sample_id: str
    decision: Decision
    annotator: str
    timestamp: str

    def to_json(self) -> dict:
        return {"sample_id": self.sample_id,
                "decision": decision_to_json(self.decision),
                "annotator": self.annotator,
                "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionRecord":
        return cls(sample_id=obj["sample_id"],
                   decision=decision_from_json(obj["decision"]),
                   annotator=obj.get("annotator", ""),
                   timestamp=obj.get("timestamp", ""))


STATUS_ACTIVE = "active"
STATUS_FINALIZED = "finalized"


class AnnotationSession:
    """Serves candidates in stable ingest order and records decisions.

    The session owns a rule-base reference that retain-with-rule-change
    decisions advance atomically with the decision itself.
    """

    def __init__(self, session_id: str, candidates: Corpus, rulebase: RuleBase):
        self.id = session_id
        self.candidates = candidates
        self.rulebase = rulebase
        self.decisions: dict[str, DecisionRecord] = {}
        self.status = STATUS_ACTIVE
        self._by_id = {s.id: s for s in candidates}

    # -- serving -------------------------------------------------------

    def next_sample(self, category: Category | None = None
                    ) -> tuple[Sample, list[HintMatch]] | None:
        """Next undecided sample (optionally within one category) plus hint
        matches against the current rule base; None when the queue is empty."""
        if self.status != STATUS_ACTIVE:
            raise DecisionConflict(f"session {self.id} is finalized")
        for sample in self.candidates:
            if sample.id in self.decisions:
                continue
            if category is not None and sample.label is not category:
                continue
            return sample, match_hints(self.rulebase, sample.text)
        return None

    # -- decisions -----------------------------------------------------

    def submit_decision(self, sample_id: str, decision: Decision,
                        annotator: str, timestamp: str | None = None) -> int:
        """Records one decision; applies any rule mutation atomically.

        Returns the rule base version after the decision. Raises
        DecisionConflict on double decisions or finalized sessions.
        """
        if self.status != STATUS_ACTIVE:
            raise DecisionConflict(f"session {self.id} is finalized")
        if sample_id not in self._by_id:
            raise DataValidationError(f"unknown sample {sample_id!r}")
        if sample_id in self.decisions:
            raise DecisionConflict(f"sample {sample_id!r} already decided")

        ts = timestamp or _now()
        new_rulebase = self.rulebase
        if isinstance(decision, RetainMatched):
            if self.rulebase.get(decision.rule_id) is None:
                raise DataValidationError(
                    f"decision references unknown rule {decision.rule_id!r}")
        elif isinstance(decision, RetainWithRuleChange):
            if decision.new_rule is not None:
                nr = decision.new_rule
                rule = Rule(id=nr.id, category=nr.category,
                            ordinal=self.rulebase.next_ordinal(nr.category),
                            title=nr.title, body=nr.body,
                            hint_terms=nr.hint_terms)
                new_rulebase = add_rule(self.rulebase, rule, timestamp=ts)
            else:
                up = decision.update
                new_rulebase = update_rule(self.rulebase, up.rule_id, up.body,
                                           up.hint_terms, timestamp=ts)
        elif not isinstance(decision, Discard):
            raise DataValidationError(f"unknown decision type {type(decision)}")

        # rule change validated; commit both effects together
        self.rulebase = new_rulebase
        self.decisions[sample_id] = DecisionRecord(
            sample_id=sample_id, decision=decision,
            annotator=annotator, timestamp=ts)
        return self.rulebase.version

    # -- views ---------------------------------------------------------

    def progress(self) -> dict:
        """Per-category {undecided, retained, discarded}; sums to the
        category's candidate count at all times."""
        counts = {c: {"undecided": 0, "retained": 0, "discarded": 0}
                  for c in CATEGORY_ORDER}
        for sample in self.candidates:
            rec = self.decisions.get(sample.id)
            if rec is None:
                counts[sample.label]["undecided"] += 1
            elif isinstance(rec.decision, Discard):
                counts[sample.label]["discarded"] += 1
            else:
                counts[sample.label]["retained"] += 1
        return {
            "counts": {c.canonical: v for c, v in counts.items()
                       if len(self.candidates.by_category(c)) > 0},
            "rulebase_version": self.rulebase.version,
            "status": self.status,
        }

    def retained_corpus(self) -> Corpus:
        kept = [s for s in self.candidates
                if s.id in self.decisions
                and not isinstance(self.decisions[s.id].decision, Discard)]
        return Corpus(f"{self.candidates.name}-retained", kept)

    def finalize(self, m: int, seed: int) -> Corpus:
        """Balanced benchmark draw over the retained pool; marks the session
        finalized. ShortfallError lists every deficient category."""
        if self.status != STATUS_ACTIVE:
            raise DecisionConflict(f"session {self.id} is already finalized")
        benchmark = balanced_sample(self.retained_corpus(), m, seed)
        self.status = STATUS_FINALIZED
        return benchmark

    # -- event sourcing --------------------------------------------------

    def event_log(self) -> list[dict]:
        return [rec.to_json() for rec in self.decisions.values()]


def replay_session(session_id: str, candidates: Corpus, rulebase: RuleBase,
                   events: list[dict]) -> AnnotationSession:
    """Rebuilds a session by replaying its decision log in order."""
    session = AnnotationSession(session_id, candidates, rulebase)
    for event in events:
        rec = DecisionRecord.from_json(event)
        session.submit_decision(rec.sample_id, rec.decision, rec.annotator,
                                timestamp=rec.timestamp)
    return session


def append_event(path: str | Path, event: dict) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(event, ensure_ascii=False) + "\n")


def read_events(path: str | Path) -> list[dict]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            events.append(json.loads(line))
    return events
