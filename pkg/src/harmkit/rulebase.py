"""Versioned knowledge rule base: storage, editing, rendering, hint matching.

Rules are human-authored prose, one per numbered item of a category's
guideline list. Every mutation produces a new RuleBase with version+1 and a
changelog entry; rendering at a fixed version is byte-stable. Hint terms are
an annotation aid only — they highlight, they never decide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from .corpus import CATEGORY_ORDER, Category
from .errors import DataValidationError
from .textspan import byte_offsets, find_all


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class Rule:
    id: str
    category: Category
    ordinal: int
    title: str
    body: str
    hint_terms: tuple[str, ...] = ()
    created_version: int = 0
    last_modified_version: int = 0

    def __post_init__(self):
        if not self.body:
            raise DataValidationError(f"rule {self.id!r}: empty body")
        if self.category is Category.NON_VIOLATION:
            raise DataValidationError(f"rule {self.id!r}: category must be a violation type")
        if any(not t for t in self.hint_terms):
            raise DataValidationError(f"rule {self.id!r}: empty hint term")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.canonical,
            "ordinal": self.ordinal,
            "title": self.title,
            "body": self.body,
            "hint_terms": list(self.hint_terms),
            "created_version": self.created_version,
            "last_modified_version": self.last_modified_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Rule":
        return cls(
            id=obj["id"],
            category=Category.parse(obj["category"]),
            ordinal=int(obj.get("ordinal", 0)),
            title=obj.get("title", ""),
            body=obj["body"],
            hint_terms=tuple(obj.get("hint_terms", [])),
            created_version=int(obj.get("created_version", 0)),
            last_modified_version=int(obj.get("last_modified_version", 0)),
        )


@dataclass(frozen=True)
class ChangeEntry:
    version: int
    action: str            # "add" | "update"
    rule_id: str
    timestamp: str
    previous_body: str | None = None
    previous_hints: tuple[str, ...] | None = None

    def to_json(self) -> dict:
        out = {"version": self.version, "action": self.action,
               "rule_id": self.rule_id, "timestamp": self.timestamp}
        if self.previous_body is not None:
            out["previous_body"] = self.previous_body
        if self.previous_hints is not None:
            out["previous_hints"] = list(self.previous_hints)
        return out


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[Rule, ...] = ()
    version: int = 0
    changelog: tuple[ChangeEntry, ...] = ()

    def get(self, rule_id: str) -> Rule | None:
        for r in self.rules:
            if r.id == rule_id:
                return r
        return None

    def for_category(self, category: Category) -> list[Rule]:
        rules = [r for r in self.rules if r.category is category]
        rules.sort(key=lambda r: (r.ordinal, r.id))
        return rules

    def next_ordinal(self, category: Category) -> int:
        existing = self.for_category(category)
        return existing[-1].ordinal + 1 if existing else 1

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "rules": [r.to_json() for r in self.rules],
            "changelog": [e.to_json() for e in self.changelog],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RuleBase":
        rules = tuple(Rule.from_json(r) for r in obj.get("rules", []))
        ids = [r.id for r in rules]
        if len(set(ids)) != len(ids):
            raise DataValidationError("rule base contains duplicate rule ids")
        changelog = tuple(
            ChangeEntry(
                version=int(e["version"]), action=e["action"],
                rule_id=e["rule_id"], timestamp=e.get("timestamp", ""),
                previous_body=e.get("previous_body"),
                previous_hints=tuple(e["previous_hints"]) if "previous_hints" in e else None,
            )
            for e in obj.get("changelog", [])
        )
        return cls(rules=rules, version=int(obj.get("version", 0)), changelog=changelog)


def add_rule(rb: RuleBase, rule: Rule, timestamp: str | None = None) -> RuleBase:
    """Adds a rule; version stamps are assigned here, not by the caller."""
    if rb.get(rule.id) is not None:
        raise DataValidationError(f"rule id {rule.id!r} already exists")
    version = rb.version + 1
    stamped = replace(rule, created_version=version, last_modified_version=version)
    entry = ChangeEntry(version=version, action="add", rule_id=rule.id,
                        timestamp=timestamp or _now())
    return RuleBase(rules=rb.rules + (stamped,), version=version,
                    changelog=rb.changelog + (entry,))


def update_rule(rb: RuleBase, rule_id: str, new_body: str,
                new_hints: list[str] | tuple[str, ...] | None = None,
                timestamp: str | None = None) -> RuleBase:
    """Replaces a rule's body/hints; the prior body is kept in the changelog."""
    old = rb.get(rule_id)
    if old is None:
        raise DataValidationError(f"unknown rule id {rule_id!r}")
    version = rb.version + 1
    hints = tuple(new_hints) if new_hints is not None else old.hint_terms
    updated = replace(old, body=new_body, hint_terms=hints,
                      last_modified_version=version)
    entry = ChangeEntry(version=version, action="update", rule_id=rule_id,
                        timestamp=timestamp or _now(),
                        previous_body=old.body, previous_hints=old.hint_terms)
    rules = tuple(updated if r.id == rule_id else r for r in rb.rules)
    return RuleBase(rules=rules, version=version, changelog=rb.changelog + (entry,))


def render_rules(rb: RuleBase, categories: set[Category] | None = None) -> str:
    """Deterministic prompt text: per category, the Chinese label then the
    numbered rule bodies in ordinal order. Empty base renders "".

    Layout per category block:

        博彩：
        1. <body>
        2. <body>

    Blocks are separated by a blank line.
    """
    blocks = []
    for cat in CATEGORY_ORDER:
        if not cat.is_violation:
            continue
        if categories is not None and cat not in categories:
            continue
        rules = rb.for_category(cat)
        if not rules:
            continue
        lines = [f"{cat.zh}："]
        lines.extend(f"{i}. {r.body}" for i, r in enumerate(rules, start=1))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


@dataclass(frozen=True)
class HintMatch:
    rule_id: str
    term: str
    start: int   # UTF-8 byte offset, inclusive
    end: int     # UTF-8 byte offset, exclusive


def match_hints(rb: RuleBase, text: str) -> list[HintMatch]:
    """Every case-sensitive occurrence of any hint term, sorted by byte span.

    Overlapping matches from different terms are all reported; spans sliced
    from the UTF-8 encoding of `text` equal the matched term exactly.
    """
    offsets = byte_offsets(text)
    matches: list[HintMatch] = []
    for rule in rb.rules:
        for term in rule.hint_terms:
            for cp_start in find_all(text, term):
                matches.append(HintMatch(
                    rule_id=rule.id,
                    term=term,
                    start=offsets[cp_start],
                    end=offsets[cp_start + len(term)],
                ))
    matches.sort(key=lambda m: (m.start, m.end, m.rule_id, m.term))
    return matches


def save_rulebase(rb: RuleBase, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(rb.to_json(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


def load_rulebase(path: str | Path) -> RuleBase:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataValidationError(f"cannot read rule base {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"rule base {path}: invalid JSON: {exc.msg}") from exc
    return RuleBase.from_json(doc)


def default_rulebase() -> RuleBase:
    """The bundled guideline rule base covering all five violation categories."""
    with resources.files("harmkit.data").joinpath("rules_default.json").open(
            "r", encoding="utf-8") as fh:
        return RuleBase.from_json(json.load(fh))
