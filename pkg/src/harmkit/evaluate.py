"""Zero-shot detection evaluation: prompt construction, response parsing,
confusion tallies, per-category and macro F1, and report emission.

Final score aggregation runs in exact rational arithmetic before the single
conversion to float, so the balanced-support identity macro-F1 == weighted-F1
holds bit-for-bit rather than approximately.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .corpus import CATEGORY_ORDER, Category, Corpus
from .errors import DataValidationError
from .llmclient import ChatRequest, LlmClient
from .rulebase import RuleBase, render_rules

DETECTION_HEADER = (
    "作为中文互联网内容审核专家，请依据中国现行法律法规及内容安全标准，"
    "判断以下文本是否适合公开发布。\n\n"
    "如果文本违规，请指出违规类别，类别范围限定为："
    "“博彩”、“低俗色情”、“谩骂引战”、“欺诈”、“黑产广告”。"
    "如果文本不违规，请回答“不违规”。\n\n"
    "请直接输出一个类别：包括“博彩”、“低俗色情”、“谩骂引战”、“欺诈”、“黑产广告”或“不违规”。"
)


@dataclass(frozen=True)
class DetectionPrompt:
    text: str
    with_knowledge: bool


def build_detection_prompt(rb: RuleBase | None, content: str) -> DetectionPrompt:
    """Fills the detection template; the 规则 section is omitted entirely when
    no rule base is supplied (or it renders empty)."""
    if not content:
        raise DataValidationError("detection prompt requires non-empty content")
    rendered = render_rules(rb) if rb is not None else ""
    if rendered:
        text = f"{DETECTION_HEADER}\n\n规则: {rendered}\n\n文本: {content}"
        return DetectionPrompt(text=text, with_knowledge=True)
    return DetectionPrompt(text=f"{DETECTION_HEADER}\n\n文本: {content}",
                           with_knowledge=False)


def parse_category(raw: str) -> Category | None:
    """Maps a model response to one of the six labels, or None when unparsed.

    Exact match of the trimmed output is tried first; otherwise the earliest
    label occurring as a substring wins (ties at the same position resolve in
    template label order).
    """
    trimmed = raw.strip()
    for cat in CATEGORY_ORDER:
        if trimmed == cat.zh:
            return cat
    best: tuple[int, int] | None = None  # (position, template order)
    for order, cat in enumerate(CATEGORY_ORDER):
        pos = raw.find(cat.zh)
        if pos == -1:
            continue
        if best is None or (pos, order) < best:
            best = (pos, order)
    if best is None:
        return None
    return CATEGORY_ORDER[best[1]]


@dataclass(frozen=True)
class Prediction:
    id: str
    raw: str
    parsed: Category | None


class ConfusionMatrix:
    """6x6 true-by-predicted counts plus per-true-category unparsed counts."""

    def __init__(self):
        self.counts = {t: {p: 0 for p in CATEGORY_ORDER} for t in CATEGORY_ORDER}
        self.unparsed = {t: 0 for t in CATEGORY_ORDER}

    def add(self, truth: Category, parsed: Category | None) -> None:
        if parsed is None:
            self.unparsed[truth] += 1
        else:
            self.counts[truth][parsed] += 1

    def support(self, truth: Category) -> int:
        return sum(self.counts[truth].values()) + self.unparsed[truth]

    def total(self) -> int:
        return sum(self.support(t) for t in CATEGORY_ORDER)

    def tp(self, cat: Category) -> int:
        return self.counts[cat][cat]

    def fp(self, cat: Category) -> int:
        return sum(self.counts[t][cat] for t in CATEGORY_ORDER if t is not cat)

    def fn(self, cat: Category) -> int:
        parsed_miss = sum(v for p, v in self.counts[cat].items() if p is not cat)
        return parsed_miss + self.unparsed[cat]

    def to_json(self) -> dict:
        return {
            "counts": {t.canonical: {p.canonical: v for p, v in row.items()}
                       for t, row in self.counts.items()},
            "unparsed": {t.canonical: v for t, v in self.unparsed.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConfusionMatrix":
        cm = cls()
        for t, row in obj["counts"].items():
            for p, v in row.items():
                cm.counts[Category.parse(t)][Category.parse(p)] = int(v)
        for t, v in obj.get("unparsed", {}).items():
            cm.unparsed[Category.parse(t)] = int(v)
        return cm


def tally(truths: list[Category], preds: list[Prediction]) -> ConfusionMatrix:
    if len(truths) != len(preds):
        raise DataValidationError(
            f"tally: {len(truths)} truths vs {len(preds)} predictions")
    cm = ConfusionMatrix()
    for truth, pred in zip(truths, preds):
        cm.add(truth, pred.parsed)
    return cm


@dataclass
class EvalReport:
    per_category: dict[str, dict]
    macro_f1: float
    weighted_f1: float
    counts: dict
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_category": self.per_category,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "counts": self.counts,
            "config": self.config,
        }

    def render_table(self) -> str:
        """Plain-text table: one F1 column per category plus Macro-F1."""
        headers = [c.canonical for c in CATEGORY_ORDER] + ["Macro-F1"]
        values = [f"{self.per_category[c.canonical]['f1']:.4f}"
                  for c in CATEGORY_ORDER] + [f"{self.macro_f1:.4f}"]
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        line = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        vals = "  ".join(v.rjust(w) for v, w in zip(values, widths))
        return line + "\n" + vals


def f1_scores(cm: ConfusionMatrix, config: dict | None = None) -> EvalReport:
    """Per-category precision/recall/F1 plus macro and support-weighted F1.

    Unparsed outputs count as a miss for the true category and a false
    positive for none. 0/0 ratios are defined as 0.
    """
    per_category: dict[str, dict] = {}
    f1_fracs: list[Fraction] = []
    supports: list[int] = []
    for cat in CATEGORY_ORDER:
        tp, fp, fn = cm.tp(cat), cm.fp(cat), cm.fn(cat)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1_frac = (Fraction(2 * tp, 2 * tp + fp + fn)
                   if 2 * tp + fp + fn else Fraction(0))
        per_category[cat.canonical] = {
            "precision": precision,
            "recall": recall,
            "f1": float(f1_frac),
            "support": cm.support(cat),
            "unparsed": cm.unparsed[cat],
        }
        f1_fracs.append(f1_frac)
        supports.append(cm.support(cat))
    macro = float(sum(f1_fracs) / len(f1_fracs))
    total_support = sum(supports)
    if total_support:
        weighted = float(sum(Fraction(s) * f for s, f in zip(supports, f1_fracs))
                         / total_support)
    else:
        weighted = 0.0
    counts = {
        "evaluated": cm.total(),
        "unparsed": sum(cm.unparsed.values()),
        "matrix": cm.to_json(),
    }
    return EvalReport(per_category=per_category, macro_f1=macro,
                      weighted_f1=weighted, counts=counts,
                      config=dict(config or {}))


@dataclass
class EvalRunConfig:
    model: str = "mock"
    temperature: float = 0.0   # deterministic decoding for evaluation runs
    max_tokens: int = 64
    with_knowledge: bool = True


def _prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def evaluate_model(client: LlmClient, corpus: Corpus, rb: RuleBase | None,
                   run: EvalRunConfig | None = None,
                   log_path: str | Path | None = None,
                   ) -> tuple[EvalReport, list[Prediction]]:
    """Queries the model over every sample, parses, tallies, and scores.

    Writes a per-sample JSONL log sufficient to recompute the report offline.
    Samples whose provider call ultimately fails are excluded from the tally
    and surfaced in counts["errors"].
    """
    run = run or EvalRunConfig()
    use_rb = rb if run.with_knowledge else None
    samples = list(corpus)
    prompts = [build_detection_prompt(use_rb, s.text) for s in samples]
    reqs = [ChatRequest(model=run.model,
                        messages=[{"role": "user", "content": p.text}],
                        temperature=run.temperature,
                        max_tokens=run.max_tokens)
            for p in prompts]
    items = client.complete_batch(reqs)

    predictions: list[Prediction] = []
    truths: list[Category] = []
    log_lines: list[dict] = []
    errors: list[dict] = []
    for sample, prompt, item in zip(samples, prompts, items):
        if not item.ok:
            errors.append({"id": sample.id, "error": item.error,
                           "error_type": item.error_type})
            continue
        raw = item.result.text
        parsed = parse_category(raw)
        predictions.append(Prediction(id=sample.id, raw=raw, parsed=parsed))
        truths.append(sample.label)
        log_lines.append({
            "id": sample.id,
            "truth": sample.label.canonical,
            "prompt_hash": _prompt_hash(prompt.text),
            "raw": raw,
            "parsed": parsed.canonical if parsed else None,
        })

    cm = tally(truths, predictions)
    config = {
        "model": run.model,
        "temperature": run.temperature,
        "with_knowledge": run.with_knowledge and rb is not None,
        "rulebase_version": rb.version if rb is not None else None,
    }
    report = f1_scores(cm, config=config)
    report.counts["errors"] = len(errors)
    report.counts["error_detail"] = errors
    if log_path is not None:
        with Path(log_path).open("w", encoding="utf-8") as fh:
            for line in log_lines:
                fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    return report, predictions


def recompute_from_log(path: str | Path) -> EvalReport:
    """Re-derives the scores from a per-sample log; scoring is a pure function
    of the log, so this must agree with the live report."""
    cm = ConfusionMatrix()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        truth = Category.parse(obj["truth"])
        parsed = Category.parse(obj["parsed"]) if obj.get("parsed") else None
        cm.add(truth, parsed)
    return f1_scores(cm)
