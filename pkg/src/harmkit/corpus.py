"""Labeled-sample data model and JSONL persistence.

Six fixed content categories (five violation types plus non-violation), each
with a canonical Chinese label. Corpora are immutable once built; every
pipeline stage returns a new corpus.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DataValidationError, ShortfallError


class Category(Enum):
    """The six content categories with their canonical Chinese labels."""

    GAMBLING = ("Gambling", "博彩")
    PORNOGRAPHY = ("Pornography", "低俗色情")
    ABUSE = ("Abuse", "谩骂引战")
    FRAUD = ("Fraud", "欺诈")
    ILLICIT_ADS = ("IllicitAds", "黑产广告")
    NON_VIOLATION = ("NonViolation", "不违规")

    def __init__(self, canonical: str, zh: str):
        self.canonical = canonical
        self.zh = zh

    @property
    def is_violation(self) -> bool:
        return self is not Category.NON_VIOLATION

    @classmethod
    def violations(cls) -> list["Category"]:
        return [c for c in cls if c.is_violation]

    @classmethod
    def parse(cls, label: str) -> "Category":
        """Accepts the English enum name or the Chinese label."""
        label = label.strip()
        for cat in cls:
            if label == cat.canonical or label == cat.zh:
                return cat
        raise DataValidationError(f"unknown category label: {label!r}")


CATEGORY_ORDER: tuple[Category, ...] = tuple(Category)
ZH_LABELS: tuple[str, ...] = tuple(c.zh for c in Category)


@dataclass(frozen=True)
class Sample:
    """One labeled text unit."""

    id: str
    text: str
    label: Category
    source: str = ""
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.text:
            raise DataValidationError(f"sample {self.id!r} has empty text")

    def to_json(self) -> dict:
        rec = {
            "id": self.id,
            "text": self.text,
            "label": self.label.canonical,
            "label_zh": self.label.zh,
            "source": self.source,
        }
        if self.metadata:
            rec["metadata"] = self.metadata
        return rec


class Corpus:
    """An ordered, immutable collection of samples with a per-category index."""

    def __init__(self, name: str, samples: list[Sample]):
        seen: set[str] = set()
        for s in samples:
            if s.id in seen:
                raise DataValidationError(f"duplicate sample id: {s.id!r}")
            seen.add(s.id)
        self.name = name
        self._samples = tuple(samples)
        index: dict[Category, list[Sample]] = {c: [] for c in Category}
        for s in self._samples:
            index[s.label].append(s)
        self._by_category = {c: tuple(v) for c, v in index.items()}

    @property
    def samples(self) -> tuple[Sample, ...]:
        return self._samples

    def by_category(self, category: Category) -> tuple[Sample, ...]:
        return self._by_category[category]

    def categories_present(self) -> list[Category]:
        return [c for c in CATEGORY_ORDER if self._by_category[c]]

    def counts(self) -> dict[Category, int]:
        return {c: len(v) for c, v in self._by_category.items()}

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)


@dataclass
class IngestError:
    line: int
    message: str


@dataclass
class IngestResult:
    corpus: Corpus
    errors: list[IngestError]


def ingest_jsonl(path: str | Path, default_source: str = "file") -> IngestResult:
    """Reads one sample per JSONL line; malformed lines go to the error report.

    Ids are assigned as "{source}:{line}" when the record carries none, so
    re-ingesting the same file reproduces the same corpus.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc

    samples: list[Sample] = []
    errors: list[IngestError] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(IngestError(lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            errors.append(IngestError(lineno, "line is not a JSON object"))
            continue
        text = obj.get("text")
        label = obj.get("label")
        if not isinstance(text, str) or not text:
            errors.append(IngestError(lineno, "missing or empty 'text'"))
            continue
        if not isinstance(label, str):
            errors.append(IngestError(lineno, "missing 'label'"))
            continue
        try:
            category = Category.parse(label)
        except DataValidationError as exc:
            errors.append(IngestError(lineno, str(exc)))
            continue
        source = obj.get("source") or default_source
        sid = obj.get("id") or f"{source}:{lineno}"
        if sid in seen_ids:
            errors.append(IngestError(lineno, f"duplicate id {sid!r}"))
            continue
        seen_ids.add(sid)
        metadata = obj.get("metadata") or {}
        if not isinstance(metadata, dict):
            errors.append(IngestError(lineno, "'metadata' is not an object"))
            continue
        samples.append(Sample(id=sid, text=text, label=category, source=source,
                              metadata={str(k): str(v) for k, v in metadata.items()}))

    return IngestResult(Corpus(path.stem, samples), errors)


def export_jsonl(corpus: Corpus, path: str | Path) -> int:
    """Writes the corpus in the canonical JSONL schema; returns the record count."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for s in corpus:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")
    return len(corpus)


def deduplicate(corpus: Corpus) -> Corpus:
    """Drops byte-identical texts within each category, keeping first occurrences.

    The same text under two different categories survives in both: dedup is
    strictly per-category. Comparison is exact byte equality, no normalization,
    so the operation stays auditable.
    """
    seen: dict[Category, set[bytes]] = {c: set() for c in Category}
    kept: list[Sample] = []
    for s in corpus:
        key = s.text.encode("utf-8")
        if key in seen[s.label]:
            continue
        seen[s.label].add(key)
        kept.append(s)
    return Corpus(corpus.name, kept)


def balanced_sample(corpus: Corpus, m: int, seed: int) -> Corpus:
    """Uniformly samples m items without replacement from every present category.

    Raises ShortfallError naming every category that holds fewer than m
    samples. Deterministic for a fixed seed; output is ordered by category,
    then selection order.
    """
    if m <= 0:
        raise DataValidationError(f"m must be positive, got {m}")
    present = corpus.categories_present()
    deficits = {c.canonical: len(corpus.by_category(c))
                for c in present if len(corpus.by_category(c)) < m}
    if deficits:
        raise ShortfallError(m, deficits)
    rng = random.Random(seed)
    chosen: list[Sample] = []
    for cat in present:
        chosen.extend(rng.sample(list(corpus.by_category(cat)), m))
    return Corpus(f"{corpus.name}-balanced{m}", chosen)
