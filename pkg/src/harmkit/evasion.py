"""Keyword-substitution evasion tactics as deterministic text perturbers.

Four substitution strategies (pinyin, homophone, homograph, emoji) plus the
no-evasion identity. The same strategies also exist prompt-side during
synthetic generation; this module makes them runnable locally so robustness
checks need no LLM.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import DataValidationError
from .textspan import byte_offsets

STRATEGY_SENTENCE = "该文本使用关键词替换策略，使用{手段}来规避部分敏感词汇或内容。"
NO_EVASION_SENTENCE = "该文本为正常文本，没有使用任何规避策略或手段。"


class EvasionStrategy(Enum):
    PINYIN = ("pinyin", "拼音")
    HOMOPHONE = ("homophone", "谐音词")
    HOMOGRAPH = ("homograph", "形似词")
    EMOJI = ("emoji", "emoji")
    NONE = ("none", "不规避")

    def __init__(self, key: str, zh: str):
        self.key = key
        self.zh = zh

    @classmethod
    def parse(cls, value: str) -> "EvasionStrategy":
        for s in cls:
            if value in (s.key, s.zh, s.name):
                return s
        raise DataValidationError(f"unknown evasion strategy: {value!r}")


SUBSTITUTION_STRATEGIES = tuple(s for s in EvasionStrategy if s is not EvasionStrategy.NONE)


def strategy_description(strategy: EvasionStrategy) -> str:
    """The Chinese prompt sentence explaining the (non-)use of evasion."""
    if strategy is EvasionStrategy.NONE:
        return NO_EVASION_SENTENCE
    return STRATEGY_SENTENCE.format(手段=strategy.zh)


class SubstitutionLexicon:
    """Sensitive term -> per-strategy substitute lists."""

    def __init__(self, entries: dict[str, dict[str, list[str]]]):
        for term, subs in entries.items():
            if not term:
                raise DataValidationError("lexicon contains an empty term")
            for key, options in subs.items():
                EvasionStrategy.parse(key)
                for opt in options:
                    if not opt:
                        raise DataValidationError(f"term {term!r}: empty substitute")
                    if opt == term:
                        raise DataValidationError(
                            f"term {term!r}: substitute equals the term")
        self._entries = {t: {k: list(v) for k, v in subs.items()}
                         for t, subs in entries.items()}
        # longest first so 红包接龙 wins over 接龙 at the same position
        self._terms_by_length = sorted(self._entries, key=lambda t: (-len(t), t))

    @property
    def terms(self) -> list[str]:
        return list(self._entries)

    def substitutes(self, term: str, strategy: EvasionStrategy) -> list[str]:
        return self._entries.get(term, {}).get(strategy.key, [])

    def to_json(self) -> dict:
        return {t: dict(subs) for t, subs in self._entries.items()}


def pinyin_transcribe(term: str, table: dict[str, str]) -> str | None:
    """Concatenated pinyin of a term, or None when a character is unknown."""
    parts = []
    for ch in term:
        syl = table.get(ch)
        if syl is None:
            return None
        parts.append(syl)
    return "".join(parts)


def default_pinyin_table() -> dict[str, str]:
    with resources.files("harmkit.data").joinpath("char_pinyin.json").open(
            "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_lexicon(path: str | Path | None = None,
                 pinyin_table: dict[str, str] | None = None) -> SubstitutionLexicon:
    """Loads a lexicon file, deriving pinyin substitutes from the character
    table for any term that does not list them explicitly."""
    if path is None:
        with resources.files("harmkit.data").joinpath("lexicon_default.json").open(
                "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataValidationError(f"cannot read lexicon {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"lexicon {path}: invalid JSON: {exc.msg}") from exc
    table = pinyin_table if pinyin_table is not None else default_pinyin_table()
    entries: dict[str, dict[str, list[str]]] = {}
    for term, subs in raw.items():
        merged = {k: list(v) for k, v in subs.items()}
        if not merged.get("pinyin"):
            derived = pinyin_transcribe(term, table)
            if derived and derived != term:
                merged["pinyin"] = [derived]
        entries[term] = merged
    return SubstitutionLexicon(entries)


@dataclass(frozen=True)
class Replacement:
    start: int          # UTF-8 byte offset into the original text
    end: int
    original: str
    replacement: str


@dataclass(frozen=True)
class PerturbResult:
    text: str
    replacements: tuple[Replacement, ...]
    skipped_terms: tuple[str, ...]   # matched terms lacking substitutes

    def reconstruct(self, original: str) -> str:
        """Rebuilds the perturbed text from the original plus the replacement
        records; used to audit that only reported spans changed."""
        raw = original.encode("utf-8")
        out = []
        cursor = 0
        for rep in self.replacements:
            out.append(raw[cursor:rep.start].decode("utf-8"))
            out.append(rep.replacement)
            cursor = rep.end
        out.append(raw[cursor:].decode("utf-8"))
        return "".join(out)


def perturb(text: str, strategy: EvasionStrategy, lex: SubstitutionLexicon,
            seed: int = 0) -> PerturbResult:
    """Replaces every non-overlapping lexicon occurrence, longest match first,
    scanning left to right.

    The substitute is a seeded uniform choice among the term's options for
    the strategy. Terms without substitutes for the strategy are left in
    place and reported in skipped_terms. Strategy NONE is the identity.
    """
    if strategy is EvasionStrategy.NONE:
        return PerturbResult(text=text, replacements=(), skipped_terms=())
    rng = random.Random(seed)
    offsets = byte_offsets(text)
    out: list[str] = []
    replacements: list[Replacement] = []
    skipped: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        replaced = False
        for term in lex._terms_by_length:
            if not text.startswith(term, i):
                continue
            subs = lex.substitutes(term, strategy)
            if not subs:
                if term not in skipped:
                    skipped.append(term)
                continue  # try shorter terms at this position
            choice = subs[0] if len(subs) == 1 else rng.choice(subs)
            replacements.append(Replacement(
                start=offsets[i], end=offsets[i + len(term)],
                original=term, replacement=choice))
            out.append(choice)
            i += len(term)
            replaced = True
            break
        if not replaced:
            out.append(text[i])
            i += 1
    return PerturbResult(text="".join(out), replacements=tuple(replacements),
                         skipped_terms=tuple(skipped))
