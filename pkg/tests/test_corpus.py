from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmkit.corpus import (
    CATEGORY_ORDER,
    Category,
    Corpus,
    Sample,
    balanced_sample,
    deduplicate,
    export_jsonl,
    ingest_jsonl,
)
from harmkit.errors import DataValidationError, ShortfallError

from .conftest import make_corpus, make_sample, write_jsonl


def test_category_labels_unique_and_fixed():
    assert len(Category) == 6
    zh = [c.zh for c in Category]
    assert len(set(zh)) == 6
    assert zh == ["博彩", "低俗色情", "谩骂引战", "欺诈", "黑产广告", "不违规"]


def test_category_parse_both_forms():
    assert Category.parse("Gambling") is Category.GAMBLING
    assert Category.parse("博彩") is Category.GAMBLING
    assert Category.parse("不违规") is Category.NON_VIOLATION
    with pytest.raises(DataValidationError):
        Category.parse("nope")


def test_sample_rejects_empty_text():
    with pytest.raises(DataValidationError):
        Sample(id="x", text="", label=Category.FRAUD)


def test_corpus_rejects_duplicate_ids():
    s = make_sample(1, Category.ABUSE)
    with pytest.raises(DataValidationError):
        Corpus("c", [s, s])


def test_ingest_three_valid_lines(tmp_path):
    path = tmp_path / "in.jsonl"
    write_jsonl(path, [
        {"text": "今晚时时彩开盘", "label": "Gambling"},
        {"text": "正常内容", "label": "不违规"},
        {"text": "高佣金兼职", "label": "Fraud"},
    ])
    result = ingest_jsonl(path)
    assert len(result.corpus) == 3
    assert not result.errors
    assert [s.label for s in result.corpus] == [
        Category.GAMBLING, Category.NON_VIOLATION, Category.FRAUD]


def test_ingest_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    result = ingest_jsonl(path)
    assert len(result.corpus) == 0
    assert result.errors == []


def test_ingest_reports_malformed_line_number(tmp_path):
    # hand-count oracle: lines 1 and 2 valid, line 3 broken
    path = tmp_path / "mixed.jsonl"
    path.write_text(
        '{"text": "a", "label": "Abuse"}\n'
        '{"text": "b", "label": "Fraud"}\n'
        '{not json}\n',
        encoding="utf-8")
    result = ingest_jsonl(path)
    assert len(result.corpus) == 2
    assert len(result.errors) == 1
    assert result.errors[0].line == 3


def test_ingest_missing_file_is_fatal(tmp_path):
    with pytest.raises(DataValidationError):
        ingest_jsonl(tmp_path / "absent.jsonl")


def test_ingest_assigns_deterministic_ids(tmp_path):
    path = tmp_path / "in.jsonl"
    write_jsonl(path, [{"text": "x", "label": "Abuse"}])
    first = ingest_jsonl(path, default_source="raw")
    second = ingest_jsonl(path, default_source="raw")
    assert first.corpus.samples[0].id == second.corpus.samples[0].id == "raw:1"


def test_roundtrip_preserves_texts_and_labels(tmp_path):
    original = make_corpus(3)
    out = tmp_path / "out.jsonl"
    export_jsonl(original, out)
    back = ingest_jsonl(out).corpus
    assert [(s.text, s.label) for s in back] == \
        [(s.text, s.label) for s in original]
    assert [s.id for s in back] == [s.id for s in original]


def _brute_force_dedup(samples):
    # oracle: per-category set scan, first occurrence kept
    seen = set()
    kept = []
    for s in samples:
        key = (s.label, s.text)
        if key not in seen:
            seen.add(key)
            kept.append(s.id)
    return kept


def test_dedup_same_category_collapses():
    a = Sample(id="1", text="同样的文本", label=Category.GAMBLING)
    b = Sample(id="2", text="同样的文本", label=Category.GAMBLING)
    deduped = deduplicate(Corpus("c", [a, b]))
    assert [s.id for s in deduped] == ["1"]


def test_dedup_cross_category_retained():
    a = Sample(id="1", text="同样的文本", label=Category.GAMBLING)
    b = Sample(id="2", text="同样的文本", label=Category.FRAUD)
    corpus = Corpus("c", [a, b])
    deduped = deduplicate(corpus)
    assert [s.id for s in deduped] == _brute_force_dedup(corpus) == ["1", "2"]


@given(st.lists(st.tuples(st.sampled_from(list(Category)),
                          st.sampled_from(["甲", "乙", "丙"])), max_size=30))
@settings(max_examples=50)
def test_dedup_idempotent_and_matches_oracle(pairs):
    samples = [Sample(id=str(i), text=t, label=c)
               for i, (c, t) in enumerate(pairs)]
    corpus = Corpus("c", samples)
    once = deduplicate(corpus)
    twice = deduplicate(once)
    assert [s.id for s in once] == [s.id for s in twice]
    assert [s.id for s in once] == _brute_force_dedup(corpus)


def test_balanced_sample_exhaustive_is_identity_up_to_order():
    corpus = make_corpus(5)
    picked = balanced_sample(corpus, 5, seed=1)
    assert sorted(s.id for s in picked) == sorted(s.id for s in corpus)


def test_balanced_sample_deterministic():
    corpus = make_corpus(10)
    a = balanced_sample(corpus, 3, seed=42)
    b = balanced_sample(corpus, 3, seed=42)
    assert [s.id for s in a] == [s.id for s in b]
    c = balanced_sample(corpus, 3, seed=43)
    assert [s.id for s in a] != [s.id for s in c]  # overwhelmingly likely


def test_balanced_sample_counts_and_no_duplicates():
    corpus = make_corpus(7)
    picked = balanced_sample(corpus, 4, seed=0)
    counts = picked.counts()
    assert all(counts[c] == 4 for c in CATEGORY_ORDER)
    ids = [s.id for s in picked]
    assert len(ids) == len(set(ids))


def test_balanced_sample_shortfall_names_category():
    samples = [make_sample(0, Category.GAMBLING),
               make_sample(1, Category.GAMBLING)]
    with pytest.raises(ShortfallError) as exc:
        balanced_sample(Corpus("c", samples), 3, seed=0)
    assert exc.value.counts == {"Gambling": 2}
    assert "Gambling" in str(exc.value)
