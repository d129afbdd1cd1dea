"""Cross-checks between the compiled kernels and the pure fallback."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmkit import kernels
from harmkit.kernels import implementations

IMPLS = list(implementations().items())


@pytest.mark.parametrize("name,impl", IMPLS)
def test_assign_nearest_matches_brute_force(name, impl):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 5))
    c = rng.normal(size=(7, 5))
    labels, dists = impl.assign_nearest(x, c)
    for i in range(x.shape[0]):
        sq = ((c - x[i]) ** 2).sum(axis=1)
        assert labels[i] == int(np.argmin(sq))
        assert dists[i] == pytest.approx(sq.min(), rel=1e-12)


@pytest.mark.parametrize("name,impl", IMPLS)
def test_assign_nearest_tie_breaks_low_index(name, impl):
    x = np.array([[0.0, 0.0]])
    c = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])  # all distance 1
    labels, _ = impl.assign_nearest(x, c)
    assert labels[0] == 0


def test_implementations_agree_on_assignment():
    if len(IMPLS) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(11)
    x = rng.normal(size=(120, 9))
    c = rng.normal(size=(13, 9))
    results = [impl.assign_nearest(x, c) for _, impl in IMPLS]
    for labels, dists in results[1:]:
        assert (labels == results[0][0]).all()
        assert np.allclose(dists, results[0][1], rtol=1e-12)


@pytest.mark.parametrize("name,impl", IMPLS)
def test_ngram_counts_empty_string(name, impl):
    idx, cnt = impl.ngram_hash_counts("", (1, 2, 3), 1 << 18, 0)
    assert idx.size == 0 and cnt.size == 0


@pytest.mark.parametrize("name,impl", IMPLS)
def test_ngram_counts_total(name, impl):
    # "ab" with orders {1,2} yields the multiset {a, b, ab}
    idx, cnt = impl.ngram_hash_counts("ab", (1, 2), 1 << 18, 0)
    assert cnt.sum() == 3

    text = "今天天气不错"
    idx, cnt = impl.ngram_hash_counts(text, (1, 2, 3), 1 << 18, 0)
    n = len(text)
    expected = n + (n - 1) + (n - 2)  # barring hash collisions at 2^18
    assert cnt.sum() == expected


@given(st.text(max_size=40), st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=60, deadline=None)
def test_hash_identical_across_implementations(text, seed):
    if len(IMPLS) < 2:
        pytest.skip("compiled kernels not built")
    outs = [impl.ngram_hash_counts(text, (1, 2, 3), 1 << 16, seed)
            for _, impl in IMPLS]
    ref_idx, ref_cnt = outs[0]
    for idx, cnt in outs[1:]:
        assert (idx == ref_idx).all()
        assert (cnt == ref_cnt).all()


@pytest.mark.parametrize("name,impl", IMPLS)
def test_hash_seed_changes_layout(name, impl):
    a_idx, _ = impl.ngram_hash_counts("敏感词汇替换", (1, 2), 1 << 18, 0)
    b_idx, _ = impl.ngram_hash_counts("敏感词汇替换", (1, 2), 1 << 18, 1)
    assert not np.array_equal(a_idx, b_idx)


def test_dispatch_exports_callables():
    assert callable(kernels.assign_nearest)
    assert callable(kernels.ngram_hash_counts)
