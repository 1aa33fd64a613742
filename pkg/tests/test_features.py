import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pivotrepr._utils import ValidationError
from pivotrepr.corpus import Document
from pivotrepr.features import (FeatureSpace, PivotSelector, SparseBinaryVector,
                                count_features, display, mutual_information,
                                select_pivots, vectorize, vectorize_corpus)

from conftest import make_corpus


def mi_brute_force(a, y):
    n = len(a)
    total = 0.0
    for av in (0, 1):
        for yv in (0, 1):
            joint = sum(1 for i in range(n) if a[i] == av and y[i] == yv) / n
            pa = sum(1 for v in a if v == av) / n
            py = sum(1 for v in y if v == yv) / n
            if joint > 0:
                total += joint * math.log2(joint / (pa * py))
    return total


def test_count_features():
    counts = count_features(make_corpus(["good book", "good"]), make_corpus(["good"]))
    assert counts[("good",)] == (2, 1)
    assert counts[("good", "book")] == (1, 0)
    assert counts[("book",)] == (1, 0)


def test_count_features_occurrences_not_documents():
    counts = count_features(make_corpus(["good good"]), make_corpus(["x"]))
    assert counts[("good",)] == (2, 0)


def test_count_features_errors():
    with pytest.raises(ValidationError, match="empty"):
        count_features(make_corpus(["a"]), make_corpus([]))
    with pytest.raises(ValidationError, match="unlabeled"):
        count_features(make_corpus(["a"], [1]), make_corpus(["a"]))


@pytest.mark.parametrize("presence, labels, expected", [
    ([1, 1, 0, 0], [1, 1, 0, 0], 1.0),
    ([1, 0, 1, 0], [1, 1, 0, 0], 0.0),
    ([1, 1, 1, 0], [1, 1, 0, 0], 0.31127812445913283),
])
def test_mutual_information_values(presence, labels, expected):
    assert mutual_information(presence, labels) == pytest.approx(expected, abs=1e-12)
    assert round(mutual_information(presence, labels), 4) == round(expected, 4)


def test_mutual_information_errors():
    with pytest.raises(ValidationError, match="length mismatch"):
        mutual_information([1, 0], [1])


binary_pairs = st.integers(1, 20).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 1), min_size=n, max_size=n),
                        st.lists(st.integers(0, 1), min_size=n, max_size=n)))


@settings(max_examples=300)
@given(binary_pairs)
def test_mutual_information_matches_oracle_and_symmetric(pair):
    a, y = pair
    mi = mutual_information(a, y)
    assert mi == pytest.approx(mi_brute_force(a, y), abs=1e-12)
    assert mi == pytest.approx(mutual_information(y, a), abs=1e-12)
    assert mi >= 0


def _toy():
    pos = ["great w1 w2", "great w2 w3"] * 5
    neg = ["w1 awful w3", "w3 w1 w2"] * 5
    labeled = [Document(str(i), t.split(), 1 if i < 10 else 0)
               for i, t in enumerate(pos + neg)]
    unl = make_corpus(pos + neg)
    return labeled, count_features(unl, unl)


def test_select_single_perfect_pivot():
    labeled, counts = _toy()
    assert counts[("great",)] == (10, 10)
    space = select_pivots(counts, labeled, 1)
    assert space.pivots == [("great",)]


def test_select_pivots_too_few_candidates():
    labeled, counts = _toy()
    with pytest.raises(ValidationError, match="only .* candidates"):
        select_pivots(counts, labeled, 10_000)


def test_partition_and_thresholds():
    labeled, counts = _toy()
    space = select_pivots(counts, labeled, 2, pivot_min_count=10, nonpivot_min_count=10)
    retained = {k for k, (s, t) in counts.items() if max(s, t) >= 10}
    assert set(space.features) == retained
    assert set(space.pivot_indices) | set(space.nonpivot_indices) == set(range(space.n_features))
    assert not set(space.pivot_indices) & set(space.nonpivot_indices)
    assert list(space.mi_scores) == sorted(space.mi_scores, reverse=True)


def test_pivot_ranking_matches_exhaustive_oracle(small_synth):
    source_labeled, su, tu, _ = small_synth
    counts = count_features(su, tu)
    docs = list(source_labeled.documents)
    y = [d.label for d in docs]
    cands = [k for k, (s, t) in counts.items() if s >= 10 and t >= 10]
    scored = []
    for key in cands:
        grams = [set(d.tokens) if len(key) == 1 else set(zip(d.tokens, d.tokens[1:]))
                 for d in docs]
        target = key[0] if len(key) == 1 else key
        presence = [int(target in g) for g in grams]
        scored.append((-mi_brute_force(presence, y), -sum(counts[key]), display(key), key))
    scored.sort()
    k = 15
    space = select_pivots(counts, docs, k)
    assert space.pivots == [s[3] for s in scored[:k]]
    np.testing.assert_allclose(space.mi_scores, [-s[0] for s in scored[:k]], atol=1e-12)


def test_selection_invariant_to_document_order(small_synth):
    source_labeled, su, tu, _ = small_synth
    counts = count_features(su, tu)
    docs = list(source_labeled.documents)
    a = select_pivots(counts, docs, 12)
    b = select_pivots(counts, docs[::-1], 12)
    c2 = count_features(make_corpus([" ".join(d.tokens) for d in su.documents[::-1]]), tu)
    assert c2 == counts
    assert a.pivots == b.pivots and a.features == b.features


def test_vectorize_binary_and_partition():
    labeled, counts = _toy()
    space = select_pivots(counts, labeled, 1)
    doc = Document("q", ["great", "great", "w1", "unseen"])
    xp, xnp, xfull = vectorize(doc, space)
    assert xp.active == (0,)
    assert xnp.dimension == space.n_nonpivots
    assert len(xfull.active) == len(xp.active) + len(xnp.active)
    assert all(i < space.n_features for i in xfull.active)


def test_vectorize_empty_and_all_pivots():
    labeled, counts = _toy()
    space = select_pivots(counts, labeled, 1)
    empty = vectorize(Document("e", ["zzz"]), space)
    assert all(v.active == () for v in empty)
    xp, xnp, _ = vectorize(Document("p", ["great"]), space)
    assert xp.active == tuple(range(space.n_pivots)) and xnp.active == ()


def test_vectorize_corpus_matches_single(small_synth):
    sl, su, tu, _ = small_synth
    space = select_pivots(count_features(su, tu), sl.documents, 8)
    docs = sl.documents[:30]
    mats = vectorize_corpus(docs, space)
    for r, doc in enumerate(docs):
        for vec, M in zip(vectorize(doc, space), mats):
            assert vec == SparseBinaryVector.from_csr_row(M, r)


def test_space_json_roundtrip(tmp_path, small_synth):
    sl, su, tu, _ = small_synth
    space = select_pivots(count_features(su, tu), sl.documents, 8)
    path = tmp_path / "space.json"
    space.save(path)
    back = FeatureSpace.load(path)
    assert back.features == space.features
    assert back.pivot_indices == space.pivot_indices
    assert back.nonpivot_indices == space.nonpivot_indices
    assert back.mi_scores == space.mi_scores
    assert back.counts == space.counts


def test_sparse_vector_invariants():
    with pytest.raises(ValidationError):
        SparseBinaryVector(3, (2, 1))
    with pytest.raises(ValidationError):
        SparseBinaryVector(3, (3,))
    assert SparseBinaryVector(3, (0, 2)).to_array().tolist() == [1, 0, 1]


def test_pivot_selector_estimator(small_synth):
    sl, su, tu, _ = small_synth
    sel = PivotSelector(num_pivots=6).fit([d.tokens for d in sl.documents], sl.labels,
                                          source_unlabeled=su, target_unlabeled=tu)
    assert sel.get_params()["num_pivots"] == 6
    X = sel.transform([d.tokens for d in sl.documents[:5]])
    assert X.shape == (5, sel.space_.n_features)
    Xp, Xnp, _ = sel.transform_split(sl.documents[:5])
    assert Xp.shape[1] == 6
