import itertools
import math

import numpy as np
import pytest

from pivotrepr._utils import ValidationError
from pivotrepr.evalharness import (ContingencyTable, ExperimentConfig, class_disagreements,
                                   mcnemar, run_setup, setup_significance,
                                   similarity_rank_diff, tune_hyperparams)
from pivotrepr.netrepr import SgdConfig

from oracles import chi2_1_upper_tail


@pytest.mark.parametrize("b, c, stat", [(15, 5, 4.05), (5, 5, 0.1)])
def test_mcnemar_values(b, c, stat):
    s, p = mcnemar(ContingencyTable(b, c))
    assert s == pytest.approx(stat, abs=1e-15)
    assert p == pytest.approx(chi2_1_upper_tail(s), abs=1e-9)


def test_mcnemar_worked_values():
    s, p = mcnemar(ContingencyTable(15, 5))
    assert s == 4.05 and p == pytest.approx(0.0441, abs=1e-3)
    s, p = mcnemar(ContingencyTable(5, 5))
    assert s == pytest.approx(0.1, abs=1e-15) and p == pytest.approx(0.7518, abs=1e-3)


def test_mcnemar_conventions():
    assert mcnemar(ContingencyTable(0, 0)) == (0.0, 1.0)
    assert mcnemar(ContingencyTable(3, 4)) == (0.0, 1.0)
    for b, c in itertools.product(range(12), repeat=2):
        s1, p1 = mcnemar(ContingencyTable(b, c))
        s2, p2 = mcnemar(ContingencyTable(c, b))
        assert s1 == s2 and p1 == p2
        assert 0 < p1 <= 1


def test_mcnemar_exact():
    _, p = mcnemar(ContingencyTable(15, 5), exact=True)
    oracle = 2 * sum(math.comb(20, i) for i in range(6)) / 2 ** 20
    assert p == pytest.approx(oracle, rel=1e-12)
    assert mcnemar(ContingencyTable(4, 4), exact=True)[1] == 1.0


def test_setup_significance():
    sig = [ContingencyTable(30, 5)] * 5
    assert setup_significance(sig, 0.05)
    assert not setup_significance(sig[:4] + [ContingencyTable(10, 5)], 0.05)
    assert not setup_significance(sig, 0.0)
    assert setup_significance([ContingencyTable(5, 3)] * 3, 1.0)
    with pytest.raises(ValidationError):
        setup_significance([])


def test_tune_hyperparams():
    g = [{"pivots": 100, "hidden_or_k": 100, "dev_acc": .80},
         {"pivots": 200, "hidden_or_k": 100, "dev_acc": .82}]
    assert tune_hyperparams(g)["pivots"] == 200
    tie = [{"pivots": 100, "hidden_or_k": 300, "dev_acc": .82},
           {"pivots": 100, "hidden_or_k": 100, "dev_acc": .82}]
    assert tune_hyperparams(tie)["hidden_or_k"] == 100
    assert tune_hyperparams(g[:1]) is g[0]
    with pytest.raises(ValidationError):
        tune_hyperparams([])


def test_class_disagreements():
    d = class_disagreements([1, 1, 0], [1, 0, 0], [0, 0, 0])
    assert d == {"a_only_positive": 1, "a_only_negative": 0,
                 "b_only_positive": 0, "b_only_negative": 0}
    assert set(class_disagreements([1, 0], [1, 1], [1, 1]).values()) == {0}
    with pytest.raises(ValidationError):
        class_disagreements([1], [1, 0], [1])


def test_class_disagreements_brute_force():
    rng = np.random.default_rng(0)
    gold, a, b = rng.integers(0, 2, (3, 200))
    expected = dict.fromkeys(("a_only_positive", "a_only_negative",
                              "b_only_positive", "b_only_negative"), 0)
    for g, pa, pb in zip(gold, a, b):
        cls = "positive" if g == 1 else "negative"
        if pa == g and pb != g:
            expected["a_only_" + cls] += 1
        elif pb == g and pa != g:
            expected["b_only_" + cls] += 1
    assert class_disagreements(gold, a, b) == expected


def rank_brute_force(reprs, i, j):
    def cos(u, v):
        return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    n = len(reprs)
    vals = {(p, q): cos(reprs[p], reprs[q]) for p in range(n) for q in range(p + 1, n)}
    target = vals[(min(i, j), max(i, j))]
    return 1 + sum(v > target + 1e-12 for v in vals.values())


def test_rank_diff_identical():
    R = np.random.default_rng(0).normal(size=(5, 3))
    assert similarity_rank_diff(R, R, (0, 3)) == 0


def test_rank_diff_three_documents():
    a = np.array([[1.0, 0.0], [0.0, 1.0], [0.9, 0.1]])   # (0,1) least similar
    b = np.array([[1.0, 0.0], [1.0, 0.01], [0.0, 1.0]])  # (0,1) most similar
    assert similarity_rank_diff(a, b, (0, 1)) == 2


def test_rank_diff_brute_force():
    rng = np.random.default_rng(8)
    A, B = rng.normal(size=(8, 4)), rng.normal(size=(8, 4))
    for i, j in itertools.combinations(range(8), 2):
        assert similarity_rank_diff(A, B, (i, j)) == \
            rank_brute_force(A, i, j) - rank_brute_force(B, i, j)


def test_rank_diff_errors():
    R = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValidationError, match="zero"):
        similarity_rank_diff(R, R, (0, 1))
    with pytest.raises(ValidationError):
        similarity_rank_diff(R[:1], R[:1], (0, 0))


def _tiny_config(method, **kw):
    return ExperimentConfig(method=method, pivot_grid=(4, 6), hidden_grid=(5,), svd_grid=(3,),
                            sclmi_pivots=6, folds=2, train_size=200, dev_size=100,
                            sgd=SgdConfig(max_epochs=3), seed=3, **kw)


def test_run_setup_no_da_and_determinism(small_synth):
    a = run_setup(*small_synth, _tiny_config("no_da"))
    b = run_setup(*small_synth, _tiny_config("no_da"))
    assert [f.test_accuracy for f in a.per_fold] == [f.test_accuracy for f in b.per_fold]
    assert all(f.hidden_or_k == 0 for f in a.per_fold)
    assert a.mean_test_accuracy == pytest.approx(
        np.mean([f.test_accuracy for f in a.per_fold]), abs=1e-12)


def test_run_setup_grid_and_threads(small_synth):
    seq = run_setup(*small_synth, _tiny_config("ae_scl"))
    par = run_setup(*small_synth, _tiny_config("ae_scl", threads=2))
    for f, g in zip(seq.per_fold, par.per_fold):
        assert len(f.grid) == 2
        assert f.pivots in (4, 6)
        assert np.array_equal(f.predictions, g.predictions)
        best = tune_hyperparams(f.grid)
        assert (best["pivots"], best["hidden_or_k"]) == (f.pivots, f.hidden_or_k)


def test_run_setup_scl_mi(small_synth):
    r = run_setup(*small_synth, _tiny_config("scl_mi"))
    assert all(f.hidden_or_k == 3 and f.pivots == 6 for f in r.per_fold)


def test_unknown_method():
    with pytest.raises(ValidationError):
        ExperimentConfig(method="msda")
