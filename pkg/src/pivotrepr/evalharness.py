"""Source-to-target experiment orchestration and result analysis."""

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import netrepr
from ._utils import ValidationError, check_binary_labels, derive_seed
from .classifier import LogisticRegressionGD
from .corpus import LABELED, make_folds, split_unlabeled_holdout
from .embeddings import SgnsConfig, build_decoder, rewrite_bigrams, train_sgns
from .features import count_features, select_pivots, vectorize_corpus
from .sclmi import train_pivot_predictors, truncated_svd

METHODS = ("no_da", "ae_scl", "ae_scl_sr", "scl_mi")
TSV_COLUMNS = ("source", "target", "method", "fold", "pivots", "hidden_or_k",
               "dev_acc", "test_acc")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "ae_scl"
    pivot_grid: tuple = (100, 200, 300, 400, 500)
    hidden_grid: tuple = (100, 300, 500)
    svd_grid: tuple = (50, 100, 150)
    sclmi_pivots: int = 1000
    sgd: netrepr.SgdConfig = netrepr.SgdConfig()
    sgns: SgnsConfig = SgnsConfig()
    embeddings: object = None
    folds: int = 5
    train_size: int = 1600
    dev_size: int = 400
    unlabeled_ratio: float = 0.2
    pivot_min_count: int = 10
    nonpivot_min_count: int = 10
    clf_l2: float = 1e-4
    clf_max_iters: int = 1000
    clf_tolerance: float = 1e-5
    sclmi_l2: float = 1e-4
    sclmi_epochs: int = 3
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; choose from {METHODS}")
        for name in ("pivot_grid", "hidden_grid", "svd_grid"):
            grid = tuple(int(v) for v in getattr(self, name))
            if not grid or min(grid) < 1:
                raise ValidationError(f"{name} must be a non-empty list of positive counts")
            object.__setattr__(self, name, grid)


@dataclass
class FoldResult:
    fold: int
    pivots: int
    hidden_or_k: int
    dev_accuracy: float
    test_accuracy: float
    predictions: np.ndarray
    grid: list = field(default_factory=list)


@dataclass
class SetupResult:
    source: str
    target: str
    method: str
    per_fold: list
    gold: np.ndarray

    @property
    def mean_test_accuracy(self):
        return math.fsum(f.test_accuracy for f in self.per_fold) / len(self.per_fold)


@dataclass(frozen=True)
class ContingencyTable:
    b: int
    c: int

    def __post_init__(self):
        if self.b < 0 or self.c < 0:
            raise ValidationError("contingency counts must be non-negative")

    @classmethod
    def from_predictions(cls, gold, preds_a, preds_b):
        gold, a, b = (np.asarray(v) for v in (gold, preds_a, preds_b))
        return cls(int(np.sum((a == gold) & (b != gold))),
                   int(np.sum((a != gold) & (b == gold))))


def tune_hyperparams(entries):
    """Pick the entry with the best dev accuracy.

    Entries are mappings with ``dev_acc``, ``pivots`` and ``hidden_or_k``;
    ties go to fewer pivots, then the smaller hidden/SVD dimension.
    """
    entries = list(entries)
    if not entries:
        raise ValidationError("hyperparameter grid is empty")
    return min(entries, key=lambda e: (-e["dev_acc"], e["pivots"], e["hidden_or_k"]))


def mcnemar(table, exact=False):
    """Continuity-corrected McNemar test; returns ``(statistic, p_value)``.

    With ``exact=True`` the p-value comes from the two-sided binomial test
    on the discordant pairs instead of the chi-square approximation.
    """
    b, c = table.b, table.c
    n = b + c
    if n == 0:
        return 0.0, 1.0
    # |b - c| == 1 gives 0; b == c keeps the formula's 1 / n
    stat = (abs(b - c) - 1) ** 2 / n
    if exact:
        tail = math.fsum(math.comb(n, i) for i in range(min(b, c) + 1)) / 2.0 ** n
        return stat, min(1.0, 2.0 * tail)
    # chi-square(1) upper tail
    return stat, math.erfc(math.sqrt(stat / 2.0))


def setup_significance(tables, alpha=0.05, exact=False):
    """True iff the McNemar test is significant at ``alpha`` in every fold."""
    tables = list(tables)
    if not tables:
        raise ValidationError("no fold tables given")
    return all(mcnemar(t, exact)[1] < alpha for t in tables)


def class_disagreements(gold, preds_a, preds_b):
    """Per-class counts of examples where exactly one model is correct."""
    gold = check_binary_labels(gold, name="gold")
    a = check_binary_labels(preds_a, name="preds_a")
    b = check_binary_labels(preds_b, name="preds_b")
    if not gold.size == a.size == b.size:
        raise ValidationError("gold and prediction lengths differ")
    a_only = (a == gold) & (b != gold)
    b_only = (b == gold) & (a != gold)
    return {
        "a_only_positive": int(np.sum(a_only & (gold == 1))),
        "a_only_negative": int(np.sum(a_only & (gold == 0))),
        "b_only_positive": int(np.sum(b_only & (gold == 1))),
        "b_only_negative": int(np.sum(b_only & (gold == 0))),
    }


def _pair_rank(reprs, i, j):
    R = np.asarray(reprs, dtype=np.float64)
    norms = np.linalg.norm(R, axis=1)
    if norms[i] == 0 or norms[j] == 0:
        raise ValidationError(f"zero representation vector in pair ({i}, {j})")
    unit = R / np.where(norms == 0, 1.0, norms)[:, None]
    cos = unit @ unit.T
    iu = np.triu_indices(R.shape[0], k=1)
    i, j = min(i, j), max(i, j)
    return 1 + int(np.sum(cos[iu] > cos[i, j]))


def similarity_rank_diff(reprs_a, reprs_b, doc_pair):
    """Rank of the pair's cosine under model A minus its rank under model B.

    Rank 1 is the most similar of all document pairs; ties share the better
    rank.
    """
    i, j = doc_pair
    n = len(reprs_a)
    if n < 2 or len(reprs_b) != n:
        raise ValidationError("need at least two documents with matching counts")
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"invalid document pair {doc_pair}")
    return _pair_rank(reprs_a, i, j) - _pair_rank(reprs_b, i, j)


class _SetupData:
    """Inputs shared by every fold of one setup."""

    def __init__(self, source_labeled, source_unlabeled, target_unlabeled, target_test, cfg):
        if target_test.kind != LABELED or source_labeled.kind != LABELED:
            raise ValidationError("source training and target test corpora must be labeled")
        self.source_labeled = source_labeled
        self.counts = count_features(source_unlabeled, target_unlabeled)
        split = split_unlabeled_holdout(source_unlabeled, target_unlabeled,
                                        cfg.unlabeled_ratio, derive_seed(cfg.seed, "unlabeled"))
        self.unl_train = split.select(source_unlabeled, target_unlabeled, "train")
        self.unl_val = split.select(source_unlabeled, target_unlabeled, "validation")
        self.unl_all = list(source_unlabeled.documents) + list(target_unlabeled.documents)
        self.test_docs = list(target_test.documents)
        self.gold = np.array(target_test.labels, dtype=np.int64)
        self.folds = make_folds(source_labeled, cfg.folds, cfg.train_size, cfg.dev_size,
                                derive_seed(cfg.seed, "folds"))
        self.embeddings = {}

    def embedding_table(self, cfg, dim):
        if cfg.embeddings is not None:
            if cfg.embeddings.dimension != dim:
                raise ValidationError(
                    f"embedding dimension {cfg.embeddings.dimension} != hidden size {dim}")
            return cfg.embeddings
        if dim not in self.embeddings:
            # every bigram that could become a pivot gets a fused token
            bigrams = {k for k, (s, t) in self.counts.items() if len(k) == 2
                       and s >= cfg.pivot_min_count and t >= cfg.pivot_min_count}
            text = [rewrite_bigrams(d.tokens, bigrams) for d in self.unl_all]
            sgns = replace(cfg.sgns, dimension=dim,
                           seed=derive_seed(cfg.seed, "sgns", dim))
            self.embeddings[dim] = train_sgns(text, sgns)
        return self.embeddings[dim]


def _representations(method, cfg, data, space, mats, dims, seed):
    """Yield ``(dim, H_train, H_dev, H_test)`` for every grid dimension."""
    X = mats
    if method == "no_da":
        empty = {k: np.zeros((X[k][1].shape[0], 0)) for k in ("train", "dev", "test")}
        yield 0, empty["train"], empty["dev"], empty["test"]
        return
    if method == "scl_mi":
        W = train_pivot_predictors(X["unl_train"][1], X["unl_train"][0], cfg.sclmi_l2,
                                   cfg.sclmi_epochs, derive_seed(seed, "sclmi"))
        kmax = max(dims)
        U, _ = truncated_svd(W, min(kmax, min(W.shape)), derive_seed(seed, "svd"))
        for k in dims:
            if k > U.shape[1]:
                raise ValidationError(f"SVD dimension {k} exceeds rank bound {U.shape[1]}")
            theta = U[:, :k].T
            yield k, *(np.asarray(X[s][1] @ theta.T) for s in ("train", "dev", "test"))
        return
    for dim in dims:
        if method == "ae_scl_sr":
            decoder = build_decoder(data.embedding_table(cfg, dim), space)
            model = netrepr.init_model(dim, space, netrepr.FROZEN, decoder,
                                       derive_seed(seed, "init", dim), cfg.sgd.init_scale)
        else:
            model = netrepr.init_model(dim, space, netrepr.TRAINABLE, None,
                                       derive_seed(seed, "init", dim), cfg.sgd.init_scale)
        sgd = replace(cfg.sgd, seed=derive_seed(seed, "sgd", dim))
        model, _ = netrepr.train(model, (X["unl_train"][1], X["unl_train"][0]),
                                 (X["unl_val"][1], X["unl_val"][0]), sgd)
        yield dim, *(netrepr.encode_matrix(model, X[s][1]) for s in ("train", "dev", "test"))


def _run_fold(fold, method, cfg, data):
    train_docs = [d for d in data.source_labeled.documents if d.id in fold.train_ids]
    dev_docs = [d for d in data.source_labeled.documents if d.id in fold.dev_ids]
    y_train = np.array([d.label for d in train_docs])
    y_dev = np.array([d.label for d in dev_docs])
    if method == "no_da":
        pivot_grid, dims = cfg.pivot_grid[:1], (0,)
    elif method == "scl_mi":
        pivot_grid, dims = (cfg.sclmi_pivots,), cfg.svd_grid
    else:
        pivot_grid, dims = cfg.pivot_grid, cfg.hidden_grid

    grid = []
    for n_piv in sorted(pivot_grid):
        space = select_pivots(data.counts, train_docs, n_piv, cfg.pivot_min_count,
                              cfg.nonpivot_min_count)
        mats = {
            "train": vectorize_corpus(train_docs, space),
            "dev": vectorize_corpus(dev_docs, space),
            "test": vectorize_corpus(data.test_docs, space),
        }
        if method != "no_da":
            mats["unl_train"] = vectorize_corpus(data.unl_train, space)
            mats["unl_val"] = vectorize_corpus(data.unl_val, space)
        seed = derive_seed(cfg.seed, method, fold.fold_index, n_piv)
        for dim, H_tr, H_dev, H_te in _representations(method, cfg, data, space, mats,
                                                       sorted(dims), seed):
            clf = LogisticRegressionGD(cfg.clf_l2, cfg.clf_max_iters, cfg.clf_tolerance)
            clf.fit((mats["train"][2], H_tr), y_train)
            dev_acc = float(np.mean(clf.predict((mats["dev"][2], H_dev)) == y_dev))
            preds = clf.predict((mats["test"][2], H_te))
            grid.append({"pivots": n_piv, "hidden_or_k": dim, "dev_acc": dev_acc,
                         "test_acc": float(np.mean(preds == data.gold)),
                         "predictions": preds})
    best = tune_hyperparams(grid)
    return FoldResult(fold.fold_index, best["pivots"], best["hidden_or_k"], best["dev_acc"],
                      best["test_acc"], best["predictions"],
                      [{k: v for k, v in g.items() if k != "predictions"} for g in grid])


def run_setup(source_labeled, source_unlabeled, target_unlabeled, target_test,
              config=ExperimentConfig(), _data=None):
    """Run the full per-fold protocol for one source/target pair and method."""
    data = _data or _SetupData(source_labeled, source_unlabeled, target_unlabeled,
                               target_test, config)
    folds = data.folds
    if config.method == "ae_scl_sr":
        for dim in config.hidden_grid:
            data.embedding_table(config, dim)
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            per_fold = list(pool.map(
                lambda f: _run_fold(f, config.method, config, data), folds))
    else:
        per_fold = [_run_fold(f, config.method, config, data) for f in folds]
    return SetupResult(source_labeled.domain_name, target_test.domain_name, config.method,
                       per_fold, data.gold)


def run_methods(source_labeled, source_unlabeled, target_unlabeled, target_test, config,
                methods):
    """Run several methods on one setup, sharing splits, counts and embeddings."""
    data = _SetupData(source_labeled, source_unlabeled, target_unlabeled, target_test, config)
    return [run_setup(source_labeled, source_unlabeled, target_unlabeled, target_test,
                      replace(config, method=m), _data=data) for m in methods]


def compare(result_a, result_b, alpha=0.05, exact=False):
    """Per-fold McNemar statistics and the all-folds significance flag."""
    if len(result_a.per_fold) != len(result_b.per_fold):
        raise ValidationError("results have different fold counts")
    tables, folds = [], []
    for fa, fb in zip(result_a.per_fold, result_b.per_fold):
        t = ContingencyTable.from_predictions(result_a.gold, fa.predictions, fb.predictions)
        stat, p = mcnemar(t, exact)
        tables.append(t)
        folds.append({"fold": fa.fold, "b": t.b, "c": t.c, "statistic": stat, "p_value": p})
    last = len(result_a.per_fold) - 1
    return {
        "a": result_a.method,
        "b": result_b.method,
        "significant": setup_significance(tables, alpha, exact),
        "alpha": alpha,
        "folds": folds,
        "class_disagreements_last_fold": class_disagreements(
            result_a.gold, result_a.per_fold[last].predictions,
            result_b.per_fold[last].predictions),
    }


def write_results(results, out_dir, alpha=0.05, exact=False, baseline="no_da"):
    """Write ``results.tsv`` and ``summary.json`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    tsv = os.path.join(out_dir, "results.tsv")
    with open(tsv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(TSV_COLUMNS)
        for r in results:
            for f in r.per_fold:
                writer.writerow((r.source, r.target, r.method, f.fold, f.pivots,
                                 f.hidden_or_k, repr(f.dev_accuracy), repr(f.test_accuracy)))
    base = next((r for r in results if r.method == baseline), None)
    summary = {"format_version": 1, "methods": []}
    for r in results:
        entry = {
            "source": r.source,
            "target": r.target,
            "method": r.method,
            "mean_test_accuracy": r.mean_test_accuracy,
            "folds": [{"fold": f.fold, "pivots": f.pivots, "hidden_or_k": f.hidden_or_k,
                       "dev_acc": f.dev_accuracy, "test_acc": f.test_accuracy,
                       "grid": f.grid} for f in r.per_fold],
        }
        if base is not None and r is not base:
            entry["vs_" + baseline] = compare(r, base, alpha, exact)
        summary["methods"].append(entry)
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return tsv, path
