"""Feature space construction, pivot selection and binary vectorization."""

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._utils import ValidationError, check_binary_labels, check_consistent_length
from .corpus import LABELED, Corpus, Document, extract_ngrams


def display(key):
    """Display form of a feature key: tokens joined by a single space."""
    return " ".join(key)


def _tokens(doc):
    return doc.tokens if isinstance(doc, Document) else tuple(doc)


@dataclass(frozen=True)
class SparseBinaryVector:
    dimension: int
    active: tuple = ()

    def __post_init__(self):
        active = tuple(int(i) for i in self.active)
        if any(b <= a for a, b in zip(active, active[1:])):
            raise ValidationError("active indices must be strictly increasing")
        if active and (active[0] < 0 or active[-1] >= self.dimension):
            raise ValidationError(
                f"active index out of range for dimension {self.dimension}")
        object.__setattr__(self, "active", active)

    def __len__(self):
        return self.dimension

    def to_array(self):
        out = np.zeros(self.dimension)
        out[list(self.active)] = 1.0
        return out

    @classmethod
    def from_csr_row(cls, X, i):
        return cls(X.shape[1], tuple(X.indices[X.indptr[i]:X.indptr[i + 1]]))


@dataclass(frozen=True, eq=False)
class FeatureSpace:
    """Retained n-gram vocabulary split into pivot and non-pivot axes.

    ``pivot_indices[k]`` is the index in ``features`` of the k-th pivot
    (pivots are ordered by descending MI); ``nonpivot_indices`` is ascending.
    """
    features: tuple
    pivot_indices: tuple
    nonpivot_indices: tuple
    counts: dict = field(repr=False)
    mi_scores: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(tuple(k) for k in self.features))
        object.__setattr__(self, "index", {k: i for i, k in enumerate(self.features)})
        if len(self.index) != len(self.features):
            raise ValidationError("duplicate features in feature space")
        piv, npv = set(self.pivot_indices), set(self.nonpivot_indices)
        if piv & npv or piv | npv != set(range(len(self.features))):
            raise ValidationError("pivot/non-pivot index sets must partition the features")
        n = len(self.features)
        pivot_pos = np.full(n, -1, dtype=np.int64)
        pivot_pos[list(self.pivot_indices)] = np.arange(len(self.pivot_indices))
        np_pos = np.full(n, -1, dtype=np.int64)
        np_pos[list(self.nonpivot_indices)] = np.arange(len(self.nonpivot_indices))
        object.__setattr__(self, "_pivot_pos", pivot_pos)
        object.__setattr__(self, "_nonpivot_pos", np_pos)

    @property
    def n_features(self):
        return len(self.features)

    @property
    def n_pivots(self):
        return len(self.pivot_indices)

    @property
    def n_nonpivots(self):
        return len(self.nonpivot_indices)

    @property
    def pivots(self):
        return [self.features[i] for i in self.pivot_indices]

    @property
    def nonpivots(self):
        return [self.features[i] for i in self.nonpivot_indices]

    def to_dict(self):
        return {
            "format_version": 1,
            "features": [list(k) for k in self.features],
            "counts": [list(self.counts.get(k, (0, 0))) for k in self.features],
            "pivot_indices": list(self.pivot_indices),
            "nonpivot_indices": list(self.nonpivot_indices),
            "mi_scores": list(self.mi_scores),
        }

    @classmethod
    def from_dict(cls, obj):
        if obj.get("format_version") != 1:
            raise ValidationError("unsupported feature space format_version")
        feats = [tuple(k) for k in obj["features"]]
        counts = {k: tuple(c) for k, c in zip(feats, obj["counts"])}
        return cls(feats, tuple(obj["pivot_indices"]), tuple(obj["nonpivot_indices"]),
                   counts, tuple(obj.get("mi_scores", ())))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=1)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def count_features(source_unlabeled, target_unlabeled):
    """Occurrence counts of every unigram/bigram in each unlabeled domain.

    Returns a dict mapping feature key to ``(source_count, target_count)``.
    """
    counters = []
    for role, corpus in (("source", source_unlabeled), ("target", target_unlabeled)):
        if isinstance(corpus, Corpus) and corpus.kind == LABELED:
            raise ValidationError(f"{role} corpus must be unlabeled")
        docs = corpus.documents if isinstance(corpus, Corpus) else list(corpus)
        if not docs:
            raise ValidationError(f"{role} unlabeled corpus is empty")
        c = Counter()
        for doc in docs:
            c.update(extract_ngrams(_tokens(doc)))
        counters.append(c)
    src, tgt = counters
    return {k: (src.get(k, 0), tgt.get(k, 0)) for k in src.keys() | tgt.keys()}


def _mi_bits(n11, n10, n01, n00):
    """Vectorized MI in bits from joint counts (feature, label)."""
    n11, n10, n01, n00 = (np.asarray(a, dtype=float) for a in (n11, n10, n01, n00))
    n = n11 + n10 + n01 + n00
    f1, f0 = n11 + n10, n01 + n00
    y1, y0 = n11 + n01, n10 + n00
    total = np.zeros(np.broadcast(n11, n).shape)
    for joint, pf, py in ((n11, f1, y1), (n10, f1, y0), (n01, f0, y1), (n00, f0, y0)):
        with np.errstate(divide="ignore", invalid="ignore"):
            term = (joint / n) * np.log2(joint * n / (pf * py))
        total += np.where(joint > 0, term, 0.0)
    return np.maximum(total, 0.0)


def mutual_information(feature_presence, labels):
    """Empirical mutual information (bits) between two binary sequences."""
    a = check_binary_labels(feature_presence, name="feature_presence")
    y = check_binary_labels(labels, name="labels")
    if a.shape != y.shape:
        raise ValidationError(f"length mismatch: {a.size} vs {y.size}")
    if a.size == 0:
        raise ValidationError("sequences must be non-empty")
    n11 = int(np.sum(a & y))
    n10 = int(np.sum(a & (1 - y)))
    n01 = int(np.sum((1 - a) & y))
    n00 = a.size - n11 - n10 - n01
    return float(_mi_bits(n11, n10, n01, n00))


def _presence_matrix(docs, keys):
    index = {k: i for i, k in enumerate(keys)}
    rows, cols = [], []
    for r, doc in enumerate(docs):
        hit = {index[k] for k in extract_ngrams(_tokens(doc)) if k in index}
        rows.extend([r] * len(hit))
        cols.extend(hit)
    data = np.ones(len(rows))
    return sp.csr_matrix((data, (rows, cols)), shape=(len(docs), len(keys)))


def select_pivots(counts, labeled_train, num_pivots, pivot_min_count=10,
                  nonpivot_min_count=10, labels=None):
    """Choose the ``num_pivots`` highest-MI features frequent in both domains.

    ``labeled_train`` holds labeled :class:`Document` objects, or token
    sequences when ``labels`` is given separately.
    """
    if num_pivots < 1:
        raise ValidationError("num_pivots must be >= 1")
    docs = list(labeled_train)
    if not docs:
        raise ValidationError("labeled training set is empty")
    if labels is None:
        labels = [d.label for d in docs]
    y = check_binary_labels(labels)
    check_consistent_length(docs, y)

    candidates = sorted(k for k, (s, t) in counts.items()
                        if s >= pivot_min_count and t >= pivot_min_count)
    if len(candidates) < num_pivots:
        raise ValidationError(
            f"requested {num_pivots} pivots but only {len(candidates)} candidates "
            f"reach count {pivot_min_count} in both domains")
    P = _presence_matrix(docs, candidates).tocsc()
    n11 = np.asarray(P.T @ y).ravel()
    df = np.asarray(P.sum(axis=0)).ravel()
    n_pos = int(y.sum())
    n10 = df - n11
    n01 = n_pos - n11
    n00 = len(y) - n11 - n10 - n01
    mi = _mi_bits(n11, n10, n01, n00)
    order = sorted(range(len(candidates)),
                   key=lambda i: (-mi[i], -sum(counts[candidates[i]]),
                                  display(candidates[i])))
    chosen = [candidates[i] for i in order[:num_pivots]]
    chosen_mi = tuple(float(mi[i]) for i in order[:num_pivots])

    retained = {k for k, (s, t) in counts.items()
                if s >= nonpivot_min_count or t >= nonpivot_min_count}
    retained.update(chosen)
    features = sorted(retained, key=lambda k: (display(k), len(k)))
    index = {k: i for i, k in enumerate(features)}
    pivot_indices = tuple(index[k] for k in chosen)
    pivot_set = set(pivot_indices)
    nonpivot_indices = tuple(i for i in range(len(features)) if i not in pivot_set)
    return FeatureSpace(features, pivot_indices, nonpivot_indices,
                        {k: tuple(counts[k]) for k in features}, chosen_mi)


def _active_full(doc, space):
    return sorted({space.index[k] for k in extract_ngrams(_tokens(doc)) if k in space.index})


def vectorize(document, space):
    """Binary pivot, non-pivot and full indicator vectors of one document."""
    full = _active_full(document, space)
    p = sorted(int(space._pivot_pos[i]) for i in full if space._pivot_pos[i] >= 0)
    n = sorted(int(space._nonpivot_pos[i]) for i in full if space._nonpivot_pos[i] >= 0)
    return (SparseBinaryVector(space.n_pivots, tuple(p)),
            SparseBinaryVector(space.n_nonpivots, tuple(n)),
            SparseBinaryVector(space.n_features, tuple(full)))


def vectorize_corpus(documents, space):
    """Vectorize many documents at once.

    Returns ``(X_p, X_np, X_full)`` as binary CSR matrices with one row per
    document.
    """
    docs = list(documents)
    indptr, indices = [0], []
    for doc in docs:
        indices.extend(_active_full(doc, space))
        indptr.append(len(indices))
    indices = np.asarray(indices, dtype=np.int64)
    X_full = sp.csr_matrix((np.ones(len(indices)), indices, np.asarray(indptr)),
                           shape=(len(docs), space.n_features))
    X_p = _project_columns(X_full, space._pivot_pos, space.n_pivots)
    X_np = _project_columns(X_full, space._nonpivot_pos, space.n_nonpivots)
    return X_p, X_np, X_full


def _project_columns(X, position, width):
    coo = X.tocoo()
    keep = position[coo.col] >= 0
    out = sp.csr_matrix((coo.data[keep], (coo.row[keep], position[coo.col[keep]])),
                        shape=(X.shape[0], width))
    out.sort_indices()
    return out


class PivotSelector(TransformerMixin, BaseEstimator):
    """Select pivot features and vectorize documents.

    ``fit`` takes labeled documents (token sequences or ``Document``) with
    their labels plus the two unlabeled corpora used for frequency counts.
    ``transform`` returns the full binary feature matrix; use
    :meth:`transform_split` for the pivot / non-pivot views.
    """

    def __init__(self, num_pivots=100, pivot_min_count=10, nonpivot_min_count=10):
        self.num_pivots = num_pivots
        self.pivot_min_count = pivot_min_count
        self.nonpivot_min_count = nonpivot_min_count

    def fit(self, X, y, source_unlabeled=None, target_unlabeled=None, counts=None):
        if counts is None:
            if source_unlabeled is None or target_unlabeled is None:
                raise ValidationError("pass counts= or both unlabeled corpora")
            counts = count_features(source_unlabeled, target_unlabeled)
        self.space_ = select_pivots(counts, X, self.num_pivots, self.pivot_min_count,
                                    self.nonpivot_min_count, labels=y)
        return self

    def transform(self, X):
        check_is_fitted(self, "space_")
        return vectorize_corpus(X, self.space_)[2]

    def transform_split(self, X):
        check_is_fitted(self, "space_")
        return vectorize_corpus(X, self.space_)
