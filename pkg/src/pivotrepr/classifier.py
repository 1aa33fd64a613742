"""L2-regularized binary logistic regression over hybrid sparse+dense features."""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._utils import ValidationError, check_binary_labels, check_consistent_length, make_rng
from .features import SparseBinaryVector


@dataclass(frozen=True)
class HybridVector:
    sparse_part: SparseBinaryVector
    dense_part: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "dense_part",
                           np.asarray(self.dense_part, dtype=np.float64).ravel())


@dataclass
class LogRegModel:
    sparse_weights: np.ndarray
    dense_weights: np.ndarray
    bias: float = 0.0
    l2: float = 1e-4

    @property
    def coef(self):
        return np.concatenate((self.sparse_weights, self.dense_weights))

    def to_dict(self):
        return {
            "format_version": 1,
            "sparse_weights": np.asarray(self.sparse_weights).tolist(),
            "dense_weights": np.asarray(self.dense_weights).tolist(),
            "bias": float(self.bias),
            "l2": float(self.l2),
        }

    @classmethod
    def from_dict(cls, obj):
        if obj.get("format_version") != 1:
            raise ValidationError("unsupported classifier format_version")
        return cls(np.asarray(obj["sparse_weights"], dtype=np.float64),
                   np.asarray(obj["dense_weights"], dtype=np.float64),
                   float(obj["bias"]), float(obj["l2"]))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def make_hybrid(X_sparse, H=None):
    """Column-stack the sparse feature matrix with a dense representation."""
    X_sparse = sp.csr_matrix(X_sparse, dtype=np.float64)
    if H is None or np.asarray(H).shape[-1] == 0:
        return X_sparse
    H = np.asarray(H, dtype=np.float64)
    check_consistent_length(X_sparse, H)
    return sp.hstack([X_sparse, sp.csr_matrix(H)], format="csr")


def _objective(X, y, w, b, l2):
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))


def _gradient(X, y, w, b, l2):
    z = X @ w + b
    r = 1.0 / (1.0 + np.exp(-z)) - y
    n = X.shape[0]
    return np.asarray(X.T @ r).ravel() / n + l2 * w, float(r.mean())


def fit_gd(X, y, l2=1e-4, max_iters=1000, tolerance=1e-5, w0=None, history=None):
    """Full-batch gradient descent with Armijo backtracking.

    Returns ``(w, b, n_iter)``. The step size doubles after every accepted
    step and halves on rejection. ``history`` (a list) receives the
    objective after each accepted step.
    """
    n, d = X.shape
    y = y.astype(np.float64)
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=np.float64)
    b = 0.0
    step = 1.0
    f = _objective(X, y, w, b, l2)
    for it in range(max_iters):
        gw, gb = _gradient(X, y, w, b, l2)
        if max(np.abs(gw).max(initial=0.0), abs(gb)) < tolerance:
            return w, b, it
        sq = gw @ gw + gb * gb
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new = _objective(X, y, w_new, b_new, l2)
            if f_new <= f - 0.5 * step * sq or step < 1e-12:
                break
            step *= 0.5
        if f_new > f:
            # step underflowed without progress; the iterate is stationary to precision
            return w, b, it
        w, b, f = w_new, b_new, f_new
        if history is not None:
            history.append(f)
        step *= 2.0
    return w, b, max_iters


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """Binary logistic regression with an unregularized bias.

    ``X`` may be a matrix or a ``(X_sparse, H)`` pair; for pairs the dense
    block is appended after the sparse columns and its width is remembered
    in ``n_dense_`` so the model can be split back into sparse and dense
    weights.
    """

    def __init__(self, l2=1e-4, max_iters=1000, tolerance=1e-5, random_state=None):
        self.l2 = l2
        self.max_iters = max_iters
        self.tolerance = tolerance
        self.random_state = random_state

    @staticmethod
    def _stack(X):
        if isinstance(X, tuple):
            X_sparse, H = X
            H = np.zeros((X_sparse.shape[0], 0)) if H is None else np.asarray(H)
            return make_hybrid(X_sparse, H), H.shape[1]
        return sp.csr_matrix(X, dtype=np.float64), 0

    def fit(self, X, y):
        X, n_dense = self._stack(X)
        y = check_binary_labels(y)
        check_consistent_length(X, y)
        if X.shape[0] == 0:
            raise ValidationError("training data is empty")
        if np.unique(y).size < 2:
            raise ValidationError("training data must contain both classes")
        if self.l2 < 0:
            raise ValidationError("l2 must be non-negative")
        w0 = None
        if self.random_state is not None:
            w0 = make_rng(self.random_state, "logreg-init").uniform(-1e-3, 1e-3, X.shape[1])
        w, b, self.n_iter_ = fit_gd(X, y, self.l2, self.max_iters, self.tolerance, w0)
        self.coef_ = w
        self.intercept_ = b
        self.n_dense_ = n_dense
        self.classes_ = np.array([0, 1])
        return self

    @property
    def model_(self):
        check_is_fitted(self, "coef_")
        split = self.coef_.size - self.n_dense_
        return LogRegModel(self.coef_[:split].copy(), self.coef_[split:].copy(),
                           self.intercept_, self.l2)

    def objective(self, X, y):
        check_is_fitted(self, "coef_")
        X, _ = self._stack(X)
        return _objective(X, check_binary_labels(y).astype(float), self.coef_,
                          self.intercept_, self.l2)

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X, _ = self._stack(X)
        if X.shape[1] != self.coef_.size:
            raise ValidationError(
                f"X has {X.shape[1]} features, model expects {self.coef_.size}")
        return np.asarray(X @ self.coef_).ravel() + self.intercept_

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack((1 - p, p))

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


def _hybrid_matrix(vectors):
    vectors = list(vectors)
    if not vectors:
        raise ValidationError("data is empty")
    dim = vectors[0].sparse_part.dimension
    dense_dim = vectors[0].dense_part.size
    rows, cols = [], []
    for r, v in enumerate(vectors):
        if v.sparse_part.dimension != dim or v.dense_part.size != dense_dim:
            raise ValidationError("hybrid vectors have inconsistent dimensions")
        rows.extend([r] * len(v.sparse_part.active))
        cols.extend(v.sparse_part.active)
    X = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(vectors), dim))
    H = np.vstack([v.dense_part for v in vectors]) if dense_dim else None
    return X, H


def train_logreg(data, l2=1e-4, max_iters=1000, tolerance=1e-5, seed=None):
    """Fit on a sequence of ``(HybridVector, label)`` pairs."""
    data = list(data)
    X, H = _hybrid_matrix(v for v, _ in data)
    clf = LogisticRegressionGD(l2, max_iters, tolerance, seed).fit((X, H), [l for _, l in data])
    return clf.model_


def predict(model, x):
    """Probability of the positive class and the thresholded label."""
    if x.sparse_part.dimension != model.sparse_weights.size:
        raise ValidationError("sparse dimension does not match the model")
    if x.dense_part.size != model.dense_weights.size:
        raise ValidationError("dense dimension does not match the model")
    z = model.sparse_weights[list(x.sparse_part.active)].sum() \
        + model.dense_weights @ x.dense_part + model.bias
    p = float(1.0 / (1.0 + np.exp(-z)))
    return p, int(p >= 0.5)


def accuracy(model, data):
    """Fraction of ``(HybridVector, label)`` pairs predicted correctly."""
    data = list(data)
    if not data:
        raise ValidationError("data is empty")
    return sum(predict(model, v)[1] == label for v, label in data) / len(data)
