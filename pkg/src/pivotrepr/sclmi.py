"""Structural correspondence learning baseline with MI-selected pivots."""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._utils import ValidationError, check_binary_csr, make_rng
from .features import SparseBinaryVector


@dataclass(frozen=True, eq=False)
class Projection:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))
        if self.theta.ndim != 2:
            raise ValidationError("theta must be a 2-D matrix")

    @property
    def k(self):
        return self.theta.shape[0]

    def to_dict(self):
        return {"format_version": 1, "k": self.k, "num_nonpivots": self.theta.shape[1],
                "theta": self.theta.ravel().tolist()}

    @classmethod
    def from_dict(cls, obj):
        if obj.get("format_version") != 1:
            raise ValidationError("unsupported projection format_version")
        theta = np.asarray(obj["theta"], dtype=np.float64)
        k = obj["k"]
        if k == 0 or theta.size % k:
            raise ValidationError("theta size is not a multiple of k")
        return cls(theta.reshape(k, -1))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_pivot_predictors(X_np, X_p, l2=1e-4, epochs=3, seed=0, learning_rate=0.1,
                           init_scale=0.01):
    """One bias-free logistic predictor per pivot, trained by per-example SGD.

    All predictors see the same seeded example order, so they are updated
    together as the columns of one ``num_nonpivots x num_pivots`` matrix.
    Weight decay is applied through a running scale factor so each step only
    touches the rows of active inputs.
    """
    X_np = check_binary_csr(X_np, name="X_np")
    X_p = check_binary_csr(X_p, name="X_p")
    n, d = X_np.shape
    if n == 0:
        raise ValidationError("pivot predictor training data is empty")
    if X_p.shape[0] != n:
        raise ValidationError("X_np and X_p row counts differ")
    n_piv = X_p.shape[1]
    rng = make_rng(seed, "pivot-predictors")
    V = rng.uniform(-init_scale, init_scale, size=(d, n_piv))
    scale = 1.0
    shrink = 1.0 - learning_rate * l2
    if shrink <= 0:
        raise ValidationError("learning_rate * l2 must be < 1")
    target = np.zeros(n_piv)
    for _ in range(epochs):
        for i in rng.permutation(n):
            idx = X_np.indices[X_np.indptr[i]:X_np.indptr[i + 1]]
            pidx = X_p.indices[X_p.indptr[i]:X_p.indptr[i + 1]]
            z = scale * V[idx].sum(axis=0)
            target[pidx] = 1.0
            g = 1.0 / (1.0 + np.exp(-z)) - target
            target[pidx] = 0.0
            scale *= shrink
            V[idx] -= (learning_rate / scale) * g
            if scale < 1e-6:
                V *= scale
                scale = 1.0
    return V * scale


def _sign_fix(U, Vt=None):
    # largest-magnitude entry of each left vector made positive
    signs = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if Vt is not None:
        Vt = Vt * signs[:, None]
    return U, Vt


def truncated_svd(M, k, seed=0, oversample=10, n_iter=7):
    """Top-``k`` left singular vectors and singular values of ``M``.

    Uses randomized subspace iteration when ``k + oversample`` is smaller
    than the short side of ``M``, and a dense SVD otherwise.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValidationError("M must be a 2-D matrix")
    m, n = M.shape
    if not 1 <= k <= min(m, n):
        raise ValidationError(f"k={k} must lie in [1, {min(m, n)}]")
    ell = k + oversample
    if ell >= min(m, n):
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        return _sign_fix(U[:, :k])[0], s[:k]
    rng = make_rng(seed, "rsvd")
    Q, _ = np.linalg.qr(M @ rng.standard_normal((n, ell)))
    for _ in range(n_iter):
        Z, _ = np.linalg.qr(M.T @ Q)
        Q, _ = np.linalg.qr(M @ Z)
    Ub, s, _ = np.linalg.svd(Q.T @ M, full_matrices=False)
    U = Q @ Ub[:, :k]
    return _sign_fix(U)[0], s[:k]


def make_projection(W, k, seed=0):
    U, _ = truncated_svd(W, k, seed)
    return Projection(U.T.copy())


def project(proj, x_np):
    """``theta @ x_np`` for one binary non-pivot vector."""
    if isinstance(x_np, SparseBinaryVector):
        if x_np.dimension != proj.theta.shape[1]:
            raise ValidationError(
                f"x_np has dimension {x_np.dimension}, projection expects "
                f"{proj.theta.shape[1]}")
        idx = list(x_np.active)
    else:
        idx = list(x_np)
    return proj.theta[:, idx].sum(axis=1)


class SCLProjector(TransformerMixin, BaseEstimator):
    """Fit pivot predictors on ``(X_np, X_p)`` and project onto their top-k subspace."""

    def __init__(self, n_components=50, l2=1e-4, epochs=3, learning_rate=0.1,
                 random_state=0):
        self.n_components = n_components
        self.l2 = l2
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        self.pivot_weights_ = train_pivot_predictors(
            X, y, self.l2, self.epochs, self.random_state, self.learning_rate)
        self.projection_ = make_projection(self.pivot_weights_, self.n_components,
                                           self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        X = check_binary_csr(X, n_features=self.projection_.theta.shape[1], name="X_np")
        return np.asarray(X @ self.projection_.theta.T)
