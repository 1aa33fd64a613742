"""Non-pivot to pivot prediction network (trainable or frozen decoder).

The encoder maps a binary non-pivot vector to ``h = sigmoid(w_h @ x_np)``
and the decoder predicts pivot occurrence ``o = sigmoid(w_r @ h)``. Neither
layer has a bias. The document representation handed to downstream
classifiers is the encoder pre-activation ``w_h @ x_np``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._utils import ValidationError, check_binary_csr, make_rng, sigmoid
from .features import FeatureSpace, SparseBinaryVector

TRAINABLE = "trainable_decoder"
FROZEN = "frozen_decoder"
CLIP = 1e-7


@dataclass
class ReprModel:
    w_h: np.ndarray
    w_r: np.ndarray
    mode: str = TRAINABLE

    def __post_init__(self):
        if self.mode not in (TRAINABLE, FROZEN):
            raise ValidationError(f"unknown mode {self.mode!r}")
        self.w_h = np.asarray(self.w_h, dtype=np.float64)
        self.w_r = np.asarray(self.w_r, dtype=np.float64)
        if self.w_h.ndim != 2 or self.w_r.ndim != 2:
            raise ValidationError("weight matrices must be 2-D")
        if self.w_r.shape[1] != self.w_h.shape[0]:
            raise ValidationError(
                f"decoder has {self.w_r.shape[1]} columns but hidden_dim is "
                f"{self.w_h.shape[0]}")
        if self.mode == FROZEN:
            self.w_r.setflags(write=False)

    @property
    def hidden_dim(self):
        return self.w_h.shape[0]

    @property
    def num_pivots(self):
        return self.w_r.shape[0]

    @property
    def num_nonpivots(self):
        return self.w_h.shape[1]

    def copy(self):
        return ReprModel(self.w_h.copy(), self.w_r.copy(), self.mode)

    def to_dict(self):
        return {
            "format_version": 1,
            "mode": self.mode,
            "hidden_dim": self.hidden_dim,
            "num_pivots": self.num_pivots,
            "num_nonpivots": self.num_nonpivots,
            "w_h": self.w_h.ravel().tolist(),
            "w_r": self.w_r.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, obj):
        if obj.get("format_version") != 1:
            raise ValidationError("unsupported model format_version")
        h, p, n = obj["hidden_dim"], obj["num_pivots"], obj["num_nonpivots"]
        w_h = np.asarray(obj["w_h"], dtype=np.float64)
        w_r = np.asarray(obj["w_r"], dtype=np.float64)
        if w_h.size != h * n or w_r.size != p * h:
            raise ValidationError("weight array sizes disagree with declared shape")
        return cls(w_h.reshape(h, n), w_r.reshape(p, h), obj["mode"])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-5
    max_epochs: int = 20
    seed: int = 0
    init_scale: float = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be non-negative")
        if self.max_epochs < 0:
            raise ValidationError("max_epochs must be non-negative")


@dataclass
class TrainReport:
    epochs_run: int = 0
    stopped_early: bool = False
    train_loss_curve: list = field(default_factory=list)
    validation_loss_curve: list = field(default_factory=list)

    def to_dict(self):
        return {
            "epochs_run": self.epochs_run,
            "stopped_early": self.stopped_early,
            "train_loss_curve": list(self.train_loss_curve),
            "validation_loss_curve": list(self.validation_loss_curve),
        }


def _sizes(space):
    if isinstance(space, FeatureSpace):
        return space.n_pivots, space.n_nonpivots
    n_pivots, n_nonpivots = space
    return int(n_pivots), int(n_nonpivots)


def init_model(hidden_dim, space, mode=TRAINABLE, decoder=None, seed=0, init_scale=None):
    """Create a model with uniform random weights.

    ``space`` is a :class:`FeatureSpace` or a ``(n_pivots, n_nonpivots)``
    pair. In frozen mode the decoder is copied from ``decoder``.
    """
    n_pivots, n_nonpivots = _sizes(space)
    if hidden_dim < 1:
        raise ValidationError("hidden_dim must be >= 1")
    if init_scale is None:
        init_scale = 1.0 / math.sqrt(max(n_nonpivots, 1))
    rng = make_rng(seed, "init")
    w_h = rng.uniform(-init_scale, init_scale, size=(hidden_dim, n_nonpivots))
    if mode == FROZEN:
        if decoder is None:
            raise ValidationError("frozen_decoder mode needs a decoder matrix")
        w_r = np.array(decoder, dtype=np.float64)
        if w_r.shape != (n_pivots, hidden_dim):
            raise ValidationError(
                f"decoder shape {w_r.shape} does not match "
                f"(num_pivots={n_pivots}, hidden_dim={hidden_dim})")
    elif mode == TRAINABLE:
        w_r = rng.uniform(-init_scale, init_scale, size=(n_pivots, hidden_dim))
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return ReprModel(w_h, w_r, mode)


def _active(x, dim, name):
    if isinstance(x, SparseBinaryVector):
        if x.dimension != dim:
            raise ValidationError(f"{name} has dimension {x.dimension}, expected {dim}")
        return np.asarray(x.active, dtype=np.int64)
    idx = np.asarray(x, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= dim):
        raise ValidationError(f"{name} index out of range for dimension {dim}")
    return idx


def forward(model, x_np):
    """Hidden activations and pivot probabilities for one document."""
    idx = _active(x_np, model.num_nonpivots, "x_np")
    h = sigmoid(model.w_h[:, idx].sum(axis=1))
    o = sigmoid(model.w_r @ h)
    return h, o


def encode(model, x_np):
    """Encoder pre-activation ``w_h @ x_np`` (the representation vector)."""
    idx = _active(x_np, model.num_nonpivots, "x_np")
    return model.w_h[:, idx].sum(axis=1)


def encode_matrix(model, X_np):
    X_np = check_binary_csr(X_np, n_features=model.num_nonpivots, name="X_np")
    return np.asarray(X_np @ model.w_h.T)


def loss(o, x_p):
    """Mean binary cross-entropy (nats) between ``o`` and the pivot indicators."""
    o = np.asarray(o, dtype=np.float64)
    idx = _active(x_p, o.shape[0], "x_p")
    t = np.zeros_like(o)
    t[idx] = 1.0
    oc = np.clip(o, CLIP, 1 - CLIP)
    return float(-np.mean(t * np.log(oc) + (1 - t) * np.log(1 - oc)))


def gradients(model, x_np, x_p):
    """Analytic gradients of :func:`loss` with respect to both weight matrices.

    Returns ``(grad_w_h, grad_w_r)``; ``grad_w_r`` is ``None`` in frozen mode.
    """
    idx = _active(x_np, model.num_nonpivots, "x_np")
    pidx = _active(x_p, model.num_pivots, "x_p")
    h, o = forward(model, idx)
    t = np.zeros(model.num_pivots)
    t[pidx] = 1.0
    delta_o = (o - t) / model.num_pivots
    delta_h = (model.w_r.T @ delta_o) * h * (1 - h)
    grad_w_h = np.zeros_like(model.w_h)
    grad_w_h[:, idx] = delta_h[:, None]
    grad_w_r = None if model.mode == FROZEN else np.outer(delta_o, h)
    return grad_w_h, grad_w_r


def mean_loss(model, X_np, X_p):
    """Average per-document loss over a vectorized set."""
    H = sigmoid(np.asarray(X_np @ model.w_h.T))
    O = np.clip(sigmoid(H @ model.w_r.T), CLIP, 1 - CLIP)
    T = X_p.toarray()
    per_doc = -np.mean(T * np.log(O) + (1 - T) * np.log(1 - O), axis=1)
    return float(per_doc.mean())


def _check_pair(pair, model, name):
    X_np, X_p = pair
    X_np = check_binary_csr(X_np, n_features=model.num_nonpivots, name=f"{name} X_np")
    X_p = check_binary_csr(X_p, n_features=model.num_pivots, name=f"{name} X_p")
    if X_np.shape[0] != X_p.shape[0]:
        raise ValidationError(f"{name}: X_np and X_p row counts differ")
    if X_np.shape[0] == 0:
        raise ValidationError(f"{name} set is empty")
    return X_np, X_p


def train(model, train_docs, validation_docs, config=SgdConfig(), validation_loss=None):
    """Per-example momentum SGD with early stopping on validation loss.

    ``train_docs`` and ``validation_docs`` are ``(X_np, X_p)`` pairs of
    binary CSR matrices. Training stops at the first epoch whose validation
    loss exceeds the previous epoch's, and the weights from before that
    epoch are returned. ``validation_loss(model, X_np, X_p)`` overrides the
    default mean cross-entropy. The input model is not modified.
    """
    X_np, X_p = _check_pair(train_docs, model, "train")
    V_np, V_p = _check_pair(validation_docs, model, "validation")
    val_fn = validation_loss or mean_loss

    model = model.copy()
    frozen = model.mode == FROZEN
    w_h = model.w_h
    w_r = model.w_r if frozen else model.w_r.copy()
    v_h = np.zeros_like(w_h)
    v_r = None if frozen else np.zeros_like(w_r)
    tmp_h = np.empty_like(w_h)
    tmp_r = None if frozen else np.empty_like(w_r)

    lr, mu, wd = config.learning_rate, config.momentum, config.weight_decay
    n_piv = model.num_pivots
    rng = make_rng(config.seed, "sgd-order")
    np_ptr, np_ind = X_np.indptr, X_np.indices
    p_ptr, p_ind = X_p.indptr, X_p.indices
    target = np.zeros(n_piv)
    report = TrainReport()
    prev_val = None

    for epoch in range(config.max_epochs):
        snapshot = (w_h.copy(), None if frozen else w_r.copy())
        total = 0.0
        for i in rng.permutation(X_np.shape[0]):
            idx = np_ind[np_ptr[i]:np_ptr[i + 1]]
            pidx = p_ind[p_ptr[i]:p_ptr[i + 1]]
            h = 1.0 / (1.0 + np.exp(-w_h[:, idx].sum(axis=1)))
            o = 1.0 / (1.0 + np.exp(-(w_r @ h)))
            target[pidx] = 1.0
            oc = np.clip(o, CLIP, 1 - CLIP)
            total -= np.mean(target * np.log(oc) + (1 - target) * np.log(1 - oc))
            delta_o = (o - target) / n_piv
            target[pidx] = 0.0
            delta_h = (w_r.T @ delta_o) * h * (1 - h)

            v_h *= mu
            np.multiply(w_h, lr * wd, out=tmp_h)
            v_h -= tmp_h
            v_h[:, idx] -= lr * delta_h[:, None]
            if not frozen:
                v_r *= mu
                np.multiply(w_r, lr * wd, out=tmp_r)
                v_r -= tmp_r
                v_r -= lr * np.outer(delta_o, h)
                w_r += v_r
            w_h += v_h

        current = ReprModel(w_h, w_r, model.mode)
        val = float(val_fn(current, V_np, V_p))
        report.epochs_run = epoch + 1
        report.train_loss_curve.append(total / X_np.shape[0])
        report.validation_loss_curve.append(val)
        if prev_val is not None and val > prev_val:
            w_h = snapshot[0]
            if not frozen:
                w_r = snapshot[1]
            report.stopped_early = True
            break
        prev_val = val

    return ReprModel(w_h, w_r, model.mode), report


class PivotAutoencoder(TransformerMixin, BaseEstimator):
    """Estimator wrapper: learn a non-pivot encoder by predicting pivots.

    ``fit(X_np, X_p, validation=(V_np, V_p))`` trains the network; with
    ``mode="frozen_decoder"`` the ``decoder`` matrix (one row per pivot,
    e.g. from :func:`pivotrepr.embeddings.build_decoder`) stays fixed and
    ``hidden_dim`` must equal its column count. ``transform`` returns the
    encoder pre-activation for each row.
    """

    def __init__(self, hidden_dim=100, mode=TRAINABLE, decoder=None, learning_rate=0.1,
                 momentum=0.9, weight_decay=1e-5, max_epochs=20, init_scale=None,
                 random_state=0):
        self.hidden_dim = hidden_dim
        self.mode = mode
        self.decoder = decoder
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.init_scale = init_scale
        self.random_state = random_state

    def _config(self):
        return SgdConfig(self.learning_rate, self.momentum, self.weight_decay,
                         self.max_epochs, self.random_state, self.init_scale)

    def fit(self, X, y, validation=None):
        if validation is None:
            raise ValidationError("fit needs validation=(X_np, X_p) for early stopping")
        X = check_binary_csr(X, name="X_np")
        y = check_binary_csr(y, name="X_p")
        model = init_model(self.hidden_dim, (y.shape[1], X.shape[1]), self.mode,
                           self.decoder, self.random_state, self.init_scale)
        self.model_, self.report_ = train(model, (X, y), validation, self._config())
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return encode_matrix(self.model_, X)

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        H = sigmoid(encode_matrix(self.model_, X))
        return sigmoid(H @ self.model_.w_r.T)

