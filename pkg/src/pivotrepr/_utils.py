"""Shared helpers: seed derivation, numerics and input validation."""

import zlib

import numpy as np
import scipy.sparse as sp


class ValidationError(ValueError):
    """Raised when inputs violate an operation's contract."""


def derive_seed(seed, *tags):
    """Derive a child seed from a global seed and a sequence of purpose tags.

    Tags may be strings or integers; strings are hashed with CRC32 so the
    derivation is stable across processes and Python versions.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_rng(seed, *tags):
    return np.random.default_rng(derive_seed(seed, *tags) if tags else seed)


def sigmoid(z):
    # expit without the scipy import cost in hot loops
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_binary_labels(y, *, name="y"):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {y.shape}")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValidationError(f"{name} must contain only 0/1 values")
    return y.astype(np.int64)


def check_binary_csr(X, *, n_features=None, name="X"):
    """Return ``X`` as a CSR matrix of 0/1 float64 entries with sorted indices."""
    if isinstance(X, tuple):
        raise ValidationError(f"{name} must be a matrix, not a tuple")
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sum_duplicates()
    X.sort_indices()
    if X.nnz and not np.all(X.data == 1.0):
        raise ValidationError(f"{name} must be a binary indicator matrix")
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(
            f"{name} has {X.shape[1]} columns, expected {n_features}")
    return X


def check_consistent_length(*arrays):
    lengths = {a.shape[0] if hasattr(a, "shape") else len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValidationError(f"inconsistent numbers of samples: {sorted(lengths)}")
