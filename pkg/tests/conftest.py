import json

import numpy as np
import pytest

from pivotrepr.corpus import LABELED, UNLABELED, Corpus, Document
from pivotrepr.synthgen import GeneratorConfig, generate


def make_corpus(texts, labels=None, name="d"):
    kind = UNLABELED if labels is None else LABELED
    docs = [Document(str(i), t.split(), None if labels is None else labels[i])
            for i, t in enumerate(texts)]
    return Corpus(name, docs, kind)


@pytest.fixture(scope="session")
def small_synth():
    cfg = GeneratorConfig(n_source_labeled=400, n_source_unlabeled=400,
                          n_target_unlabeled=400, n_target_test=200, seed=11)
    return generate(cfg)


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name, records):
        path = tmp_path / name
        path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def numeric_gradient(f, W, step=1e-5):
    """Central finite differences of scalar ``f()`` with respect to array ``W``."""
    grad = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        old = W[idx]
        W[idx] = old + step
        plus = f()
        W[idx] = old - step
        minus = f()
        W[idx] = old
        grad[idx] = (plus - minus) / (2 * step)
    return grad


def max_relative_error(analytic, numeric, floor=1e-10):
    """Elementwise |a - n| / max(|a|, |n|); entries where both are below ``floor`` count as 0."""
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.abs(analytic - numeric) / np.maximum(scale, floor)
    rel[scale < floor] = 0.0
    return float(rel.max(initial=0.0))


def random_gradcheck_instances(n, seed):
    from pivotrepr.netrepr import ReprModel, TRAINABLE
    rng = np.random.default_rng(seed)
    for _ in range(n):
        h, p, q = rng.integers(1, 9), rng.integers(1, 21), rng.integers(1, 21)
        model = ReprModel(rng.normal(size=(h, q)), rng.normal(size=(p, h)), TRAINABLE)
        x_np = np.flatnonzero(rng.random(q) < 0.4)
        x_p = np.flatnonzero(rng.random(p) < 0.3)
        yield model, x_np, x_p


def gradcheck_worst(n=100, seed=0):
    from pivotrepr.netrepr import forward, gradients, loss
    worst = 0.0
    for model, x_np, x_p in random_gradcheck_instances(n, seed):
        g_h, g_r = gradients(model, x_np, x_p)
        f = lambda: loss(forward(model, x_np)[1], x_p)
        worst = max(worst,
                    max_relative_error(g_h, numeric_gradient(f, model.w_h)),
                    max_relative_error(g_r, numeric_gradient(f, model.w_r)))
    return worst
