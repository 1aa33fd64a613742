"""Pivot embeddings: bigram rewriting, a small SGNS trainer and file I/O."""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ._utils import ValidationError, make_rng
from .features import FeatureSpace


def fused(bigram):
    """Token standing for a bigram pivot, e.g. ``("very", "good") -> "very-good"``."""
    return "-".join(bigram)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    dimension: int
    vectors: dict

    def __post_init__(self):
        for tok, vec in self.vectors.items():
            if len(vec) != self.dimension:
                raise ValidationError(
                    f"vector for {tok!r} has length {len(vec)}, expected {self.dimension}")

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, token):
        return token in self.vectors

    def __getitem__(self, token):
        return self.vectors[token]

    def save(self, path):
        """Write the word2vec-compatible text format."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vectors)} {self.dimension}\n")
            for tok, vec in self.vectors.items():
                fh.write(tok + " " + " ".join(repr(float(v)) for v in vec) + "\n")


@dataclass(frozen=True)
class SgnsConfig:
    dimension: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        for name in ("dimension", "window", "negatives", "epochs", "min_count"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")


def rewrite_bigrams(tokens, bigram_pivots):
    """Insert a fused ``w1-w2`` token between every adjacent pivot bigram."""
    tokens = list(tokens)
    out = []
    for i, tok in enumerate(tokens):
        out.append(tok)
        if i + 1 < len(tokens) and (tok, tokens[i + 1]) in bigram_pivots:
            out.append(fused((tok, tokens[i + 1])))
    return out


def negative_sampling_objective(w_in, w_out, pairs, negatives):
    """Mean SGNS loss over fixed ``(center, context)`` index pairs.

    ``negatives`` has one row of noise indices per pair.
    """
    pairs = np.asarray(pairs)
    u = w_in[pairs[:, 0]]
    pos = np.einsum("ij,ij->i", u, w_out[pairs[:, 1]])
    neg = np.einsum("ij,ikj->ik", u, w_out[np.asarray(negatives)])
    return float(np.mean(np.logaddexp(0, -pos) + np.logaddexp(0, neg).sum(axis=1)))


class _Vocab:
    def __init__(self, corpus, min_count):
        counts = Counter(tok for sent in corpus for tok in sent)
        kept = sorted((t for t, c in counts.items() if c >= min_count),
                      key=lambda t: (-counts[t], t))
        if not kept:
            raise ValidationError(f"no token reaches min_count={min_count}")
        self.tokens = kept
        self.index = {t: i for i, t in enumerate(kept)}
        self.counts = np.array([counts[t] for t in kept], dtype=float)
        noise = self.counts ** 0.75
        self.noise_cdf = np.cumsum(noise / noise.sum())
        self.noise_cdf[-1] = 1.0

    def encode(self, corpus):
        return [np.array([self.index[t] for t in sent if t in self.index], dtype=np.int64)
                for sent in corpus]

    def sample_noise(self, rng, shape):
        return np.searchsorted(self.noise_cdf, rng.random(shape), side="right")


def train_sgns(corpus, config=SgnsConfig(), callback=None):
    """Skip-gram with negative sampling; returns the input-side vectors.

    Each center word is updated jointly against all of its (randomly
    shrunk) window contexts and their noise samples. ``callback(epoch,
    w_in, w_out, vocab_index)`` runs after every epoch.
    """
    corpus = [list(s) for s in corpus]
    if not any(corpus):
        raise ValidationError("SGNS corpus is empty")
    vocab = _Vocab(corpus, config.min_count)
    sentences = [s for s in vocab.encode(corpus) if s.size > 1]
    rng = make_rng(config.seed, "sgns")
    dim = config.dimension
    w_in = (rng.random((len(vocab.tokens), dim)) - 0.5) / dim
    w_out = np.zeros((len(vocab.tokens), dim))

    total_words = config.epochs * sum(s.size for s in sentences)
    processed = 0
    lr0 = config.learning_rate
    for epoch in range(config.epochs):
        for si in rng.permutation(len(sentences)):
            sent = sentences[si]
            n = sent.size
            spans = rng.integers(1, config.window + 1, size=n)
            for pos in range(n):
                lr = lr0 * max(1.0 - processed / total_words, 1e-4)
                processed += 1
                b = spans[pos]
                ctx = np.concatenate((sent[max(pos - b, 0):pos], sent[pos + 1:pos + 1 + b]))
                if ctx.size == 0:
                    continue
                negs = vocab.sample_noise(rng, (ctx.size, config.negatives))
                targets = np.concatenate((ctx, negs.ravel()))
                labels = np.zeros(targets.size)
                labels[:ctx.size] = 1.0
                c = sent[pos]
                u = w_in[c]
                out = w_out[targets]
                g = (labels - 1.0 / (1.0 + np.exp(-(out @ u)))) * lr
                w_in[c] += g @ out
                np.add.at(w_out, targets, np.outer(g, u))
        if callback is not None:
            callback(epoch, w_in, w_out, vocab.index)

    return EmbeddingTable(dim, {t: w_in[i].copy() for i, t in enumerate(vocab.tokens)})


def load_embeddings(path):
    """Parse the ``<count> <dim>`` header text format."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise ValidationError("line 1: missing '<vocab_size> <dimension>' header")
    head = lines[0].split()
    try:
        size, dim = (int(v) for v in head)
    except ValueError:
        raise ValidationError(f"line 1: malformed header {lines[0]!r}") from None
    if size < 0 or dim < 1:
        raise ValidationError("line 1: header values out of range")
    vectors = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.rstrip().split(" ")
        tok, values = parts[0], parts[1:]
        if len(values) != dim:
            raise ValidationError(
                f"line {lineno}: {len(values)} values for {tok!r}, header says {dim}")
        try:
            vec = np.array([float(v) for v in values])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric value") from None
        if tok in vectors:
            raise ValidationError(f"line {lineno}: duplicate token {tok!r}")
        vectors[tok] = vec
    if len(vectors) != size:
        raise ValidationError(f"header declares {size} vectors, file has {len(vectors)}")
    return EmbeddingTable(dim, vectors)


def build_decoder(table, space):
    """Stack pivot embeddings into a ``num_pivots x dimension`` decoder matrix."""
    pivots = space.pivots if isinstance(space, FeatureSpace) else list(space)
    names = [key[0] if len(key) == 1 else fused(key) for key in pivots]
    missing = [n for n in names if n not in table]
    if missing:
        raise ValidationError(f"pivots missing from embedding table: {missing}")
    if not names:
        return np.zeros((0, table.dimension))
    return np.vstack([np.asarray(table[n], dtype=np.float64) for n in names])
