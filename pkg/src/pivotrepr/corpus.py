"""Corpus ingestion, tokenization, n-gram extraction and data splits."""

import json
import re
from dataclasses import dataclass
from typing import Optional

from ._utils import ValidationError, make_rng

LABELED = "labeled"
UNLABELED = "unlabeled"

_SPLIT_RE = re.compile(r"[^0-9a-z]+")
_ALLOWED_KEYS = {LABELED: {"id", "text", "label"}, UNLABELED: {"id", "text"}}


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple
    label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for tok in self.tokens:
            if not tok or tok != tok.lower():
                raise ValidationError(f"document {self.id!r}: invalid token {tok!r}")
        if self.label not in (None, 0, 1):
            raise ValidationError(f"document {self.id!r}: label must be 0 or 1")


@dataclass(frozen=True)
class Corpus:
    domain_name: str
    documents: tuple
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        if self.kind not in (LABELED, UNLABELED):
            raise ValidationError(f"unknown corpus kind {self.kind!r}")
        for doc in self.documents:
            if (doc.label is None) == (self.kind == LABELED):
                raise ValidationError(
                    f"document {doc.id!r} does not match corpus kind {self.kind}")

    def __iter__(self):
        return iter(self.documents)

    def __len__(self):
        return len(self.documents)

    @property
    def labels(self):
        return [d.label for d in self.documents]

    def by_id(self):
        return {d.id: d for d in self.documents}

    def subset(self, ids):
        """Documents whose id is in ``ids``, in corpus order."""
        ids = set(ids)
        return [d for d in self.documents if d.id in ids]


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: frozenset
    dev_ids: frozenset


@dataclass(frozen=True)
class UnlabeledSplit:
    """Pooled unlabeled train/validation split.

    Ids are ``(role, doc_id)`` pairs with role ``"source"`` or ``"target"``
    because line-number ids collide across the two files.
    """
    train_ids: frozenset
    validation_ids: frozenset

    def select(self, source, target, which="train"):
        ids = self.train_ids if which == "train" else self.validation_ids
        out = [d for d in source.documents if ("source", d.id) in ids]
        out += [d for d in target.documents if ("target", d.id) in ids]
        return out


def tokenize(raw_text):
    """Lowercase and split on runs of non-alphanumeric characters.

    >>> tokenize("Great...really GREAT!!")
    ['great', 'really', 'great']
    """
    return [t for t in _SPLIT_RE.split(raw_text.lower()) if t]


def extract_ngrams(tokens):
    """All unigrams in order, followed by all adjacent bigrams in order.

    Unigram keys are 1-tuples and bigram keys 2-tuples of tokens.
    """
    tokens = list(tokens)
    return [(t,) for t in tokens] + list(zip(tokens, tokens[1:]))


def _parse_line(line, lineno, kind):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line {lineno}: malformed JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"line {lineno}: expected a JSON object")
    unknown = set(obj) - _ALLOWED_KEYS[kind]
    if unknown:
        raise ValidationError(f"line {lineno}: unknown keys {sorted(unknown)}")
    if not isinstance(obj.get("text"), str):
        raise ValidationError(f"line {lineno}: missing or non-string 'text'")
    if kind == LABELED:
        if "label" not in obj:
            raise ValidationError(f"line {lineno}: labeled record missing 'label'")
        if obj["label"] not in (0, 1) or isinstance(obj["label"], bool):
            raise ValidationError(f"line {lineno}: label must be 0 or 1")
    doc_id = obj.get("id", str(lineno))
    if not isinstance(doc_id, str):
        raise ValidationError(f"line {lineno}: 'id' must be a string")
    return Document(doc_id, tokenize(obj["text"]), obj.get("label"))


def load_corpus(path, kind, domain_name):
    """Read a JSON-lines corpus file.

    Missing ids default to the 1-based line number. Blank lines are skipped
    but still counted for numbering.
    """
    if kind not in _ALLOWED_KEYS:
        raise ValidationError(f"unknown corpus kind {kind!r}")
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            doc = _parse_line(line, lineno, kind)
            if doc.id in seen:
                raise ValidationError(f"line {lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return Corpus(domain_name, docs, kind)


def write_corpus(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            rec = {"id": doc.id, "text": " ".join(doc.tokens)}
            if corpus.kind == LABELED:
                rec["label"] = doc.label
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def make_folds(corpus, k=5, train_size=1600, dev_size=400, seed=0):
    """Balanced random train/dev resamples, one per fold.

    Each fold independently draws ``train_size/2 + dev_size/2`` documents of
    each class without replacement; dev sets of different folds may overlap.
    """
    if corpus.kind != LABELED:
        raise ValidationError("make_folds requires a labeled corpus")
    if train_size % 2 or dev_size % 2:
        raise ValidationError("train_size and dev_size must be even")
    if k < 1:
        raise ValidationError("k must be >= 1")
    pos = [d.id for d in corpus.documents if d.label == 1]
    neg = [d.id for d in corpus.documents if d.label == 0]
    need = (train_size + dev_size) // 2
    for name, ids in (("positive", pos), ("negative", neg)):
        if len(ids) < need:
            raise ValidationError(
                f"need {need} {name} documents per fold, only {len(ids)} available")
    folds = []
    for i in range(k):
        rng = make_rng(seed, "fold", i)
        train, dev = set(), set()
        for ids in (pos, neg):
            picked = rng.choice(len(ids), size=need, replace=False)
            train.update(ids[j] for j in picked[: train_size // 2])
            dev.update(ids[j] for j in picked[train_size // 2:])
        folds.append(FoldSplit(i, frozenset(train), frozenset(dev)))
    return folds


def split_unlabeled_holdout(source, target, ratio=0.2, seed=0):
    """Split each domain at ``ratio`` and pool the parts across domains."""
    if not 0 < ratio < 1:
        raise ValidationError("ratio must lie strictly between 0 and 1")
    train, val = set(), set()
    for role, corpus in (("source", source), ("target", target)):
        n = len(corpus)
        if n == 0:
            raise ValidationError(f"{role} unlabeled corpus is empty")
        n_val = int(round(ratio * n))
        order = make_rng(seed, "unlabeled-split", role).permutation(n)
        for rank, j in enumerate(order):
            key = (role, corpus.documents[j].id)
            (val if rank < n_val else train).add(key)
    return UnlabeledSplit(frozenset(train), frozenset(val))
