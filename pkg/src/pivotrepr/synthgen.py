"""Seeded two-domain synthetic sentiment corpora with controllable shift.

Every document mixes filler words with sentiment words of its polarity.
Shared sentiment words occur in both domains and become pivots; each
domain also has its own sentiment words, which only co-occur with the
shared ones. A classifier trained on source text therefore sees none of
the target's domain-specific cues.
"""

from dataclasses import dataclass, field

from ._utils import ValidationError, make_rng
from .corpus import LABELED, UNLABELED, Corpus, Document


def _words(prefix, n):
    return tuple(f"{prefix}{i}" for i in range(n))


@dataclass(frozen=True)
class GeneratorConfig:
    source_name: str = "src"
    target_name: str = "tgt"
    shared_sentiment_vocab: dict = field(default_factory=lambda: {
        1: _words("goodx", 5), 0: _words("badx", 5)})
    source_sentiment_vocab: dict = field(default_factory=lambda: {
        1: _words("srcpos", 15), 0: _words("srcneg", 15)})
    target_sentiment_vocab: dict = field(default_factory=lambda: {
        1: _words("tgtpos", 15), 0: _words("tgtneg", 15)})
    filler_vocab: tuple = _words("w", 200)
    doc_length: tuple = (8, 16)
    shared_slots: int = 2
    domain_slots: int = 3
    pivot_emission_prob: float = 0.3
    domain_word_emission_prob: float = 0.7
    wrong_polarity_prob: float = 0.1
    n_source_labeled: int = 2000
    n_source_unlabeled: int = 2000
    n_target_unlabeled: int = 2000
    n_target_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        for name in ("pivot_emission_prob", "domain_word_emission_prob"):
            if not 0 < getattr(self, name) < 1:
                raise ValidationError(f"{name} must lie in (0, 1)")
        if not 0 <= self.wrong_polarity_prob < 1:
            raise ValidationError("wrong_polarity_prob must lie in [0, 1)")
        lo, hi = self.doc_length
        if not 0 <= lo <= hi:
            raise ValidationError("doc_length must be (min, max) with 0 <= min <= max")
        groups = {
            "shared": self.shared_sentiment_vocab,
            "source": self.source_sentiment_vocab,
            "target": self.target_sentiment_vocab,
            "filler": {None: self.filler_vocab},
        }
        seen = {}
        for gname, vocab in groups.items():
            for words in vocab.values():
                if not words:
                    raise ValidationError(f"{gname} vocabulary list is empty")
                for w in words:
                    if w in seen and seen[w] != gname:
                        raise ValidationError(
                            f"word {w!r} appears in both {seen[w]} and {gname} vocabularies")
                    seen[w] = gname
        for gname in ("shared", "source", "target"):
            if set(groups[gname]) != {0, 1}:
                raise ValidationError(f"{gname} sentiment vocabulary needs polarities 0 and 1")


def _document(rng, cfg, domain_vocab, polarity):
    lo, hi = cfg.doc_length
    tokens = list(rng.choice(cfg.filler_vocab, size=int(rng.integers(lo, hi + 1))))
    for vocab, slots, prob in ((cfg.shared_sentiment_vocab, cfg.shared_slots,
                                cfg.pivot_emission_prob),
                               (domain_vocab, cfg.domain_slots,
                                cfg.domain_word_emission_prob)):
        for _ in range(slots):
            if rng.random() < prob:
                pol = polarity if rng.random() >= cfg.wrong_polarity_prob else 1 - polarity
                tokens.append(str(rng.choice(vocab[pol])))
    rng.shuffle(tokens)
    return [str(t) for t in tokens]


def _corpus(cfg, role, kind, n):
    domain = cfg.source_name if role == "source" else cfg.target_name
    vocab = cfg.source_sentiment_vocab if role == "source" else cfg.target_sentiment_vocab
    rng = make_rng(cfg.seed, "synth", role, kind)
    polarities = [i % 2 for i in range(n)]
    rng.shuffle(polarities)
    docs = []
    for i, pol in enumerate(polarities):
        tokens = _document(rng, cfg, vocab, pol)
        docs.append(Document(f"{domain}-{kind}-{i}", tokens,
                             int(pol) if kind == LABELED else None))
    return Corpus(domain, docs, kind)


def generate(config=GeneratorConfig()):
    """Return ``(source_labeled, source_unlabeled, target_unlabeled, target_test)``.

    Labeled corpora with an even size are exactly balanced.
    """
    return (_corpus(config, "source", LABELED, config.n_source_labeled),
            _corpus(config, "source", UNLABELED, config.n_source_unlabeled),
            _corpus(config, "target", UNLABELED, config.n_target_unlabeled),
            _corpus(config, "target", LABELED, config.n_target_test))
