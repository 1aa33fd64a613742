"""Command-line interface.

Every subcommand reads an INI-style config (``key = value`` lines grouped
in ``[sections]``); relative paths in it are resolved against the config
file's directory. Exit status is 0 on success, 1 on validation errors and
2 on I/O errors.
"""

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import MISSING, fields, replace

import numpy as np

from . import evalharness, netrepr, synthgen
from ._utils import ValidationError, derive_seed
from .classifier import LogisticRegressionGD
from .corpus import LABELED, UNLABELED, load_corpus, split_unlabeled_holdout, write_corpus
from .embeddings import SgnsConfig, build_decoder, load_embeddings, rewrite_bigrams, train_sgns
from .features import FeatureSpace, count_features, select_pivots, vectorize_corpus
from .sclmi import Projection

log = logging.getLogger("pivotrepr")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
DATA_KEYS = {
    "source_labeled": LABELED,
    "source_unlabeled": UNLABELED,
    "target_unlabeled": UNLABELED,
    "target_test": LABELED,
}


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


class Manifest:
    """Parsed config file plus CLI overrides."""

    def __init__(self, path, seed=None):
        self.path = path
        self.base = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
        self.ini = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if path:
            if not os.path.isfile(path):
                raise FileNotFoundError(f"config file not found: {path}")
            with open(path, encoding="utf-8") as fh:
                self.ini.read_file(fh)
        self.seed = seed if seed is not None else self.ini.getint("experiment", "seed",
                                                                   fallback=0)

    def get(self, section, key, fallback=None):
        return self.ini.get(section, key, fallback=fallback)

    def require(self, section, key):
        value = self.get(section, key)
        if value is None:
            raise ValidationError(f"config is missing [{section}] {key}")
        return value

    def path_of(self, section, key, required=True):
        value = self.require(section, key) if required else self.get(section, key)
        if value is None:
            return None
        path = os.path.join(self.base, value)
        if not os.path.exists(path):
            raise FileNotFoundError(f"[{section}] {key}: no such file {path}")
        return path

    def typed(self, section, cls, **overrides):
        """Build dataclass ``cls`` from the matching keys of ``section``."""
        kwargs = {}
        for f in fields(cls):
            raw = self.get(section, f.name)
            if raw is None:
                continue
            default = f.default
            if default is MISSING:
                continue
            if isinstance(default, bool):
                kwargs[f.name] = self.ini.getboolean(section, f.name)
            elif isinstance(default, int):
                kwargs[f.name] = int(raw)
            elif isinstance(default, float) or default is None:
                kwargs[f.name] = float(raw)
            elif isinstance(default, tuple) and default and isinstance(default[0], str):
                kwargs[f.name] = tuple(raw.replace(",", " ").split())
            elif isinstance(default, tuple):
                kwargs[f.name] = _ints(raw)
            else:
                kwargs[f.name] = raw
        kwargs.update(overrides)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"[{section}]: {exc}") from None

    def corpus(self, key):
        name_key = "source_name" if key.startswith("source") else "target_name"
        name = self.get("data", name_key, fallback=key.split("_")[0])
        return load_corpus(self.path_of("data", key), DATA_KEYS[key], name)


def _ints(raw):
    return tuple(int(v) for v in raw.replace(",", " ").split())


def _write_json(obj, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _require_out(args):
    if not args.out:
        raise ValidationError("--out is required for this subcommand")
    return args.out


def _sgd_config(m, seed):
    return m.typed("sgd", netrepr.SgdConfig, seed=derive_seed(seed, "sgd"))


def cmd_gen_synth(args, m):
    out = _require_out(args)
    cfg = m.typed("synth", synthgen.GeneratorConfig, seed=m.seed)
    lo = m.get("synth", "doc_length_min")
    hi = m.get("synth", "doc_length_max")
    if lo is not None or hi is not None:
        cfg = replace(cfg, doc_length=(int(lo or cfg.doc_length[0]),
                                       int(hi or cfg.doc_length[1])))
    os.makedirs(out, exist_ok=True)
    for key, corpus in zip(DATA_KEYS, synthgen.generate(cfg)):
        write_corpus(corpus, os.path.join(out, f"{key}.jsonl"))
    log.info("wrote synthetic corpora to %s", out)


def _pivot_space(m):
    labeled = m.corpus("source_labeled")
    counts = count_features(m.corpus("source_unlabeled"), m.corpus("target_unlabeled"))
    n = int(m.get("features", "num_pivots", fallback=100))
    return select_pivots(counts, labeled.documents, n,
                         int(m.get("features", "pivot_min_count", fallback=10)),
                         int(m.get("features", "nonpivot_min_count", fallback=10)))


def cmd_pivots(args, m):
    out = _require_out(args)
    space = _pivot_space(m)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    space.save(out)
    log.info("%d pivots, %d non-pivots -> %s", space.n_pivots, space.n_nonpivots, out)


def cmd_train_embed(args, m):
    out = _require_out(args)
    src, tgt = m.corpus("source_unlabeled"), m.corpus("target_unlabeled")
    space_path = m.path_of("features", "space", required=False)
    if space_path:
        bigrams = {k for k in FeatureSpace.load(space_path).pivots if len(k) == 2}
    else:
        threshold = int(m.get("features", "pivot_min_count", fallback=10))
        bigrams = {k for k, (s, t) in count_features(src, tgt).items()
                   if len(k) == 2 and min(s, t) >= threshold}
    text = [rewrite_bigrams(d.tokens, bigrams) for d in src.documents + tgt.documents]
    table = train_sgns(text, m.typed("sgns", SgnsConfig, seed=derive_seed(m.seed, "sgns")))
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    table.save(out)
    log.info("%d embeddings of dimension %d -> %s", len(table), table.dimension, out)


def cmd_train_repr(args, m):
    out = _require_out(args)
    method = args.method or m.get("repr", "method", fallback="ae_scl")
    if method not in ("ae_scl", "ae_scl_sr"):
        raise ValidationError(f"train-repr supports ae_scl and ae_scl_sr, not {method!r}")
    if method == "ae_scl_sr" and not args.embeddings:
        raise ValidationError("ae_scl_sr needs --embeddings <word2vec text file>")
    space = FeatureSpace.load(m.path_of("repr", "space"))
    src, tgt = m.corpus("source_unlabeled"), m.corpus("target_unlabeled")
    split = split_unlabeled_holdout(
        src, tgt, float(m.get("repr", "validation_ratio", fallback=0.2)),
        derive_seed(m.seed, "unlabeled"))
    tr = vectorize_corpus(split.select(src, tgt, "train"), space)
    va = vectorize_corpus(split.select(src, tgt, "validation"), space)
    sgd = _sgd_config(m, m.seed)
    if method == "ae_scl_sr":
        if not os.path.exists(args.embeddings):
            raise FileNotFoundError(f"no such embeddings file: {args.embeddings}")
        decoder = build_decoder(load_embeddings(args.embeddings), space)
        model = netrepr.init_model(decoder.shape[1], space, netrepr.FROZEN, decoder,
                                   derive_seed(m.seed, "init"), sgd.init_scale)
    else:
        hidden = int(m.get("repr", "hidden_dim", fallback=100))
        model = netrepr.init_model(hidden, space, netrepr.TRAINABLE, None,
                                   derive_seed(m.seed, "init"), sgd.init_scale)
    model, report = netrepr.train(model, (tr[1], tr[0]), (va[1], va[0]), sgd)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    model.save(out)
    _write_json(report.to_dict(), os.path.splitext(out)[0] + ".report.json")
    log.info("trained %s for %d epochs -> %s", method, report.epochs_run, out)


def _load_repr(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "theta" in obj:
        return Projection.from_dict(obj).theta.T
    return netrepr.ReprModel.from_dict(obj).w_h.T


def cmd_train_clf(args, m):
    out = _require_out(args)
    space = FeatureSpace.load(m.path_of("clf", "space"))
    repr_path = m.path_of("clf", "repr_model", required=False)
    proj = _load_repr(repr_path) if repr_path else None
    labeled = m.corpus("source_labeled")
    _, X_np, X_full = vectorize_corpus(labeled.documents, space)
    H = np.asarray(X_np @ proj) if proj is not None else None
    clf = LogisticRegressionGD(float(m.get("clf", "l2", fallback=1e-4)),
                               int(m.get("clf", "max_iters", fallback=1000)),
                               float(m.get("clf", "tolerance", fallback=1e-5)))
    clf.fit((X_full, H), labeled.labels)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    clf.model_.save(out)
    if m.get("data", "target_test"):
        test = m.corpus("target_test")
        _, T_np, T_full = vectorize_corpus(test.documents, space)
        preds = clf.predict((T_full, np.asarray(T_np @ proj) if proj is not None else None))
        pred_path = os.path.splitext(out)[0] + ".predictions.tsv"
        with open(pred_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(("id", "gold", "pred"))
            for doc, p in zip(test.documents, preds):
                w.writerow((doc.id, doc.label, int(p)))
        log.info("target accuracy %.4f", float(np.mean(preds == np.array(test.labels))))


def _read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    if not rows or not {"id", "gold", "pred"} <= set(rows[0]):
        raise ValidationError(f"{path}: expected a TSV with id, gold, pred columns")
    try:
        return [r["id"] for r in rows], [int(r["gold"]) for r in rows], \
            [int(r["pred"]) for r in rows]
    except ValueError:
        raise ValidationError(f"{path}: gold/pred must be 0 or 1") from None


def cmd_eval(args, m):
    ids_a, gold_a, pred_a = _read_predictions(m.path_of("eval", "predictions_a"))
    summary = {"accuracy_a": float(np.mean(np.array(gold_a) == np.array(pred_a)))}
    path_b = m.path_of("eval", "predictions_b", required=False)
    if path_b:
        ids_b, gold_b, pred_b = _read_predictions(path_b)
        if ids_a != ids_b or gold_a != gold_b:
            raise ValidationError("prediction files cover different documents or gold labels")
        table = evalharness.ContingencyTable.from_predictions(gold_a, pred_a, pred_b)
        stat, p = evalharness.mcnemar(table, exact=args.allow_exact_mcnemar)
        summary.update({
            "accuracy_b": float(np.mean(np.array(gold_b) == np.array(pred_b))),
            "b": table.b, "c": table.c, "statistic": stat, "p_value": p,
            "exact": bool(args.allow_exact_mcnemar),
            "class_disagreements": evalharness.class_disagreements(gold_a, pred_a, pred_b),
        })
    text = json.dumps(summary, indent=1)
    if args.out:
        _write_json(summary, args.out)
    print(text)


def experiment_config(m, method="ae_scl"):
    sec = "experiment"
    kwargs = {"method": method, "seed": m.seed,
              "sgd": _sgd_config(m, m.seed),
              "sgns": m.typed("sgns", SgnsConfig)}
    for key in ("pivot_grid", "hidden_grid", "svd_grid"):
        if m.get(sec, key):
            kwargs[key] = _ints(m.get(sec, key))
    for key, cast in (("sclmi_pivots", int), ("folds", int), ("train_size", int),
                      ("dev_size", int), ("unlabeled_ratio", float),
                      ("pivot_min_count", int), ("nonpivot_min_count", int),
                      ("clf_l2", float), ("clf_max_iters", int), ("clf_tolerance", float),
                      ("sclmi_l2", float), ("sclmi_epochs", int)):
        if m.get(sec, key) is not None:
            kwargs[key] = cast(m.get(sec, key))
    threads = os.environ.get("PIVOTREPR_THREADS")
    kwargs["threads"] = max(1, int(threads)) if threads else (os.cpu_count() or 1)
    return evalharness.ExperimentConfig(**kwargs)


def cmd_experiment(args, m):
    out = _require_out(args)
    if args.method:
        methods = [args.method]
    else:
        methods = [s.strip() for s in m.get("experiment", "methods",
                                               fallback="no_da,ae_scl").split(",")]
    corpora = [m.corpus(k) for k in DATA_KEYS]
    cfg = experiment_config(m, methods[0])
    if args.embeddings:
        if not os.path.exists(args.embeddings):
            raise FileNotFoundError(f"no such embeddings file: {args.embeddings}")
        cfg = replace(cfg, embeddings=load_embeddings(args.embeddings))
    results = evalharness.run_methods(*corpora, cfg, methods)
    for r in results:
        log.info("%s %s->%s mean target accuracy %.4f", r.method, r.source, r.target,
                 r.mean_test_accuracy)
    evalharness.write_results(results, out,
                              float(m.get("experiment", "alpha", fallback=0.05)),
                              args.allow_exact_mcnemar)


COMMANDS = {
    "gen-synth": (cmd_gen_synth, "generate synthetic two-domain corpora"),
    "pivots": (cmd_pivots, "select pivots and save the feature space"),
    "train-embed": (cmd_train_embed, "train SGNS pivot embeddings"),
    "train-repr": (cmd_train_repr, "train the pivot-prediction network"),
    "train-clf": (cmd_train_clf, "train the sentiment classifier"),
    "eval": (cmd_eval, "accuracy and McNemar test on saved predictions"),
    "experiment": (cmd_experiment, "run the full cross-validated protocol"),
}


def build_parser():
    parser = _Parser(prog="pivotrepr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="INI-style config file")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--method", choices=evalharness.METHODS)
        p.add_argument("--embeddings", help="word2vec text-format embeddings")
        p.add_argument("--allow-exact-mcnemar", action="store_true",
                       help="use the exact binomial McNemar p-value")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a subcommand is required")
        func = COMMANDS[args.command][0]
        func(args, Manifest(args.config, args.seed))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
