import json
import os

import numpy as np
import pytest

from pivotrepr.cli import main
from pivotrepr.netrepr import ReprModel
from pivotrepr.embeddings import build_decoder, load_embeddings
from pivotrepr.features import FeatureSpace

SYNTH = """\
[synth]
n_source_labeled = 300
n_source_unlabeled = 300
n_target_unlabeled = 300
n_target_test = 100
"""

PIPELINE = """\
[data]
source_labeled = data/source_labeled.jsonl
source_unlabeled = data/source_unlabeled.jsonl
target_unlabeled = data/target_unlabeled.jsonl
target_test = data/target_test.jsonl
source_name = src
target_name = tgt

[features]
num_pivots = 8
space = space.json

[sgns]
dimension = 6
epochs = 2
min_count = 1

[sgd]
max_epochs = 3

[repr]
space = space.json
hidden_dim = 6

[clf]
space = space.json
repr_model = {repr}

[eval]
predictions_a = clf_ae.predictions.tsv
predictions_b = clf_plain.predictions.tsv

[experiment]
methods = no_da, ae_scl
pivot_grid = 6
hidden_grid = 5
folds = 2
train_size = 200
dev_size = 100
"""


def write(path, text):
    path.write_text(text)
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    synth = write(d / "synth.ini", SYNTH)
    assert run("gen-synth", "--config", synth, "--seed", 2, "--out", d / "data") == 0
    cfg = write(d / "run.ini", PIPELINE.format(repr="ae.json"))
    write(d / "plain.ini", PIPELINE.replace("repr_model = {repr}\n", ""))
    assert run("pivots", "--config", cfg, "--out", d / "space.json") == 0
    return d


def test_gen_synth_files(workdir):
    names = sorted(os.listdir(workdir / "data"))
    assert names == ["source_labeled.jsonl", "source_unlabeled.jsonl",
                     "target_test.jsonl", "target_unlabeled.jsonl"]
    lines = (workdir / "data" / "target_test.jsonl").read_text().splitlines()
    assert len(lines) == 100 and "label" in json.loads(lines[0])


def test_pivots_space(workdir):
    space = FeatureSpace.load(workdir / "space.json")
    assert space.n_pivots == 8 and space.n_nonpivots > 0


def test_full_pipeline(workdir, capsys):
    cfg = workdir / "run.ini"
    assert run("train-embed", "--config", cfg, "--out", workdir / "emb.txt") == 0
    assert run("train-repr", "--config", cfg, "--out", workdir / "ae.json") == 0
    report = json.loads((workdir / "ae.report.json").read_text())
    assert 1 <= report["epochs_run"] <= 3
    assert run("train-repr", "--config", cfg, "--method", "ae_scl_sr",
               "--embeddings", workdir / "emb.txt", "--out", workdir / "sr.json") == 0
    model = ReprModel.load(workdir / "sr.json")
    space = FeatureSpace.load(workdir / "space.json")
    decoder = build_decoder(load_embeddings(workdir / "emb.txt"), space)
    assert np.array_equal(model.w_r, decoder)

    assert run("train-clf", "--config", cfg, "--out", workdir / "clf_ae.json") == 0
    assert run("train-clf", "--config", workdir / "plain.ini",
               "--out", workdir / "clf_plain.json") == 0
    rows = (workdir / "clf_ae.predictions.tsv").read_text().splitlines()
    assert rows[0] == "id\tgold\tpred" and len(rows) == 101

    capsys.readouterr()
    assert run("eval", "--config", cfg, "--out", workdir / "eval.json") == 0
    summary = json.loads(capsys.readouterr().out)
    assert 0 <= summary["p_value"] <= 1
    assert summary == json.loads((workdir / "eval.json").read_text())
    assert run("eval", "--config", cfg, "--allow-exact-mcnemar") == 0
    assert json.loads(capsys.readouterr().out)["exact"] is True


def test_experiment_outputs_repeat_byte_identical(workdir, monkeypatch):
    monkeypatch.setenv("PIVOTREPR_THREADS", "2")
    cfg = workdir / "run.ini"
    outs = []
    for name in ("exp1", "exp2"):
        assert run("experiment", "--config", cfg, "--seed", 5, "--out", workdir / name) == 0
        outs.append({f: (workdir / name / f).read_bytes()
                     for f in sorted(os.listdir(workdir / name))})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"results.tsv", "summary.json"}
    tsv = outs[0]["results.tsv"].decode().splitlines()
    assert len(tsv) == 1 + 2 * 2


def test_rerun_byte_identical(workdir):
    cfg = workdir / "run.ini"
    for name in ("s1.json", "s2.json"):
        assert run("pivots", "--config", cfg, "--seed", 3, "--out", workdir / name) == 0
    assert (workdir / "s1.json").read_bytes() == (workdir / "s2.json").read_bytes()
    for name in ("r1.json", "r2.json"):
        assert run("train-repr", "--config", cfg, "--seed", 3, "--out", workdir / name) == 0
    assert (workdir / "r1.json").read_bytes() == (workdir / "r2.json").read_bytes()


def test_frozen_without_embeddings(workdir, capsys):
    code = run("train-repr", "--config", workdir / "run.ini", "--method", "ae_scl_sr",
               "--out", workdir / "x.json")
    assert code == 1
    assert "--embeddings" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert run("frobnicate") == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert run("pivots", "--bogus") == 1
    assert "usage" in capsys.readouterr().err


def test_no_subcommand():
    assert run() == 1


def test_missing_config_is_io_error(tmp_path):
    assert run("pivots", "--config", tmp_path / "nope.ini", "--out", tmp_path / "s.json") == 2


def test_missing_data_file_is_io_error(tmp_path):
    cfg = write(tmp_path / "c.ini", PIPELINE.format(repr="ae.json"))
    assert run("pivots", "--config", cfg, "--out", tmp_path / "s.json") == 2


def test_bad_value_is_validation_error(tmp_path, workdir):
    cfg = write(tmp_path / "c.ini", "[synth]\npivot_emission_prob = 2\n")
    assert run("gen-synth", "--config", cfg, "--out", tmp_path / "d") == 1
    bad = write(tmp_path / "b.ini", "[synth\n")
    assert run("gen-synth", "--config", bad, "--out", tmp_path / "d") == 1
