import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ckge.cli import main, sweep_table
from ckge.config import RunConfig
from ckge.kg import write_sequence
from ckge.synthetic import make_sequence

FAST = ["--set", "train.lr=0.01", "--set", "train.max_epochs=10", "--set", "train.batch_size=128",
        "--set", "scale.a=800", "--set", "policy.step=4"]


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    vocab, snaps = make_sequence(n_entities=80, n_relations=3, n_triples=900, seed=0)
    write_sequence(snaps, vocab, root)
    return root


@pytest.fixture(scope="module")
def toy_one(tmp_path_factory):
    root = tmp_path_factory.mktemp("one")
    vocab, snaps = make_sequence(n_entities=60, n_relations=3, n_triples=500, n_snapshots=1, seed=1)
    write_sequence(snaps, vocab, root)
    return root


def _rows(path):
    return [json.loads(ln) for ln in path.read_text().splitlines()]


def test_train_writes_outputs(toy, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--data", str(toy), "--out", str(out), "--dim", "16", "--footprints"] + FAST) == 0
    rows = _rows(out / "metrics.jsonl")
    assert len(rows) == 6 and rows[-1]["final"] and len(rows[-1]["h"]) == 5
    for r in rows[:5]:
        assert set(r) >= {"snapshot", "mrr", "h1", "h10", "cum_mrr", "cum_h1", "cum_h10", "dim"}
    assert rows[0]["dim"] == 16
    with open(out / "metrics.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 5
    assert sorted(p.name for p in (out / "checkpoints").iterdir()) == [f"snapshot_{i}.npz" for i in range(5)]
    assert (out / "footprints.tsv").read_text().count("\n") > 1
    assert RunConfig.from_file(out / "config.resolved")["dim.initial"] == "16"


def test_resolved_config_reproduces_run(toy, tmp_path):
    a = tmp_path / "a"
    main(["train", "--data", str(toy), "--out", str(a), "--seed", "3", "--no-checkpoints"] + FAST)
    b = tmp_path / "b"
    main(["train", "--config", str(a / "config.resolved"), "--out", str(b), "--no-checkpoints"])
    assert (a / "metrics.jsonl").read_bytes() == (b / "metrics.jsonl").read_bytes()


def test_sage_one_snapshot_equals_finetune(toy_one, tmp_path):
    main(["train", "--data", str(toy_one), "--out", str(tmp_path / "s"), "--mode", "sage", "--dim", "16"] + FAST)
    main(["train", "--data", str(toy_one), "--out", str(tmp_path / "f"), "--mode", "finetune", "--dim", "16"] + FAST)
    assert (tmp_path / "s" / "metrics.jsonl").read_bytes() == (tmp_path / "f" / "metrics.jsonl").read_bytes()


def test_ablate_di_matches_alpha_zero(toy, tmp_path):
    main(["train", "--data", str(toy), "--out", str(tmp_path / "a"), "--ablate", "DI", "--no-checkpoints"] + FAST)
    main(["train", "--data", str(toy), "--out", str(tmp_path / "b"), "--set", "train.alpha=0",
          "--no-checkpoints"] + FAST)
    assert (tmp_path / "a" / "metrics.jsonl").read_bytes() == (tmp_path / "b" / "metrics.jsonl").read_bytes()


def test_sweep(toy, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--data", str(toy), "--out", str(out), "--dims", "8,16,24"] + FAST) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 15
    for r in rows:
        for k in ("mrr", "h1", "h10", "cum_mrr"):
            assert 0 <= float(r[k]) <= 1
    with open(out / "sweep_best.csv") as fh:
        best = list(csv.DictReader(fh))
    for b in best:
        cands = [r for r in rows if r["snapshot"] == b["snapshot"]]
        top = max(cands, key=lambda r: float(r["mrr"]))
        assert int(b["best_dim"]) == int(top["dim"])


def test_sweep_table_first_on_ties():
    rows = [{"snapshot": 0, "dim": 8, "mrr": 0.2}, {"snapshot": 0, "dim": 16, "mrr": 0.2},
            {"snapshot": 1, "dim": 8, "mrr": 0.1}, {"snapshot": 1, "dim": 16, "mrr": 0.3}]
    assert sweep_table(rows) == [(0, 8, 0.2), (1, 16, 0.3)]


def test_fit_scale(tmp_path, capsys):
    pts = tmp_path / "pts.txt"
    pts.write_text("".join(f"{n} {5 * math.log(n)}\n" for n in (10, 100, 1000)))
    assert main(["fit-scale", "--points", str(pts), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "scale_fit.json").read_text())
    assert rep["a"] == pytest.approx(5) and rep["rms"] < 1e-9
    cfg_path = tmp_path / "fit.cfg"
    assert main(["fit-scale", "--reference", "--write-config", str(cfg_path)]) == 0
    a = RunConfig.from_file(cfg_path)["scale.a"]
    assert math.isfinite(a) and a > 0


def test_fit_scale_single_point_fails(tmp_path, capsys):
    pts = tmp_path / "one.txt"
    pts.write_text("10 5\n")
    assert main(["fit-scale", "--points", str(pts)]) != 0
    assert "InsufficientPoints" in capsys.readouterr().err


def test_eval_matches_training_metrics(toy, tmp_path):
    out = tmp_path / "run"
    main(["train", "--data", str(toy), "--out", str(out)] + FAST)
    final = _rows(out / "metrics.jsonl")[4]
    ev = tmp_path / "ev"
    assert main(["eval", "--data", str(toy), "--checkpoint", str(out / "checkpoints" / "snapshot_4.npz"),
                 "--out", str(ev)]) == 0
    summary = _rows(ev / "eval.jsonl")[-1]
    assert summary["cum_mrr"] == pytest.approx(final["cum_mrr"], abs=1e-12)


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 1
    assert "[kg]" in capsys.readouterr().err
    assert main(["train", "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad" / "0"
    bad.mkdir(parents=True)
    for name in ("train", "valid", "test"):
        (bad / f"{name}.txt").write_text("a\tb\n")
    assert main(["train", "--data", str(tmp_path / "bad"), "--out", str(tmp_path / "o")]) == 1
    assert "MalformedLine" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ckge", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "fit-scale" in res.stdout
