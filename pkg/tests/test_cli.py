import json
from pathlib import Path

import numpy as np
import pytest

from coview import cli, data
from coview.losses import LossConfig
from coview.synthgen import SynthConfig
from coview.trainer import TrainConfig


@pytest.fixture()
def synth_config_path(tmp_path):
    cfg = SynthConfig(
        num_known_classes=3,
        num_unknown_classes=3,
        per_class_count=30,
        dim_view1=5,
        dim_view2=5,
        noise_sigma=0.5,
        test_fraction=0.2,
        seed=0,
    )
    path = tmp_path / "synth.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return path


@pytest.fixture()
def train_config_path(tmp_path):
    cfg = TrainConfig(
        seed=0,
        batch_size=16,
        lr=1e-3,
        pretrain_epochs=1,
        train_epochs=2,
        loss=LossConfig(),
        k=3,
        eval_every=0,
        proj_hidden=16,
        proj_out=16,
        head_hidden=16,
    )
    path = tmp_path / "train.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return path


def run_cli(*argv):
    return cli.run([str(a) for a in argv])


def test_pipeline_smoke(tmp_path, synth_config_path, train_config_path, capsys):
    data_dir = tmp_path / "data"
    run_dir = tmp_path / "run"
    assert run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir) == 0
    assert (data_dir / "meta.jsonl").exists()
    assert run_cli("train", "--config", train_config_path, "--data", data_dir, "--out", run_dir) == 0
    assert (run_dir / "report.json").exists()
    assert (run_dir / "log.jsonl").exists()
    assert (run_dir / "checkpoint" / "weights.bin").exists()
    report = json.loads((run_dir / "report.json").read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    assert report["seed"] == 0
    assert report["config"]["k"] == 3


def test_eval_from_checkpoint(tmp_path, synth_config_path, train_config_path, capsys):
    data_dir = tmp_path / "data"
    run_dir = tmp_path / "run"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    run_cli("train", "--config", train_config_path, "--data", data_dir, "--out", run_dir)
    capsys.readouterr()
    assert (
        run_cli(
            "eval",
            "--config", train_config_path,
            "--data", data_dir,
            "--checkpoint", run_dir / "checkpoint",
            "--source", "kmeans",
        )
        == 0
    )
    payload = json.loads(capsys.readouterr().out.strip())
    assert payload["source"] == "kmeans"
    assert 0.0 <= payload["accuracy"] <= 1.0


def test_pretrain_then_train_with_init(tmp_path, synth_config_path, train_config_path):
    data_dir = tmp_path / "data"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    warm_dir = tmp_path / "warm"
    assert run_cli("pretrain", "--config", train_config_path, "--data", data_dir, "--out", warm_dir) == 0
    run_dir = tmp_path / "run"
    assert (
        run_cli(
            "train",
            "--config", train_config_path,
            "--data", data_dir,
            "--out", run_dir,
            "--init", warm_dir / "checkpoint",
        )
        == 0
    )
    assert (run_dir / "report.json").exists()


def test_split_stratified(tmp_path, synth_config_path, capsys):
    data_dir = tmp_path / "data"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    out_dir = tmp_path / "resplit"
    assert run_cli("split", "--data", data_dir, "--out", out_dir, "--fraction", "0.5", "--seed", "3") == 0
    ds = data.load_dataset_dir(out_dir)
    by_type: dict[str, list[str]] = {}
    for inst in ds.instances:
        by_type.setdefault(inst.label or inst.gold, []).append(inst.split)
    for splits in by_type.values():
        assert splits.count("test") == 15  # half of 30 per class


def test_probe_knn_table(tmp_path, synth_config_path, capsys):
    data_dir = tmp_path / "data"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    capsys.readouterr()
    assert run_cli("probe-knn", "--data", data_dir, "--view", "mask", "--k", "5") == 0
    table = capsys.readouterr().out
    assert "Avg" in table
    for name in ("known_00", "novel_02"):
        assert name in table


def test_probe_knn_json(tmp_path, synth_config_path, capsys):
    data_dir = tmp_path / "data"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    capsys.readouterr()
    assert run_cli("probe-knn", "--data", data_dir, "--view", "token", "--k", "5", "--json", "--subset", "unknown") == 0
    payload = json.loads(capsys.readouterr().out.strip())
    assert set(payload["per_type"]) == {"novel_00", "novel_01", "novel_02"}
    assert payload["macro_avg"] == pytest.approx(np.mean(list(payload["per_type"].values())))


def test_sweep_k_reports(tmp_path, synth_config_path, train_config_path, capsys):
    data_dir = tmp_path / "data"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    out_dir = tmp_path / "sweep"
    assert run_cli("sweep-k", "--config", train_config_path, "--data", data_dir, "--out", out_dir, "--k", "2,3,6") == 0
    sweep = json.loads((out_dir / "sweep.json").read_text())
    assert [entry["k"] for entry in sweep] == [2, 3, 6]
    for entry in sweep:
        assert (out_dir / f"k_{entry['k']}" / "report.json").exists()


def test_seed_override_changes_output(tmp_path, synth_config_path, capsys):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run_cli("gen-synth", "--config", synth_config_path, "--out", a)
    run_cli("gen-synth", "--config", synth_config_path, "--out", b, "--seed", "9")
    run_cli("gen-synth", "--config", synth_config_path, "--out", c)
    assert (a / "view_token.emb").read_bytes() == (c / "view_token.emb").read_bytes()
    assert (a / "view_token.emb").read_bytes() != (b / "view_token.emb").read_bytes()


def test_byte_identical_reruns(tmp_path, synth_config_path, train_config_path):
    data_dir = tmp_path / "data"
    run_cli("gen-synth", "--config", synth_config_path, "--out", data_dir)
    for run in ("r1", "r2"):
        run_cli("train", "--config", train_config_path, "--data", data_dir, "--out", tmp_path / run)
    for name in ("report.json", "log.jsonl", "checkpoint/weights.bin", "checkpoint/manifest.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_machine_readable_error_line(tmp_path, capsys):
    code = run_cli("train", "--config", tmp_path / "missing.json", "--data", tmp_path, "--out", tmp_path / "o")
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert "error" in payload and "message" in payload


def test_bad_config_schema_fails(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"k": 3, "bogus_field": 1}))
    code = run_cli("train", "--config", bad, "--data", tmp_path, "--out", tmp_path / "o")
    assert code == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "bogus_field" in payload["message"]
