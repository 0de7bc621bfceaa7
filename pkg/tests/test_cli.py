import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from bearingrul import cli, dataio, features as ft, model as md


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def record_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("records")
    code = run_cli("synth", "--outdir", str(root), "--snapshots", "120",
                   "--samples", "256", "--onset", "40", "--seed", "5",
                   "--bearing-id", "Bearing9_1")
    assert code == 0
    return root / "Bearing9_1"


@pytest.fixture(scope="module")
def dataset_path(record_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("feat")
    code = run_cli("featurize", "--input", str(record_dir), "--outdir",
                   str(out), "--stride", "2")
    assert code == 0
    return out / "dataset.bin"


@pytest.fixture(scope="module")
def checkpoint_path(dataset_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    code = run_cli("train", "--dataset", str(dataset_path), "--outdir",
                   str(out), "--epochs", "2", "--lr", "1e-3", "--batch-size",
                   "8", "--seed", "0")
    assert code == 0
    return out / "checkpoint.ckpt"


# --- individual commands ---

def test_synth_writes_manifest_and_record(record_dir):
    manifest = json.loads((record_dir.parent / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["config"]["seed"] == 5
    assert sorted(record_dir.glob("acc_*.csv"))


def test_ingest_summary(record_dir, tmp_path):
    assert run_cli("ingest", "--input", str(record_dir), "--outdir",
                   str(tmp_path)) == 0
    summary = json.loads((tmp_path / "record_summary.json").read_text())
    assert summary["n_snapshots"] == 120
    assert summary["samples_per_snapshot"] == 256
    assert summary["horizontal_rms_last"] > summary["horizontal_rms_first"]


def test_fpt_report(record_dir, tmp_path):
    assert run_cli("fpt", "--input", str(record_dir), "--outdir",
                   str(tmp_path)) == 0
    report = json.loads((tmp_path / "fpt.json").read_text())
    assert report["fpt"] is not None and 40 <= report["fpt"] <= 55
    assert (tmp_path / "kurtosis.csv").exists()
    ET.fromstring((tmp_path / "kurtosis.svg").read_text())


def test_featurize_dataset_contents(dataset_path):
    samples, sidecar = dataio.load_dataset(dataset_path)
    assert sidecar["bearing_id"] == "Bearing9_1"
    assert sidecar["config"]["stride"] == 2
    assert len(samples) > 20
    labels = [s.label for s in samples]
    assert max(labels) == 1.0 and min(labels) == 0.0


def test_train_history_csv(checkpoint_path):
    history = (checkpoint_path.parent / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,loss,val_mae"
    assert len(history) == 3


def test_eval_metrics(dataset_path, checkpoint_path, tmp_path):
    assert run_cli("eval", "--dataset", str(dataset_path), "--checkpoint",
                   str(checkpoint_path), "--outdir", str(tmp_path)) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert set(metrics) == {"n", "mae", "score_sum", "score_mean",
                            "late_fraction"}
    assert np.isfinite(metrics["mae"])


def test_predict_csv_and_svg(dataset_path, checkpoint_path, tmp_path):
    assert run_cli("predict", "--dataset", str(dataset_path), "--checkpoint",
                   str(checkpoint_path), "--outdir", str(tmp_path)) == 0
    lines = (tmp_path / "predictions.csv").read_text().splitlines()
    assert lines[0] == "window_index,true_rul,pred_rul,error"
    first = lines[1].split(",")
    assert float(first[3]) == pytest.approx(
        float(first[2]) - float(first[1]), abs=1e-12)
    ET.fromstring((tmp_path / "rul_curve.svg").read_text())


def test_eval_exact_predictions_give_zero_metrics(tmp_path):
    # a checkpoint whose zeroed network predicts the constant head bias,
    # paired with a dataset whose labels equal that constant
    cfg = md.desk_config()
    params = md.init_params(cfg, seed=0)
    params["head.out.b"].data[:] = 0.5
    ckpt = tmp_path / "const.ckpt"
    dataio.save_checkpoint(params, cfg, ckpt)
    rng = np.random.default_rng(3)
    samples = [ft.LabeledSample(hor=ft.wpd_image(rng.normal(size=4096)),
                                ver=ft.wpd_image(rng.normal(size=4096)),
                                label=0.5) for _ in range(4)]
    data = tmp_path / "const.bin"
    dataio.save_dataset(samples, data)
    out = tmp_path / "out"
    assert run_cli("eval", "--dataset", str(data), "--checkpoint", str(ckpt),
                   "--outdir", str(out)) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["mae"] == 0.0
    assert metrics["score_mean"] == 0.0


def test_exp_loss_report(dataset_path, tmp_path):
    assert run_cli("exp-loss", "--dataset", str(dataset_path), "--outdir",
                   str(tmp_path), "--epochs", "2", "--seed", "1") == 0
    report = json.loads((tmp_path / "exp_loss.json").read_text())
    assert set(report) == {"mse", "custom", "delta", "lambda"}
    assert (tmp_path / "history_mse.csv").exists()
    assert (tmp_path / "history_custom.csv").exists()


def test_config_file_with_flag_override(record_dir, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"stride": 3, "window": 10}))
    out = tmp_path / "out"
    assert run_cli("featurize", "--input", str(record_dir), "--config",
                   str(cfg_file), "--stride", "4", "--outdir", str(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["stride"] == 4      # flag wins
    assert manifest["config"]["window"] == 10     # file value kept


# --- manifests and reruns ---

def test_rerun_reproduces_artifacts_bit_exact(record_dir, tmp_path):
    first = tmp_path / "a"
    again = tmp_path / "b"
    assert run_cli("featurize", "--input", str(record_dir), "--outdir",
                   str(first), "--stride", "3") == 0
    assert run_cli("rerun", str(first / "manifest.json"), "--outdir",
                   str(again)) == 0
    for artifact in ("dataset.bin", "dataset.bin.json"):
        assert (first / artifact).read_bytes() == (again / artifact).read_bytes()


def test_failed_command_removes_partial_outputs(tmp_path):
    out = tmp_path / "out"
    code = run_cli("featurize", "--input", str(tmp_path / "missing"),
                   "--outdir", str(out))
    assert code == 3
    assert not list(out.iterdir())
    assert not (out / "manifest.json").exists()


# --- exit codes and help ---

def test_exit_code_data_error(tmp_path):
    assert run_cli("ingest", "--input", str(tmp_path / "absent"),
                   "--outdir", str(tmp_path / "o")) == 3


def test_exit_code_missing_required_option(tmp_path):
    assert run_cli("eval", "--dataset", "x.bin",
                   "--outdir", str(tmp_path)) == 2


def test_exit_code_numeric_error(dataset_path, tmp_path):
    # lr high enough to overflow the loss deterministically
    with np.errstate(over="ignore", invalid="ignore"):
        code = run_cli("train", "--dataset", str(dataset_path), "--outdir",
                       str(tmp_path / "o"), "--epochs", "3", "--lr", "1e200",
                       "--batch-size", "8")
    assert code == 4


def test_unknown_flag_exits_two():
    proc = subprocess.run(
        [sys.executable, "-m", "bearingrul.cli", "synth", "--bogus", "1"],
        capture_output=True, text=True)
    assert proc.returncode == 2


def test_help_lists_headline_defaults():
    proc = subprocess.run(
        [sys.executable, "-m", "bearingrul.cli", "featurize", "--help"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "default 10" in proc.stdout     # window
    assert "default 5" in proc.stdout      # stride
    assert "default 3" in proc.stdout      # level
    proc = subprocess.run(
        [sys.executable, "-m", "bearingrul.cli", "train", "--help"],
        capture_output=True, text=True)
    assert "default 0.0001" in proc.stdout  # learning rate
    assert "default 16" in proc.stdout      # batch size
    assert "default 100" in proc.stdout     # epochs
    assert "p=0.3" in proc.stdout           # head dropout note


def test_version_flag():
    proc = subprocess.run(
        [sys.executable, "-m", "bearingrul.cli", "--version"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip()
