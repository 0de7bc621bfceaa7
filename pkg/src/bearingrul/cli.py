"""Command-line pipeline drivers.

Every command resolves its options to a flat config dict (built-in
defaults < JSON config file < explicit flags), runs, and writes its
artifacts plus a manifest.json into --outdir. The manifest records the
command, tool version, resolved config, input paths and wall-clock time;
`rerun <manifest> --outdir NEW` re-executes the recorded run and, because
every pipeline stage is seeded and deterministic, reproduces the
artifacts byte for byte. On failure, partially written artifacts are
removed and the process exits 2 (usage), 3 (data error) or 4 (numeric
error) with a single machine-parseable line on stderr.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dataio, features, model, plotting, training
from .errors import BearingRulError, DataError, NumericError

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "synth": {
        "snapshots": 100, "samples": 2560, "onset": 50, "growth": 2.0,
        "noise_std": 1.0, "kurtosis": 3.0, "impulses": 20, "tone_level": 2.0,
        "tone_low": 0.06, "tone_high": 0.17, "seed": 0,
        "bearing_id": "Bearing9_1",
    },
    "ingest": {"input": None, "hor_col": 4, "ver_col": 5},
    "fpt": {
        "input": None, "channel": "horizontal", "baseline": None,
        "sigma": 3.0, "consecutive": 3, "denoise": False,
    },
    "featurize": {
        "input": None, "fpt": "auto", "window": 10, "stride": 5, "level": 3,
        "denoise": True, "baseline": None,
    },
    "train": {
        "dataset": None, "preset": "desk", "loss": "custom", "lam": 1.0,
        "lr": 1e-4, "batch_size": 16, "epochs": 100, "seed": 0,
        "val_fraction": 0.0,
    },
    "eval": {"dataset": None, "checkpoint": None},
    "predict": {"dataset": None, "checkpoint": None},
    "exp-loss": {
        "dataset": None, "preset": "desk", "lam": 1.0, "lr": 1e-3,
        "batch_size": 8, "epochs": 30, "seed": 0, "holdout": 0.25,
    },
}


class _Run:
    """Tracks artifacts so a failed command leaves no partial outputs."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.artifacts = []

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.artifacts.append(p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def discard_all(self):
        for p in self.artifacts:
            if p.is_dir():
                for child in sorted(p.rglob("*"), reverse=True):
                    if child.is_file():
                        child.unlink()
                    else:
                        child.rmdir()
                p.rmdir()
            elif p.exists():
                p.unlink()

    def finish(self, command: str, config: dict, inputs, started: float):
        manifest = {
            "command": command,
            "tool_version": __version__,
            "config": config,
            "inputs": [str(i) for i in inputs],
            "outdir": str(self.outdir),
            "artifacts": sorted(p.name for p in self.artifacts),
            "timings": {"wall_s": round(time.time() - started, 3)},
        }
        with open(self.outdir / "manifest.json", "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Command bodies (config dict in, artifacts out)
# ---------------------------------------------------------------------------

def cmd_synth(cfg, run: _Run):
    scfg = dataio.SyntheticConfig(
        n_snapshots=cfg["snapshots"], samples_per_snapshot=cfg["samples"],
        healthy_kurtosis_level=cfg["kurtosis"], fault_onset_index=cfg["onset"],
        fault_growth_rate=cfg["growth"], noise_std=cfg["noise_std"],
        seed=cfg["seed"], impulses_per_snapshot=cfg["impulses"],
        tone_level=cfg["tone_level"], tone_freq_low=cfg["tone_low"],
        tone_freq_high=cfg["tone_high"], bearing_id=cfg["bearing_id"])
    record = dataio.gen_synthetic(scfg)
    record_dir = run.path(cfg["bearing_id"])
    dataio.save_record_csvdir(record, record_dir)
    run.write_json("record_summary.json", _record_summary(record))
    return []


def _record_summary(record) -> dict:
    return {
        "bearing_id": record.bearing_id,
        "condition_id": record.condition_id,
        "n_snapshots": record.n_snapshots,
        "samples_per_snapshot": record.samples_per_snapshot,
        "sample_rate_hz": record.sample_rate_hz,
        "snapshot_period_s": record.snapshot_period_s,
        "horizontal_rms_first": float(np.sqrt((record.horizontal[0] ** 2).mean())),
        "horizontal_rms_last": float(np.sqrt((record.horizontal[-1] ** 2).mean())),
        "vertical_rms_first": float(np.sqrt((record.vertical[0] ** 2).mean())),
        "vertical_rms_last": float(np.sqrt((record.vertical[-1] ** 2).mean())),
    }


def cmd_ingest(cfg, run: _Run):
    record = dataio.load_pronostia_bearing(cfg["input"], hor_col=cfg["hor_col"],
                                           ver_col=cfg["ver_col"])
    run.write_json("record_summary.json", _record_summary(record))
    return [cfg["input"]]


def cmd_fpt(cfg, run: _Run):
    record = dataio.load_pronostia_bearing(cfg["input"])
    if cfg["denoise"]:
        record = features.preprocess_record(record)
    fcfg = features.FptConfig(baseline_count=cfg["baseline"],
                              sigma_multiplier=cfg["sigma"],
                              consecutive_required=cfg["consecutive"],
                              channel_policy=cfg["channel"])
    if cfg["channel"] == "either":
        fpt = features.detect_fpt_record(record, fcfg)
        series = features.kurtosis_series(record, "horizontal")
    else:
        series = features.kurtosis_series(record, cfg["channel"])
        fpt = features.detect_fpt(series, fcfg)
    baseline = fcfg.resolve_baseline(series.size)
    mu = float(series[:baseline].mean())
    sigma = float(series[:baseline].std(ddof=1))
    run.write_text("kurtosis.csv",
                   _csv(enumerate(series.tolist()), ("snapshot", "kurtosis")))
    run.write_json("fpt.json", {
        "fpt": fpt, "channel": cfg["channel"], "baseline_count": baseline,
        "mu": mu, "sigma": sigma,
        "band": [mu - cfg["sigma"] * sigma, mu + cfg["sigma"] * sigma],
        "consecutive_required": cfg["consecutive"],
    })
    idx = list(range(series.size))
    run.write_text("kurtosis.svg", plotting.line_chart_svg(
        [("kurtosis", idx, series.tolist()),
         ("band hi", idx, [mu + cfg["sigma"] * sigma] * series.size),
         ("band lo", idx, [mu - cfg["sigma"] * sigma] * series.size)],
        title="Snapshot kurtosis and healthy band",
        xlabel="snapshot", ylabel="kurtosis"))
    return [cfg["input"]]


def cmd_featurize(cfg, run: _Run):
    record = dataio.load_pronostia_bearing(cfg["input"])
    if cfg["fpt"] == "auto":
        series = features.kurtosis_series(record)
        fpt = features.detect_fpt(series, features.FptConfig(
            baseline_count=cfg["baseline"]))
        if fpt is None:
            raise DataError("no degradation onset detected; cannot label")
    else:
        fpt = int(cfg["fpt"])
    samples = features.build_dataset(record, fpt, size=cfg["window"],
                                     stride=cfg["stride"], level=cfg["level"],
                                     denoise=cfg["denoise"])
    meta = {"window": cfg["window"], "stride": cfg["stride"],
            "level": cfg["level"], "denoise": cfg["denoise"]}
    out = run.path("dataset.bin")
    run.artifacts.append(Path(str(out) + ".json"))
    dataio.save_dataset(samples, out, bearing_id=record.bearing_id, fpt=fpt,
                        config=meta)
    return [cfg["input"]]


def _split_dataset(samples, holdout: float, seed: int):
    """Deterministic interleaved split covering the whole label range."""
    if holdout <= 0:
        return list(samples), []
    period = max(2, round(1.0 / holdout))
    offset = seed % period
    val = [s for i, s in enumerate(samples) if i % period == offset]
    train = [s for i, s in enumerate(samples) if i % period != offset]
    return train, val


def cmd_train(cfg, run: _Run):
    samples, _ = dataio.load_dataset(cfg["dataset"])
    train_set, val_set = _split_dataset(samples, cfg["val_fraction"], cfg["seed"])
    mcfg = model.config_from_preset(cfg["preset"])
    tcfg = training.TrainConfig(learning_rate=cfg["lr"],
                                batch_size=cfg["batch_size"],
                                epochs=cfg["epochs"], seed=cfg["seed"])
    lcfg = training.LossConfig(kind=cfg["loss"], lam=cfg["lam"])
    params, history = training.train(train_set, mcfg, tcfg, lcfg,
                                     val_dataset=val_set or None)
    dataio.save_checkpoint(params, mcfg, run.path("checkpoint.ckpt"))
    run.write_text("history.csv", _csv(
        [(h.epoch, h.train_loss, "" if h.val_mae is None else repr(h.val_mae))
         for h in history],
        ("epoch", "loss", "val_mae")))
    if history:
        epochs = [h.epoch for h in history]
        series = [("train loss", epochs, [h.train_loss for h in history])]
        if history[0].val_mae is not None:
            series.append(("val MAE", epochs, [h.val_mae for h in history]))
        run.write_text("history.svg", plotting.line_chart_svg(
            series, title="Training history", xlabel="epoch", ylabel="loss"))
    return [cfg["dataset"]]


def _evaluate(cfg):
    samples, _ = dataio.load_dataset(cfg["dataset"])
    params, mcfg = dataio.load_checkpoint(cfg["checkpoint"])
    preds = model.predict_batch(params, mcfg, samples)
    targets = np.array([s.label for s in samples])
    return samples, preds, targets


def cmd_eval(cfg, run: _Run):
    _, preds, targets = _evaluate(cfg)
    batch = training.PredictionBatch(preds, targets)
    run.write_json("metrics.json", training.metrics_report(batch))
    return [cfg["dataset"], cfg["checkpoint"]]


def cmd_predict(cfg, run: _Run):
    _, preds, targets = _evaluate(cfg)
    rows = [(i, float(t), float(p), float(p - t))
            for i, (p, t) in enumerate(zip(preds, targets))]
    run.write_text("predictions.csv",
                   _csv(rows, ("window_index", "true_rul", "pred_rul", "error")))
    idx = [r[0] for r in rows]
    run.write_text("rul_curve.svg", plotting.line_chart_svg(
        [("true RUL", idx, [r[1] for r in rows]),
         ("predicted RUL", idx, [r[2] for r in rows])],
        title="Predicted vs true RUL", xlabel="window", ylabel="normalized RUL"))
    return [cfg["dataset"], cfg["checkpoint"]]


def cmd_exp_loss(cfg, run: _Run):
    """Twin training: identical data and seed, MSE vs hinge-penalized loss."""
    samples, _ = dataio.load_dataset(cfg["dataset"])
    train_set, val_set = _split_dataset(samples, cfg["holdout"], cfg["seed"])
    if not val_set:
        raise DataError("exp-loss needs a nonzero holdout fraction")
    mcfg = model.config_from_preset(cfg["preset"])
    tcfg = training.TrainConfig(learning_rate=cfg["lr"],
                                batch_size=cfg["batch_size"],
                                epochs=cfg["epochs"], seed=cfg["seed"])
    targets = np.array([s.label for s in val_set])
    report = {}
    for kind in ("mse", "custom"):
        lcfg = training.LossConfig(kind=kind, lam=cfg["lam"])
        params, history = training.train(train_set, mcfg, tcfg, lcfg)
        preds = model.predict_batch(params, mcfg, val_set)
        report[kind] = training.metrics_report(
            training.PredictionBatch(preds, targets))
        run.write_text(f"history_{kind}.csv", _csv(
            [(h.epoch, h.train_loss) for h in history], ("epoch", "loss")))
    report["delta"] = {k: report["custom"][k] - report["mse"][k]
                       for k in ("mae", "score_mean", "late_fraction")}
    report["lambda"] = cfg["lam"]
    run.write_json("exp_loss.json", report)
    return [cfg["dataset"]]


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "fpt": cmd_fpt,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "exp-loss": cmd_exp_loss,
}

REQUIRED_INPUTS = {
    "ingest": ("input",), "fpt": ("input",), "featurize": ("input",),
    "train": ("dataset",), "eval": ("dataset", "checkpoint"),
    "predict": ("dataset", "checkpoint"), "exp-loss": ("dataset",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bearingrul",
        description="Bearing RUL pipeline: synthesize or ingest vibration "
                    "records, detect degradation onset, featurize, train and "
                    "evaluate.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, flags, epilog=None):
        p = sub.add_parser(name, help=help_text, epilog=epilog)
        p.add_argument("--outdir", required=True, help="output directory")
        p.add_argument("--config", default=None,
                       help="JSON file of flag defaults (flags override)")
        for flag, kind, help_s in flags:
            default = DEFAULTS[name][flag.replace("-", "_")]
            if kind is bool:
                p.add_argument(f"--{flag}", action="store_const", const=True,
                               default=None,
                               help=f"{help_s} (default {default})")
                p.add_argument(f"--no-{flag}", dest=flag.replace("-", "_"),
                               action="store_const", const=False, default=None,
                               help=argparse.SUPPRESS)
            else:
                p.add_argument(f"--{flag}", type=kind, default=None,
                               help=f"{help_s} (default {default})")
        return p

    add("synth", "generate a synthetic run-to-failure record", [
        ("snapshots", int, "number of snapshots"),
        ("samples", int, "samples per snapshot"),
        ("onset", int, "fault onset snapshot index"),
        ("growth", float, "impulse growth rate, noise sigmas per snapshot"),
        ("noise-std", float, "background noise standard deviation"),
        ("kurtosis", float, "healthy-stage kurtosis level"),
        ("impulses", int, "impulses per snapshot"),
        ("tone-level", float, "defect tone level relative to impulse height"),
        ("tone-low", float, "low defect tone frequency / sample rate"),
        ("tone-high", float, "high defect tone frequency / sample rate"),
        ("seed", int, "generator seed"),
        ("bearing-id", str, "record name (also the CSV folder name)"),
    ])
    add("ingest", "load a PRONOSTIA-style bearing folder and summarize it", [
        ("input", str, "bearing directory of acc_*.csv files"),
        ("hor-col", int, "horizontal acceleration column index"),
        ("ver-col", int, "vertical acceleration column index"),
    ])
    add("fpt", "kurtosis series and degradation-onset report", [
        ("input", str, "bearing directory"),
        ("channel", str, "horizontal, vertical or either"),
        ("baseline", int, "healthy baseline snapshot count"),
        ("sigma", float, "band width in baseline sigmas"),
        ("consecutive", int, "consecutive exceedances required"),
        ("denoise", bool, "denoise snapshots before kurtosis"),
    ])
    add("featurize", "build a labeled dataset from a bearing record", [
        ("input", str, "bearing directory"),
        ("fpt", str, "onset index or 'auto'"),
        ("window", int, "snapshots per window"),
        ("stride", int, "window stride in snapshots"),
        ("level", int, "wavelet packet decomposition level"),
        ("denoise", bool, "apply the denoising pipeline"),
        ("baseline", int, "baseline count for auto onset detection"),
    ])
    add("train", "train a model on a labeled dataset", [
        ("dataset", str, "dataset container path"),
        ("preset", str, "model preset: desk or paper"),
        ("loss", str, "loss kind: custom or mse"),
        ("lam", float, "late-prediction penalty weight (lambda)"),
        ("lr", float, "Adam learning rate"),
        ("batch-size", int, "samples per optimizer step"),
        ("epochs", int, "training epochs"),
        ("seed", int, "training seed"),
        ("val-fraction", float, "held-out fraction for per-epoch MAE"),
    ], epilog="the regression head uses dropout p=0.3 in both presets")
    add("eval", "evaluate a checkpoint on a dataset", [
        ("dataset", str, "dataset container path"),
        ("checkpoint", str, "checkpoint path"),
    ])
    add("predict", "per-window RUL predictions and curve plot", [
        ("dataset", str, "dataset container path"),
        ("checkpoint", str, "checkpoint path"),
    ])
    add("exp-loss", "twin training, MSE vs custom loss, on one seed", [
        ("dataset", str, "dataset container path"),
        ("preset", str, "model preset: desk or paper"),
        ("lam", float, "late-prediction penalty weight (lambda)"),
        ("lr", float, "Adam learning rate"),
        ("batch-size", int, "samples per optimizer step"),
        ("epochs", int, "training epochs per twin"),
        ("seed", int, "shared data/training seed"),
        ("holdout", float, "held-out fraction for the comparison"),
    ])

    rerun = sub.add_parser("rerun", help="re-execute a run from its manifest")
    rerun.add_argument("manifest", help="path to a manifest.json")
    rerun.add_argument("--outdir", required=True, help="output directory")
    return parser


def _resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key, value in file_cfg.items():
            if key not in cfg:
                raise DataError(f"config file: unknown option {key!r}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def execute(command: str, cfg: dict, outdir) -> None:
    missing = [k for k in REQUIRED_INPUTS.get(command, ()) if not cfg.get(k)]
    if missing:
        raise CliUsageError(f"{command}: missing required option(s) "
                            + ", ".join(f"--{m}" for m in missing))
    run = _Run(outdir)
    started = time.time()
    try:
        inputs = COMMANDS[command](cfg, run)
    except BaseException:
        run.discard_all()
        raise
    run.finish(command, cfg, inputs, started)


class CliUsageError(Exception):
    pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            execute(manifest["command"], manifest["config"], args.outdir)
        else:
            execute(args.command, _resolve_config(args.command, args), args.outdir)
    except CliUsageError as exc:
        print(f"UsageError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BearingRulError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
