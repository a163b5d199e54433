"""Command-line orchestration: synth, train, bench, and infer.

Run configuration is an INI document with sections [data], [arch], [train],
[adm], and [quant]; every field has a default and unknown keys are rejected.
Exit codes: 0 success, 2 usage/config/data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import pipeline as pl
from .errors import ParameterError, TrainingError
from .tensorio import read_tensor, write_tensor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3

THREADS_ENV = "CORTICOSPIKE_THREADS"

_SCHEMA = {
    "data": {
        "n_trials": ("int", 60),
        "test_trials": ("int", 20),
        "n_channels": ("int", 8),
        "duration_s": ("float", 20.0),
        "attend_gain": ("float", 1.0),
        "unattended_gain": ("float", 0.0),
        "noise_sigma": ("float", 0.0),
        "neural_delay_ms": ("float", 100.0),
        "manifest": ("str", ""),
        "subject": ("str", ""),
        "channels": ("str", ""),  # comma-separated channel subset
    },
    "arch": {
        "eeg_channels": ("int", 8),
        "conv_out_channels": ("int", 40),
        "kernel": ("int", 64),
        "stride": ("int", 64),
        "window_s": ("float", 1.0),
        "windows": ("str", ""),  # matrix mode: comma-separated window lengths
        "channel_counts": ("str", ""),  # matrix mode
    },
    "train": {
        "model": ("str", "hybrid"),  # hybrid | reference
        "epochs": ("int", 50),
        "epochs_b": ("int", 100),
        "batch_size": ("int", 32),
        "lr": ("float", 1e-3),
        "val_ratio": ("float", 0.8),
        "seed": ("int", -1),
        "n_seeds": ("int", 3),
        "lasso_lambda": ("float", 0.0),
        "kinds": ("str", "hybrid,reference"),  # matrix mode
    },
    "adm": {
        "threshold": ("float", 0.45),
        "grid_search": ("str", "off"),  # off | proxy | accuracy
        "grid": ("str", ""),  # comma-separated candidate thresholds
        "search_epochs": ("int", 8),
    },
    "quant": {
        "bits": ("int", 32),
    },
}


@dataclass
class RunConfig:
    data: dict = field(default_factory=dict)
    arch: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    adm: dict = field(default_factory=dict)
    quant: dict = field(default_factory=dict)


def _coerce(section, key, kind, raw):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw)
    except ValueError:
        raise ParameterError(f"[{section}] {key}: cannot parse {raw!r} as {kind}")


def load_config(path: str | None) -> RunConfig:
    """Parse and validate an INI run configuration; missing fields default."""
    cfg = RunConfig()
    parser = configparser.ConfigParser()
    if path is not None:
        if not Path(path).exists():
            raise ParameterError(f"config file not found: {path}")
        parser.read(path)
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ParameterError(f"unknown config section [{section}]")
            for key in parser[section]:
                if key not in _SCHEMA[section]:
                    raise ParameterError(f"unknown key {key!r} in section [{section}]")
    for section, fields in _SCHEMA.items():
        values = {}
        for key, (kind, default) in fields.items():
            if path is not None and parser.has_option(section, key):
                values[key] = _coerce(section, key, kind, parser.get(section, key))
            else:
                values[key] = default
        setattr(cfg, section, values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    d = cfg.data
    if d["n_trials"] < 1 or d["test_trials"] < 0:
        raise ParameterError("[data] n_trials must be >= 1 and test_trials >= 0")
    if d["noise_sigma"] < 0:
        raise ParameterError("[data] noise_sigma must be nonnegative")
    if not 0 <= d["unattended_gain"] < 1:
        raise ParameterError("[data] unattended_gain must lie in [0, 1)")
    if d["attend_gain"] <= 0:
        raise ParameterError("[data] attend_gain must be positive")
    if cfg.adm["threshold"] <= 0:
        raise ParameterError("[adm] threshold must be positive")
    if cfg.quant["bits"] not in (16, 32):
        raise ParameterError("[quant] bits must be 16 or 32")
    if not 0 < cfg.train["val_ratio"] < 1:
        raise ParameterError("[train] val_ratio must lie in (0, 1)")
    if cfg.train["model"] not in ("hybrid", "reference"):
        raise ParameterError("[train] model must be 'hybrid' or 'reference'")


def _require_seed(cfg: RunConfig, args) -> int:
    seed = args.seed if args.seed is not None else cfg.train["seed"]
    if seed is None or seed < 0:
        raise ParameterError("a nonnegative seed is required (--seed or [train] seed)")
    return int(seed)


def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _arch_from_config(cfg: RunConfig) -> pl.ArchConfig:
    a = cfg.arch
    return pl.ArchConfig(
        eeg_channels=a["eeg_channels"],
        conv_out_channels=a["conv_out_channels"],
        kernel=a["kernel"],
        stride=a["stride"],
        window_s=a["window_s"],
    )


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    seed = _require_seed(cfg, args)
    out_dir = Path(args.out)
    d = cfg.data
    trials = []
    for i in range(d["n_trials"] + d["test_trials"]):
        trial = ds.synth_trial(
            ds.SyntheticConfig(
                n_channels=d["n_channels"],
                duration_s=d["duration_s"],
                attend_gain=d["attend_gain"],
                unattended_gain=d["unattended_gain"],
                noise_sigma=d["noise_sigma"],
                neural_delay_ms=d["neural_delay_ms"],
                seed=seed + i,
            )
        )
        trial.session_kind = "calibration" if i < d["n_trials"] else "online"
        trials.append(trial)
    manifest = ds.save_trials(out_dir, trials)
    print(f"wrote {len(trials)} trials to {out_dir} (manifest: {manifest.name})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def _load_dataset(cfg: RunConfig):
    manifest = cfg.data["manifest"]
    if not manifest:
        raise ParameterError("[data] manifest is required for this command")
    subject = cfg.data["subject"] or None
    cal = ds.load_trials(manifest, subject=subject, session="calibration")
    test = ds.load_trials(manifest, subject=subject, session="online")
    if not cal:
        raise ParameterError(f"no calibration trials found in {manifest}")
    names = cfg.data["channels"]
    if names:
        wanted = [n.strip() for n in names.split(",") if n.strip()]
        cal = [ds.select_channels(t, wanted) for t in cal]
        test = [ds.select_channels(t, wanted) for t in test]
    return cal, test


def _metrics_lines(history: dict, prefix: str) -> list[str]:
    lines = []
    for i in range(len(history["loss"])):
        val = history["val_acc"][i] if history["val_acc"] else float("nan")
        lines.append(
            f"{prefix} epoch {i:03d} loss {history['loss'][i]:.6f} "
            f"train_acc {history['train_acc'][i]:.4f} val_acc {val:.4f}"
        )
    return lines


def _train_single(cfg: RunConfig, seed: int, out_dir: Path, lambda_sweep: bool) -> int:
    arch = _arch_from_config(cfg)
    cal, test = _load_dataset(cfg)
    t = cfg.train
    samples = ds.window_samples(cal, arch.window_s)
    train_set, val_set = ds.split_train_val(samples, t["val_ratio"], seed)
    test_set = ds.window_samples(test, arch.window_s) if test else None
    log: list[str] = []

    if t["model"] == "reference":
        lam = t["lasso_lambda"]
        if lambda_sweep:
            lam, sweep = pl.lambda_sweep(
                arch, train_set, val_set, seed,
                epochs=max(10, t["epochs"] // 2), batch_size=t["batch_size"], lr=t["lr"],
            )
            for lam_i, acc in sweep:
                log.append(f"lambda_sweep lambda {lam_i:.2e} train_acc {acc:.4f}")
            log.append(f"lambda_selected {lam:.2e}")
        model, history = pl.train_reference(
            arch, lam, train_set, val_set, seed,
            epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"],
        )
        log.extend(_metrics_lines(history, "reference"))
    else:
        phase_a = pl.train_phase_a(
            arch, train_set, val_set, seed,
            epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"],
        )
        log.extend(_metrics_lines(phase_a.history, "phase_a"))
        threshold = cfg.adm["threshold"]
        mode = cfg.adm["grid_search"]
        if mode != "off":
            grid = None
            if cfg.adm["grid"]:
                grid = [float(v) for v in cfg.adm["grid"].split(",")]
            threshold, report = pl.search_threshold(
                phase_a, train_set, val_set, seed,
                candidates=grid, objective=mode, epochs=cfg.adm["search_epochs"],
            )
            for point in report:
                log.append(
                    f"grid threshold {point.threshold:.2f} score {point.score:.4f} "
                    f"event_rate {point.event_rate:.4f}"
                )
            log.append(f"grid_selected {threshold:.2f}")
        model, history = pl.train_phase_b(
            phase_a, threshold, train_set, val_set, seed,
            epochs=t["epochs_b"], batch_size=t["batch_size"], lr=t["lr"],
        )
        log.extend(_metrics_lines(history, "phase_b"))

    if cfg.quant["bits"] < 32:
        model = pl.quantize_weights(model, cfg.quant["bits"])
        log.append(f"quantized weights to {cfg.quant['bits']} bits")

    if test_set:
        metrics = pl.evaluate(model, test_set)
        log.append(
            f"test_accuracy {metrics['accuracy']:.4f} test_f1 {metrics['f1']:.4f}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    pl.save_checkpoint(out_dir / "checkpoint", model)
    (out_dir / "metrics.txt").write_text("\n".join(log) + "\n")
    print("\n".join(log))
    print(f"checkpoint written to {out_dir / 'checkpoint'}")
    return EXIT_OK


def _train_matrix(cfg: RunConfig, seed: int, out_dir: Path) -> int:
    cal, test = _load_dataset(cfg)
    windows = [float(v) for v in (cfg.arch["windows"] or str(cfg.arch["window_s"])).split(",")]
    channel_counts = [
        int(v) for v in (cfg.arch["channel_counts"] or str(cfg.arch["eeg_channels"])).split(",")
    ]
    kinds = [k.strip() for k in cfg.train["kinds"].split(",") if k.strip()]
    rows = pl.run_experiment_matrix(
        windows, channel_counts, kinds, cfg.train["n_seeds"], cal, test,
        workers=_thread_cap(),
        conv_out_channels=cfg.arch["conv_out_channels"],
        threshold=cfg.adm["threshold"],
        epochs_a=cfg.train["epochs"],
        epochs_b=cfg.train["epochs_b"],
        lasso_lambda=cfg.train["lasso_lambda"],
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    header = f"{'window_s':>9} {'channels':>9} {'kind':>10} {'n_seeds':>8} {'accuracy':>9} {'f1':>7}"
    lines = [header]
    csv_lines = ["window_s,channels,kind,n_seeds,mean_accuracy,mean_f1"]
    for r in rows:
        lines.append(
            f"{r['window_s']:>9} {r['channels']:>9} {r['kind']:>10} {r['n_seeds']:>8} "
            f"{r['mean_accuracy']:>9.4f} {r['mean_f1']:>7.4f}"
        )
        csv_lines.append(
            f"{r['window_s']},{r['channels']},{r['kind']},{r['n_seeds']},"
            f"{r['mean_accuracy']:.6f},{r['mean_f1']:.6f}"
        )
    (out_dir / "matrix.txt").write_text("\n".join(lines) + "\n")
    (out_dir / "matrix.csv").write_text("\n".join(csv_lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = _require_seed(cfg, args)
    out_dir = Path(args.out)
    if args.matrix:
        return _train_matrix(cfg, seed, out_dir)
    return _train_single(cfg, seed, out_dir, args.lambda_sweep)


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    arch40 = _arch_from_config(cfg)
    bits = cfg.quant["bits"]

    model = None
    samples = None
    if args.checkpoint:
        model = pl.load_checkpoint(args.checkpoint)
        arch40 = model.arch
        probe_cfg = ds.SyntheticConfig(
            n_channels=model.arch.eeg_channels,
            duration_s=max(2.0, model.arch.window_s),
            noise_sigma=cfg.data["noise_sigma"] or 0.5,
            unattended_gain=cfg.data["unattended_gain"] or 0.3,
            seed=cfg.train["seed"] if cfg.train["seed"] >= 0 else 0,
        )
        trial = ds.synth_trial(probe_cfg)
        samples = ds.window_samples([trial], model.arch.window_s)

    hybrid_cfg = pl.ArchConfig(
        eeg_channels=arch40.eeg_channels,
        conv_out_channels=cfg.arch["conv_out_channels"],
        kernel=arch40.kernel, stride=arch40.stride, window_s=arch40.window_s,
    )
    hybrid = pl.footprint_report(hybrid_cfg, "hybrid", bits, model=model, samples=samples)
    ref_cfg = pl.ArchConfig(
        eeg_channels=arch40.eeg_channels, conv_out_channels=40,
        kernel=arch40.kernel, stride=arch40.stride, window_s=arch40.window_s,
    )
    reference = pl.footprint_report(ref_cfg, "reference", 32)

    print(f"hybrid   params {hybrid.params:6d}  bits {hybrid.weight_bits:2d}  "
          f"bytes {hybrid.weight_bytes:7d}  conv_macs {hybrid.conv_macs_per_window}")
    print(f"reference params {reference.params:6d}  bits {reference.weight_bits:2d}  "
          f"bytes {reference.weight_bytes:7d}  conv_macs {reference.conv_macs_per_window}")
    byte_red = pl.reduction_percent(hybrid.weight_bytes, reference.weight_bytes)
    param_red = pl.reduction_percent(hybrid.params, reference.params)
    print(f"memory footprint reduction: {byte_red:.1f}%")
    print(f"parameter reduction: {param_red:.2f}%")
    if not np.isnan(hybrid.event_sparsity):
        print(f"event sparsity: {hybrid.event_sparsity:.4f}")
        print(f"synaptic events per window: {hybrid.synaptic_events_per_window:.1f}")

    if model is not None and samples:
        start = time.perf_counter()
        for s in samples:
            pl.predict(model, [s])
        elapsed = (time.perf_counter() - start) / len(samples)
        print(f"inference wall clock per window: {elapsed * 1000:.3f} ms")
    return EXIT_OK


# ---------------------------------------------------------------------------
# infer


def cmd_infer(args) -> int:
    model = pl.load_checkpoint(args.checkpoint)
    if not isinstance(model, pl.HybridModel):
        raise ParameterError("infer requires a hybrid checkpoint")
    matrix = read_tensor(args.sample)
    sample = ds.Sample(input=matrix, label="F", window_s=matrix.shape[1] / ds.FS)
    result = pl.infer(model, sample)
    print(result.label)
    print(result.trace.as_table(), end="")
    if args.raster:
        write_tensor(args.raster, result.events.astype(np.int16))
        print(f"raster written to {args.raster}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corticospike",
        description="Auditory-attention decoding with a hybrid CNN-SNN pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", default=None)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train a model (or the full matrix)")
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--matrix", action="store_true")
    p_train.add_argument("--lambda-sweep", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_bench = sub.add_parser("bench", help="footprint and latency report")
    p_bench.add_argument("--config", default=None)
    p_bench.add_argument("--checkpoint", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_infer = sub.add_parser("infer", help="classify one sample file")
    p_infer.add_argument("--checkpoint", required=True)
    p_infer.add_argument("--sample", required=True)
    p_infer.add_argument("--raster", default=None)
    p_infer.set_defaults(func=cmd_infer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
