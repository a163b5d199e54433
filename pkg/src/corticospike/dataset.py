"""Synthetic cocktail-party data, ingestion, windowing, and splits.

The synthetic forward model is linear delayed entrainment: every EEG channel
is attended envelope (delayed, scaled) plus a weaker copy of the unattended
envelope plus white noise. Envelopes come from amplitude-modulated noise via
the Hilbert transform, so with zero noise the attended-speaker label is
recoverable by delay-compensated correlation alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import signal as dsp
from .errors import ChannelNotFoundError, DegenerateInputError, ParameterError, ShapeError
from .tensorio import read_tensor, write_tensor  # noqa: F401  (re-exported)

__all__ = [
    "FS",
    "LABELS",
    "CHANNELS_16",
    "AUDITORY_8",
    "Trial",
    "SyntheticConfig",
    "Sample",
    "synth_trial",
    "select_channels",
    "build_input",
    "window_samples",
    "split_train_val",
    "write_tensor",
    "read_tensor",
    "save_trials",
    "load_trials",
    "read_manifest",
]

FS = 256.0
LABELS = ("F", "M")

# 10/20-system montage order used for synthetic 16-channel trials, and the
# 8-channel subset closest to the auditory cortex
CHANNELS_16 = [
    "P1", "PZ", "P2", "CP1", "CPZ", "CP2", "CZ", "C3",
    "C4", "T7", "T8", "FC3", "FC4", "F3", "F4", "FZ",
]
AUDITORY_8 = ["C3", "C4", "CZ", "CPZ", "CP1", "CP2", "P1", "P2"]


def default_channel_names(n_channels: int) -> list[str]:
    if n_channels == 16:
        return list(CHANNELS_16)
    if n_channels == 8:
        return list(AUDITORY_8)
    return [f"CH{i:02d}" for i in range(n_channels)]


@dataclass
class Trial:
    """One 20 s segment: multichannel EEG, two speech envelopes, a label."""

    eeg: np.ndarray          # channels x samples, 256 Hz
    env_f: np.ndarray        # female-speaker envelope, unit power
    env_m: np.ndarray        # male-speaker envelope, unit power
    label: str               # attended speaker, "F" or "M"
    channel_names: list[str]
    subject_id: str = "synthetic"
    session_kind: str = "calibration"

    def __post_init__(self):
        self.eeg = np.asarray(self.eeg, dtype=np.float32)
        self.env_f = np.asarray(self.env_f, dtype=np.float32)
        self.env_m = np.asarray(self.env_m, dtype=np.float32)
        if self.label not in LABELS:
            raise ParameterError(f"label must be one of {LABELS}, got {self.label!r}")
        n = self.eeg.shape[1]
        if self.env_f.shape != (n,) or self.env_m.shape != (n,):
            raise ShapeError("envelope lengths must equal the EEG sample count")
        if len(self.channel_names) != self.eeg.shape[0]:
            raise ShapeError("channel_names must match the EEG row count")

    @property
    def n_channels(self) -> int:
        return self.eeg.shape[0]

    @property
    def n_samples(self) -> int:
        return self.eeg.shape[1]


@dataclass
class SyntheticConfig:
    """Parameters of the synthetic entrainment model."""

    n_channels: int = 8
    duration_s: float = 20.0
    fs: float = FS
    attend_gain: float = 1.0       # alpha
    unattended_gain: float = 0.0   # rho, in [0, 1)
    noise_sigma: float = 0.0
    neural_delay_ms: float = 100.0
    spatial_weights: np.ndarray | None = None  # channels x 2 (F, M columns)
    seed: int = 0

    def __post_init__(self):
        if self.attend_gain <= 0:
            raise ParameterError("attend_gain must be positive")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be nonnegative")
        if not 0 <= self.unattended_gain < 1:
            raise ParameterError("unattended_gain must lie in [0, 1)")
        if self.neural_delay_ms < 0:
            raise ParameterError("neural_delay_ms must be nonnegative")
        if self.n_channels < 1:
            raise ParameterError("n_channels must be at least 1")
        if self.duration_s * self.fs < 256:
            raise ParameterError("duration must be at least one second")
        if self.spatial_weights is not None:
            w = np.asarray(self.spatial_weights, dtype=np.float64)
            if w.shape != (self.n_channels, 2):
                raise ShapeError(f"spatial_weights must be {self.n_channels}x2, got {w.shape}")
            self.spatial_weights = w


@dataclass
class Sample:
    """One decision window: assembled input matrix plus its label."""

    input: np.ndarray   # (C+2) x T, row 0 = env_f, rows 1..C = EEG, row C+1 = env_m
    label: str
    window_s: float

    def __post_init__(self):
        if self.label not in LABELS:
            raise ParameterError(f"label must be one of {LABELS}, got {self.label!r}")
        self.input = np.asarray(self.input)
        if self.input.ndim != 2 or self.input.shape[0] < 3:
            raise ShapeError("sample input must be (C+2) x T with at least one EEG row")
        if self.input.shape[1] != int(round(self.window_s * FS)):
            raise ShapeError(
                f"sample has {self.input.shape[1]} columns but window_s={self.window_s} "
                f"implies {int(round(self.window_s * FS))}"
            )


def _synth_envelope(rng: np.random.Generator, n: int, fs: float) -> np.ndarray:
    """Envelope of band-limited amplitude-modulated noise, unit power."""
    carrier = rng.standard_normal(n)
    bp = dsp.design_fir_bandpass(64, 2.0, min(40.0, fs / 2 - 1), fs)
    carrier = dsp.apply_fir(bp, dsp.Waveform(carrier, fs)).samples
    t = np.arange(n) / fs
    mod = np.ones(n)
    for _ in range(3):
        f = rng.uniform(0.5, 4.0)
        phase = rng.uniform(0, 2 * np.pi)
        mod = mod + rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * f * t + phase)
    mod = np.abs(mod) + 0.1
    env = dsp.hilbert_envelope(dsp.Waveform(mod * carrier, fs))
    return dsp.normalize_energy(env).samples


def _delayed(x: np.ndarray, shift: int) -> np.ndarray:
    if shift == 0:
        return x.copy()
    out = np.zeros_like(x)
    out[shift:] = x[:-shift]
    return out


def synth_trial(cfg: SyntheticConfig) -> Trial:
    """Generate one synthetic trial, deterministic given cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    attended = LABELS[int(rng.integers(0, 2))]
    n = int(round(cfg.duration_s * cfg.fs))
    env_f = _synth_envelope(rng, n, cfg.fs)
    env_m = _synth_envelope(rng, n, cfg.fs)
    delay = int(round(cfg.neural_delay_ms / 1000.0 * cfg.fs))
    weights = (
        cfg.spatial_weights
        if cfg.spatial_weights is not None
        else np.ones((cfg.n_channels, 2))
    )
    att_idx = 0 if attended == "F" else 1
    env_att = _delayed(env_f if attended == "F" else env_m, delay)
    env_un = _delayed(env_m if attended == "F" else env_f, delay)
    noise = rng.standard_normal((cfg.n_channels, n))
    eeg = (
        cfg.attend_gain * weights[:, att_idx, None] * env_att[None, :]
        + cfg.unattended_gain * weights[:, 1 - att_idx, None] * env_un[None, :]
        + cfg.noise_sigma * noise
    )
    return Trial(
        eeg=eeg,
        env_f=env_f,
        env_m=env_m,
        label=attended,
        channel_names=default_channel_names(cfg.n_channels),
    )


def select_channels(trial: Trial, names: list[str]) -> Trial:
    """Restrict a trial to the named channels, in the given order."""
    missing = [n for n in names if n not in trial.channel_names]
    if missing:
        raise ChannelNotFoundError(f"unknown channel(s): {', '.join(missing)}")
    rows = [trial.channel_names.index(n) for n in names]
    return replace(trial, eeg=trial.eeg[rows], channel_names=list(names))


def build_input(trial: Trial) -> np.ndarray:
    """Stack envelopes around the EEG: row 0 = env_f, rows 1..C = EEG, row C+1 = env_m."""
    n = trial.eeg.shape[1]
    if trial.env_f.shape != (n,) or trial.env_m.shape != (n,):
        raise ShapeError("envelope and EEG lengths differ")
    return np.vstack([trial.env_f[None, :], trial.eeg, trial.env_m[None, :]]).astype(np.float32)


def window_samples(trials: list[Trial], window_s: float) -> list[Sample]:
    """Cut every trial into non-overlapping decision windows (remainder discarded)."""
    width = window_s * FS
    if abs(width - round(width)) > 1e-9:
        raise ParameterError(f"window of {window_s}s is not an integer number of samples at {FS} Hz")
    width = int(round(width))
    if width < 1:
        raise ParameterError("window must be positive")
    samples = []
    for trial in trials:
        if width > trial.n_samples:
            raise ParameterError(
                f"window of {window_s}s exceeds trial length {trial.n_samples / FS}s"
            )
        full = build_input(trial)
        for i in range(trial.n_samples // width):
            samples.append(
                Sample(input=full[:, i * width : (i + 1) * width], label=trial.label,
                       window_s=window_s)
            )
    return samples


def split_train_val(samples: list[Sample], ratio: float, seed: int):
    """Seeded, label-stratified split at floor(ratio * N)."""
    if not samples:
        raise DegenerateInputError("cannot split an empty sample list")
    if not 0 < ratio < 1:
        raise ParameterError(f"ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    target_total = int(np.floor(ratio * len(samples)))
    counts = {lab: sum(1 for s in samples if s.label == lab) for lab in LABELS}
    quota = {lab: int(np.floor(ratio * counts[lab])) for lab in LABELS}
    leftover = target_total - sum(quota.values())
    if leftover > 0:
        # hand the rounding remainder to the classes with the largest fractions
        fractions = sorted(
            LABELS, key=lambda lab: (ratio * counts[lab]) % 1.0, reverse=True
        )
        for lab in fractions[:leftover]:
            quota[lab] += 1
    train, val = [], []
    taken = {lab: 0 for lab in LABELS}
    for idx in order:
        lab = samples[idx].label
        if taken[lab] < quota[lab]:
            train.append(samples[idx])
            taken[lab] += 1
        else:
            val.append(samples[idx])
    return train, val


# ---------------------------------------------------------------------------
# manifest-based storage: one tensor file per trial holding the assembled
# (C+2) x T input matrix, plus a CSV manifest

_MANIFEST_FIELDS = ["path", "label", "subject", "session"]


def save_trials(out_dir, trials: list[Trial], manifest_name: str = "manifest.csv") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, trial in enumerate(trials):
        name = f"trial_{i:04d}.aadt"
        write_tensor(out_dir / name, build_input(trial))
        records.append(
            {"path": name, "label": trial.label, "subject": trial.subject_id,
             "session": trial.session_kind}
        )
    manifest = out_dir / manifest_name
    with open(manifest, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(records)
    return manifest


def read_manifest(manifest_path) -> list[dict]:
    manifest_path = Path(manifest_path)
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _MANIFEST_FIELDS:
            raise ParameterError(
                f"manifest must have columns {_MANIFEST_FIELDS}, got {reader.fieldnames}"
            )
        records = list(reader)
    for rec in records:
        if rec["label"] not in LABELS:
            raise ParameterError(f"manifest label must be F or M, got {rec['label']!r}")
    return records


def load_trials(manifest_path, subject: str | None = None, session: str | None = None) -> list[Trial]:
    """Load trials listed in a manifest, optionally filtered by subject/session."""
    manifest_path = Path(manifest_path)
    trials = []
    for rec in read_manifest(manifest_path):
        if subject is not None and rec["subject"] != subject:
            continue
        if session is not None and rec["session"] != session:
            continue
        matrix = read_tensor(manifest_path.parent / rec["path"])
        if matrix.ndim != 2 or matrix.shape[0] < 3:
            raise ShapeError(f"{rec['path']}: expected a (C+2) x T matrix")
        n_eeg = matrix.shape[0] - 2
        trials.append(
            Trial(
                eeg=matrix[1:-1],
                env_f=matrix[0],
                env_m=matrix[-1],
                label=rec["label"],
                channel_names=default_channel_names(n_eeg),
                subject_id=rec["subject"],
                session_kind=rec["session"],
            )
        )
    return trials
