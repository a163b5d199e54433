"""Model assembly, two-phase training, quantization, metrics, and footprints.

Phase A trains a plain CNN (conv + batch norm + pooling + dense head); its
conv and batch-norm weights are then frozen, their outputs delta-modulated
into events, and phase B trains the two spiking layers on those events. The
reference CNN (no batch norm, optional LASSO penalty) trains end to end.
"""

from __future__ import annotations

import copy
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import neuralcore as nc
from .adm import AdmConfig, adm_encode_arrays, event_rate
from .dataset import FS, LABELS, Sample
from .errors import ParameterError, ShapeError, TensorFormatError, TrainingError
from .snn import (
    LifParams,
    SpikingDense,
    init_spiking_dense,
    predict_events,
    snn_forward_sequence,
    train_snn,
)
from .tensorio import read_tensor, write_tensor

__all__ = [
    "ArchConfig",
    "HybridModel",
    "ReferenceCnn",
    "PhaseAResult",
    "FootprintReport",
    "InferResult",
    "count_params",
    "train_phase_a",
    "train_phase_b",
    "train_reference",
    "search_threshold",
    "lambda_sweep",
    "infer",
    "predict",
    "evaluate",
    "accuracy_f1",
    "quantize_tensor",
    "quantize_weights",
    "footprint_report",
    "reduction_percent",
    "run_experiment_matrix",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class ArchConfig:
    eeg_channels: int = 8
    conv_out_channels: int = 40
    kernel: int = 64
    stride: int = 64
    window_s: float = 1.0

    def __post_init__(self):
        if self.eeg_channels < 1:
            raise ParameterError("eeg_channels must be at least 1")
        if self.conv_out_channels < 1:
            raise ParameterError("conv_out_channels must be at least 1")
        if self.kernel < 1 or self.stride < 1:
            raise ParameterError("kernel and stride must be positive")
        if self.window_samples < self.kernel:
            raise ParameterError("decision window must hold at least one kernel span")

    @property
    def in_channels(self) -> int:
        return self.eeg_channels + 2

    @property
    def snn_width(self) -> int:
        # ON and OFF events per conv channel
        return 2 * self.conv_out_channels

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * FS))

    @property
    def steps_per_window(self) -> int:
        return (self.window_samples - self.kernel) // self.stride + 1

    def lif_params(self) -> LifParams:
        return LifParams(dt_s=self.stride / FS)


@dataclass
class HybridModel:
    conv: nc.Conv1dLayer
    bn: nc.BatchNorm1d
    adm: AdmConfig
    snn_l1: SpikingDense
    snn_l2: SpikingDense
    arch: ArchConfig
    mode: str = "infer"
    weight_bits: int = 32


@dataclass
class ReferenceCnn:
    conv: nc.Conv1dLayer
    fc1: nc.DenseLayer
    fc2: nc.DenseLayer
    loss: nc.LossConfig
    arch: ArchConfig
    weight_bits: int = 32


@dataclass
class PhaseAResult:
    conv: nc.Conv1dLayer
    bn: nc.BatchNorm1d
    fc1: nc.DenseLayer
    fc2: nc.DenseLayer
    history: dict
    arch: ArchConfig


@dataclass
class InferResult:
    label: str
    trace: object
    events: np.ndarray  # 2K x L uint8


@dataclass
class FootprintReport:
    params: int
    weight_bits: int
    weight_bytes: int
    conv_macs_per_window: int
    synaptic_events_per_window: float = math.nan
    event_sparsity: float = math.nan


def count_params(cfg: ArchConfig, model_kind: str) -> int:
    """Stored learnable parameters, matching the published architecture table."""
    c_in = cfg.in_channels
    k = cfg.conv_out_channels
    conv = c_in * cfg.kernel * k + k
    if model_kind == "hybrid":
        bn = 4 * k
        snn = (2 * k * 2 * k + 2 * k) + (2 * k * 2 + 2)
        return conv + bn + snn
    if model_kind == "reference":
        head = (k * k + k) + (k * 2 + 2)
        return conv + head
    raise ParameterError(f"model_kind must be 'hybrid' or 'reference', got {model_kind!r}")


# ---------------------------------------------------------------------------
# sample batching


def samples_to_arrays(samples: list[Sample]):
    if not samples:
        raise ParameterError("sample list must not be empty")
    x = np.stack([s.input for s in samples]).astype(np.float32)
    y = np.array([LABELS.index(s.label) for s in samples], dtype=np.int64)
    return x, y


def _check_input_shape(cfg: ArchConfig, x: np.ndarray):
    if x.shape[1] != cfg.in_channels:
        raise ShapeError(
            f"samples have {x.shape[1]} rows, architecture expects {cfg.in_channels} "
            f"({cfg.eeg_channels} EEG + 2 envelopes)"
        )


# ---------------------------------------------------------------------------
# phase A: CNN with batch norm, trained end to end, head discarded afterwards


def _head_forward(conv, bn, fc1, fc2, x, train: bool):
    y = nc.conv1d_forward(conv, x)
    if bn is not None:
        bn.mode = "train" if train else "eval"
        y, bn_cache = nc.batchnorm_forward(bn, y)
    else:
        bn_cache = None
    pooled = nc.avgpool_global(y)
    hid, c1 = nc.dense_forward(fc1, pooled)
    probs, c2 = nc.dense_forward(fc2, hid)
    return probs, (y, bn_cache, pooled, c1, c2)


def _head_backward(conv, bn, fc1, fc2, x, caches, g_logits, lasso=0.0):
    y, bn_cache, pooled, c1, c2 = caches
    g_hid, gw2, gb2 = nc.dense_backward(fc2, c2, g_logits)
    g_pool, gw1, gb1 = nc.dense_backward(fc1, c1, g_hid)
    n_l = y.shape[-1]
    g_y = np.repeat(g_pool[..., None], n_l, axis=-1) / n_l
    grads = {}
    if bn is not None:
        g_y, ggamma, gbeta = nc.batchnorm_backward(bn, bn_cache, g_y)
        grads["bn_gamma"] = ggamma
        grads["bn_beta"] = gbeta
    _, gwc, gbc = nc.conv1d_backward(conv, x, g_y.astype(conv.weights.dtype))
    if lasso > 0:
        gwc = gwc + lasso * np.sign(conv.weights)
        gw1 = gw1 + lasso * np.sign(fc1.weights)
        gw2 = gw2 + lasso * np.sign(fc2.weights)
    grads.update(
        {"conv_w": gwc, "conv_b": gbc, "fc1_w": gw1, "fc1_b": gb1, "fc2_w": gw2, "fc2_b": gb2}
    )
    return grads


def _cnn_params(conv, bn, fc1, fc2):
    params = {
        "conv_w": conv.weights, "conv_b": conv.bias,
        "fc1_w": fc1.weights, "fc1_b": fc1.bias,
        "fc2_w": fc2.weights, "fc2_b": fc2.bias,
    }
    if bn is not None:
        params["bn_gamma"] = bn.gamma
        params["bn_beta"] = bn.beta
    return params


def _train_cnn(
    cfg, train_samples, val_samples, seed, *, with_bn, lasso, epochs, batch_size, lr, dtype
):
    x_train, y_train = samples_to_arrays(train_samples)
    x_val, y_val = samples_to_arrays(val_samples)
    _check_input_shape(cfg, x_train)
    rng = np.random.default_rng(seed)
    k = cfg.conv_out_channels
    conv = nc.init_conv(cfg.in_channels, k, cfg.kernel, cfg.stride, rng, dtype)
    bn = nc.init_batchnorm(k, dtype) if with_bn else None
    fc1 = nc.init_dense(k, k, rng, activation="relu", dtype=dtype)
    fc2 = nc.init_dense(k, 2, rng, activation="softmax", dtype=dtype)
    opt = nc.AdamState(lr=lr)
    history = {"loss": [], "train_acc": [], "val_acc": []}
    best = None
    n = x_train.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x_train[idx], y_train[idx]
            probs, caches = _head_forward(conv, bn, fc1, fc2, xb, train=True)
            loss = nc.cross_entropy(probs, yb)
            if lasso > 0:
                loss += nc.l1_penalty([conv.weights, fc1.weights, fc2.weights], lasso)
            if not np.isfinite(loss):
                raise TrainingError("training loss became non-finite")
            epoch_losses.append(loss)
            onehot = np.zeros_like(probs)
            onehot[np.arange(yb.size), yb] = 1.0
            g_logits = ((probs - onehot) / yb.size).astype(dtype)
            grads = _head_backward(conv, bn, fc1, fc2, xb, caches, g_logits, lasso)
            nc.adam_step(opt, _cnn_params(conv, bn, fc1, fc2), grads)
        probs_tr, _ = _head_forward(conv, bn, fc1, fc2, x_train, train=False)
        probs_va, _ = _head_forward(conv, bn, fc1, fc2, x_val, train=False)
        train_acc = float((probs_tr.argmax(axis=1) == y_train).mean())
        val_acc = float((probs_va.argmax(axis=1) == y_val).mean())
        history["loss"].append(float(np.mean(epoch_losses)))
        history["train_acc"].append(train_acc)
        history["val_acc"].append(val_acc)
        if best is None or val_acc > best[0]:
            best = (val_acc, copy.deepcopy((conv, bn, fc1, fc2)))
    _, (conv, bn, fc1, fc2) = best
    return conv, bn, fc1, fc2, history


def train_phase_a(
    cfg: ArchConfig, train_samples, val_samples, seed: int, *,
    epochs: int = 50, batch_size: int = 32, lr: float = 1e-3, dtype=np.float32,
) -> PhaseAResult:
    """Train conv + batch norm + pooled dense head; keep the best-validation
    epoch. The head exists only to train the front end and is discarded when
    the hybrid model is assembled."""
    conv, bn, fc1, fc2, history = _train_cnn(
        cfg, train_samples, val_samples, seed,
        with_bn=True, lasso=0.0, epochs=epochs, batch_size=batch_size, lr=lr, dtype=dtype,
    )
    bn.mode = "eval"
    return PhaseAResult(conv=conv, bn=bn, fc1=fc1, fc2=fc2, history=history, arch=cfg)


def train_reference(
    cfg: ArchConfig, lasso_lambda: float, train_samples, val_samples, seed: int, *,
    epochs: int = 50, batch_size: int = 32, lr: float = 1e-3, dtype=np.float32,
) -> tuple[ReferenceCnn, dict]:
    """Train the reference CNN end to end, optionally with the L1 penalty."""
    if lasso_lambda < 0:
        raise ParameterError("lasso_lambda must be nonnegative")
    conv, _, fc1, fc2, history = _train_cnn(
        cfg, train_samples, val_samples, seed,
        with_bn=False, lasso=lasso_lambda, epochs=epochs, batch_size=batch_size,
        lr=lr, dtype=dtype,
    )
    model = ReferenceCnn(
        conv=conv, fc1=fc1, fc2=fc2, loss=nc.LossConfig(lasso_lambda=lasso_lambda), arch=cfg
    )
    return model, history


# ---------------------------------------------------------------------------
# phase B: freeze conv/bn, delta-modulate their outputs, train the SNN


def encode_events(conv, bn, threshold: float, x: np.ndarray) -> np.ndarray:
    """ADM-encode conv + batch-norm (eval) outputs into (n, 2K, L) events."""
    single = x.ndim == 2
    xb = x[None] if single else x
    y = nc.conv1d_forward(conv, xb)
    bn.mode = "eval"
    y, _ = nc.batchnorm_forward(bn, y)
    events = []
    for i in range(y.shape[0]):
        on, off = adm_encode_arrays(y[i], threshold)
        events.append(np.vstack([on, off]))
    stacked = np.stack(events)
    return stacked[0] if single else stacked


def train_phase_b(
    phase_a: PhaseAResult, threshold: float, train_samples, val_samples, seed: int, *,
    epochs: int = 100, batch_size: int = 32, lr: float = 2e-3, gamma: float = 0.05,
    per_step_loss: bool = True,
) -> tuple[HybridModel, dict]:
    """Train the two spiking layers on events from the frozen front end and
    assemble the inference-mode hybrid model.

    Every window contributes one training frame per time step by default
    (per_step_loss); pass False to train on final frames only."""
    cfg = phase_a.arch
    x_train, y_train = samples_to_arrays(train_samples)
    x_val, y_val = samples_to_arrays(val_samples)
    _check_input_shape(cfg, x_train)
    conv = copy.deepcopy(phase_a.conv)
    bn = copy.deepcopy(phase_a.bn)
    bn.mode = "eval"
    ev_train = encode_events(conv, bn, threshold, x_train)
    ev_val = encode_events(conv, bn, threshold, x_val)
    lif = cfg.lif_params()
    rng = np.random.default_rng(seed)
    width = cfg.snn_width
    l1 = init_spiking_dense(width, width, lif, rng)
    l2 = init_spiking_dense(width, 2, lif, rng)
    history = train_snn(
        l1, l2, ev_train, y_train,
        val_events=ev_val, val_labels=y_val,
        epochs=epochs, batch_size=batch_size, lr=lr, seed=seed, gamma=gamma,
        per_step_loss=per_step_loss,
    )
    model = HybridModel(
        conv=conv, bn=bn, adm=AdmConfig(threshold=threshold),
        snn_l1=l1, snn_l2=l2, arch=cfg, mode="infer",
    )
    return model, history


def search_threshold(
    phase_a: PhaseAResult, train_samples, val_samples, seed: int, *,
    candidates=None, objective: str = "accuracy", epochs: int = 8,
):
    """Grid-search the ADM threshold against a short phase-B run (objective
    'accuracy') or the cheap event-rate proxy ('proxy')."""
    from .adm import DEFAULT_GRID, grid_search_threshold, proxy_objective

    candidates = list(candidates) if candidates is not None else list(DEFAULT_GRID)
    if objective == "proxy":
        x_val, _ = samples_to_arrays(val_samples)
        conv = phase_a.conv
        bn = copy.deepcopy(phase_a.bn)
        bn.mode = "eval"
        y = nc.conv1d_forward(conv, x_val)
        y, _ = nc.batchnorm_forward(bn, y)
        flat = y.transpose(1, 0, 2).reshape(y.shape[1], -1)
        return grid_search_threshold(candidates, proxy_objective(flat))
    if objective != "accuracy":
        raise ParameterError(f"objective must be 'accuracy' or 'proxy', got {objective!r}")

    def run(threshold):
        model, history = train_phase_b(
            phase_a, threshold, train_samples, val_samples, seed, epochs=epochs
        )
        x_val, _ = samples_to_arrays(val_samples)
        ev = encode_events(model.conv, model.bn, threshold, x_val)
        best_val = max(history["val_acc"]) if history["val_acc"] else 0.0
        rate = float(np.mean([event_rate((e[: e.shape[0] // 2], e[e.shape[0] // 2 :])) for e in ev]))
        return best_val, rate

    return grid_search_threshold(candidates, run)


def lambda_sweep(
    cfg: ArchConfig, train_samples, val_samples, seed: int, *,
    epochs: int = 30, batch_size: int = 32, lr: float = 1e-3, min_train_acc: float = 0.6,
):
    """Doubling sweep of the L1 strength from 1e-6 up to 1e-1; picks the
    largest value whose final training accuracy stays above the floor."""
    results = []
    lam = 1e-6
    while lam <= 1e-1:
        _, history = train_reference(
            cfg, lam, train_samples, val_samples, seed,
            epochs=epochs, batch_size=batch_size, lr=lr,
        )
        results.append((lam, history["train_acc"][-1]))
        lam *= 2
    chosen = 0.0
    for lam, acc in results:
        if acc > min_train_acc and lam > chosen:
            chosen = lam
    return chosen, results


# ---------------------------------------------------------------------------
# inference and evaluation


def infer(model: HybridModel, sample: Sample) -> InferResult:
    """conv -> batch norm (eval) -> ADM -> spiking layers; the label is the
    final step's classification."""
    if model.mode != "infer":
        raise ParameterError("model must be in inference mode")
    x = np.asarray(sample.input, dtype=np.float32)
    if x.ndim != 2 or x.shape[0] != model.arch.in_channels:
        raise ShapeError(
            f"sample must be {model.arch.in_channels} x T, got {x.shape}"
        )
    if x.shape[1] < model.conv.kernel:
        raise ShapeError(f"sample length {x.shape[1]} shorter than kernel {model.conv.kernel}")
    events = encode_events(model.conv, model.bn, model.adm.threshold, x)
    trace = snn_forward_sequence(model.snn_l1, model.snn_l2, events)
    return InferResult(label=trace.label, trace=trace, events=events)


def predict(model, samples) -> np.ndarray:
    """Integer class predictions (0 = F, 1 = M) for a list of samples."""
    if isinstance(model, HybridModel):
        x, _ = samples_to_arrays(samples)
        _check_input_shape(model.arch, x)
        events = encode_events(model.conv, model.bn, model.adm.threshold, x)
        return predict_events(model.snn_l1, model.snn_l2, events)
    if isinstance(model, ReferenceCnn):
        x, _ = samples_to_arrays(samples)
        _check_input_shape(model.arch, x)
        probs, _ = _head_forward(model.conv, None, model.fc1, model.fc2, x, train=False)
        return probs.argmax(axis=1)
    if isinstance(model, PhaseAResult):
        x, _ = samples_to_arrays(samples)
        _check_input_shape(model.arch, x)
        probs, _ = _head_forward(model.conv, model.bn, model.fc1, model.fc2, x, train=False)
        return probs.argmax(axis=1)
    raise ParameterError(f"cannot predict with {type(model).__name__}")


def accuracy_f1(predictions: np.ndarray, targets: np.ndarray) -> dict:
    """Accuracy and macro-averaged F1 over the two classes."""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.size == 0:
        raise ParameterError("cannot evaluate an empty set")
    accuracy = float((predictions == targets).mean())
    f1s = []
    for cls in range(len(LABELS)):
        tp = int(np.sum((predictions == cls) & (targets == cls)))
        fp = int(np.sum((predictions == cls) & (targets != cls)))
        fn = int(np.sum((predictions != cls) & (targets == cls)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return {"accuracy": accuracy, "f1": float(np.mean(f1s))}


def evaluate(model, samples) -> dict:
    if not samples:
        raise ParameterError("cannot evaluate an empty set")
    _, targets = samples_to_arrays(samples)
    return accuracy_f1(predict(model, samples), targets)


# ---------------------------------------------------------------------------
# quantization


def quantize_tensor(w: np.ndarray, bits: int = 16):
    """Per-tensor symmetric linear quantization. Returns (int16 values, scale);
    an all-zero tensor gets scale 1 so dequantization is the identity."""
    if not 2 <= bits <= 16:
        raise ParameterError("bits must lie in 2..16")
    qmax = 2 ** (bits - 1) - 1
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    scale = peak / qmax if peak > 0 else 1.0
    q = np.clip(np.round(w / scale), -qmax, qmax).astype(np.int16)
    return q, scale


def _dequantize(q: np.ndarray, scale: float, dtype) -> np.ndarray:
    return (scale * q).astype(dtype)


def quantize_weights(model, bits: int = 16):
    """Return a copy of the model whose weight tensors carry quantization
    error at the given precision. Biases and batch-norm statistics stay at
    working precision; inference computes at working precision throughout."""
    out = copy.deepcopy(model)
    out.weight_bits = bits
    if isinstance(out, HybridModel):
        tensors = (out.conv, out.snn_l1, out.snn_l2)
    elif isinstance(out, ReferenceCnn):
        tensors = (out.conv, out.fc1, out.fc2)
    else:
        raise ParameterError(f"cannot quantize {type(model).__name__}")
    for layer in tensors:
        q, scale = quantize_tensor(layer.weights, bits)
        layer.weights = _dequantize(q, scale, layer.weights.dtype)
    return out


# ---------------------------------------------------------------------------
# footprint accounting


def footprint_report(
    cfg: ArchConfig, model_kind: str, bits: int = 32, *, model=None, samples=None
) -> FootprintReport:
    """Parameter/byte/MAC arithmetic; synaptic events and sparsity are
    measured when a hybrid model and a sample set are provided."""
    params = count_params(cfg, model_kind)
    report = FootprintReport(
        params=params,
        weight_bits=bits,
        weight_bytes=params * bits // 8,
        conv_macs_per_window=cfg.in_channels * cfg.kernel * cfg.conv_out_channels
        * cfg.steps_per_window,
    )
    if model is not None and samples and isinstance(model, HybridModel):
        x, _ = samples_to_arrays(samples)
        events = encode_events(model.conv, model.bn, model.adm.threshold, x)
        fan1 = model.snn_l1.weights.shape[0]
        fan2 = model.snn_l2.weights.shape[0]
        totals = []
        rates = []
        for ev in events:
            trace = snn_forward_sequence(model.snn_l1, model.snn_l2, ev)
            totals.append(int(ev.sum()) * fan1 + int(trace.hidden_spikes.sum()) * fan2)
            half = ev.shape[0] // 2
            rates.append(event_rate((ev[:half], ev[half:])))
        report.synaptic_events_per_window = float(np.mean(totals))
        report.event_sparsity = float(np.mean(rates))
    return report


def reduction_percent(small: float, large: float) -> float:
    """Percent reduction of `small` relative to `large`."""
    if large <= 0:
        raise ParameterError("baseline must be positive")
    return (1.0 - small / large) * 100.0


# ---------------------------------------------------------------------------
# experiment matrix


def _run_cell(kind, window_s, channels, seed, cal_trials, test_trials, opts):
    from .dataset import AUDITORY_8, select_channels, split_train_val, window_samples

    def restrict(trials):
        if channels == trials[0].n_channels:
            return trials
        if channels == 8 and set(AUDITORY_8) <= set(trials[0].channel_names):
            return [select_channels(t, AUDITORY_8) for t in trials]
        names = trials[0].channel_names[:channels]
        return [select_channels(t, names) for t in trials]

    cal = restrict(cal_trials)
    test = restrict(test_trials)
    cfg = ArchConfig(
        eeg_channels=channels,
        conv_out_channels=opts.get("conv_out_channels", 40),
        window_s=window_s,
    )
    train, val = split_train_val(window_samples(cal, window_s), 0.8, seed)
    test_set = window_samples(test, window_s)
    epochs_a = opts.get("epochs_a", 30)
    epochs_b = opts.get("epochs_b", 60)
    if kind == "reference":
        model, _ = train_reference(
            cfg, opts.get("lasso_lambda", 0.0), train, val, seed, epochs=epochs_a
        )
    elif kind == "hybrid":
        phase_a = train_phase_a(cfg, train, val, seed, epochs=epochs_a)
        model, _ = train_phase_b(
            phase_a, opts.get("threshold", 0.45), train, val, seed, epochs=epochs_b
        )
    else:
        raise ParameterError(f"unknown model kind {kind!r}")
    return evaluate(model, test_set)


def run_experiment_matrix(
    windows, channel_counts, kinds, n_seeds, cal_trials, test_trials, *,
    workers: int = 1, **opts,
) -> list[dict]:
    """Train and evaluate every (window, channels, kind) cell across seeds
    0..n_seeds-1; returns one row per cell with mean accuracy and F1."""
    cells = [
        (w, c, k) for w in windows for c in channel_counts for k in kinds
    ]
    jobs = [(w, c, k, s) for (w, c, k) in cells for s in range(n_seeds)]

    def run(job):
        w, c, k, s = job
        return job, _run_cell(k, w, c, s, cal_trials, test_trials, opts)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = dict(pool.map(run, jobs))
    else:
        outcomes = dict(run(j) for j in jobs)

    rows = []
    for w, c, k in cells:
        metrics = [outcomes[(w, c, k, s)] for s in range(n_seeds)]
        rows.append(
            {
                "window_s": w,
                "channels": c,
                "kind": k,
                "n_seeds": n_seeds,
                "mean_accuracy": float(np.mean([m["accuracy"] for m in metrics])),
                "mean_f1": float(np.mean([m["f1"] for m in metrics])),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# checkpoints: named tensor files plus a JSON manifest


def _arch_dict(cfg: ArchConfig) -> dict:
    return asdict(cfg)


def _tensor_entries(model):
    if isinstance(model, HybridModel):
        return {
            "conv_w": model.conv.weights, "conv_b": model.conv.bias,
            "bn_gamma": model.bn.gamma, "bn_beta": model.bn.beta,
            "bn_running_mean": model.bn.running_mean, "bn_running_var": model.bn.running_var,
            "snn1_w": model.snn_l1.weights, "snn1_b": model.snn_l1.bias,
            "snn2_w": model.snn_l2.weights, "snn2_b": model.snn_l2.bias,
        }
    if isinstance(model, ReferenceCnn):
        return {
            "conv_w": model.conv.weights, "conv_b": model.conv.bias,
            "fc1_w": model.fc1.weights, "fc1_b": model.fc1.bias,
            "fc2_w": model.fc2.weights, "fc2_b": model.fc2.bias,
        }
    raise ParameterError(f"cannot checkpoint {type(model).__name__}")


_QUANTIZED_TENSORS = {"conv_w", "snn1_w", "snn2_w", "fc1_w", "fc2_w"}


def save_checkpoint(out_dir, model) -> Path:
    """Write the model as named tensor files plus manifest.json. Weight
    tensors of a 16-bit model are stored as int16 with per-tensor scales."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = "hybrid" if isinstance(model, HybridModel) else "reference"
    manifest = {
        "kind": kind,
        "arch": _arch_dict(model.arch),
        "weight_bits": model.weight_bits,
        "tensors": {},
    }
    if isinstance(model, HybridModel):
        manifest["adm_threshold"] = model.adm.threshold
        manifest["lif"] = {
            "tau_rc_ms": model.snn_l1.lif.tau_rc_ms,
            "v_threshold": model.snn_l1.lif.v_threshold,
            "v_reset": model.snn_l1.lif.v_reset,
            "t_ref_ms": model.snn_l1.lif.t_ref_ms,
            "dt_s": model.snn_l1.lif.dt_s,
        }
    else:
        manifest["lasso_lambda"] = model.loss.lasso_lambda
    for name, tensor in _tensor_entries(model).items():
        filename = f"{name}.aadt"
        entry = {"file": filename, "shape": list(tensor.shape)}
        if model.weight_bits < 32 and name in _QUANTIZED_TENSORS:
            q, scale = quantize_tensor(tensor, model.weight_bits)
            write_tensor(out_dir / filename, q)
            entry["dtype"] = "int16"
            entry["scale"] = scale
        else:
            write_tensor(out_dir / filename, tensor.astype(np.float32))
            entry["dtype"] = "float32"
        manifest["tensors"][name] = entry
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    return out_dir


def load_checkpoint(ckpt_dir):
    """Rebuild a model from a checkpoint directory (dequantizing on load)."""
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / "manifest.json"
    if not manifest_path.exists():
        raise TensorFormatError("manifest", f"{ckpt_dir}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text())
    cfg = ArchConfig(**manifest["arch"])

    def load(name):
        entry = manifest["tensors"][name]
        tensor = read_tensor(ckpt_dir / entry["file"])
        if entry["dtype"] == "int16":
            tensor = _dequantize(tensor, entry["scale"], np.float32)
        if list(tensor.shape) != entry["shape"]:
            raise TensorFormatError("dims", f"{entry['file']}: shape mismatch with manifest")
        return tensor

    if manifest["kind"] == "hybrid":
        lif = LifParams(**manifest["lif"])
        conv = nc.Conv1dLayer(weights=load("conv_w"), bias=load("conv_b"), stride=cfg.stride)
        bn = nc.BatchNorm1d(
            gamma=load("bn_gamma"), beta=load("bn_beta"),
            running_mean=load("bn_running_mean"), running_var=load("bn_running_var"),
            mode="eval",
        )
        l1 = SpikingDense(weights=load("snn1_w"), bias=load("snn1_b"), lif=lif)
        l2 = SpikingDense(weights=load("snn2_w"), bias=load("snn2_b"), lif=lif)
        return HybridModel(
            conv=conv, bn=bn, adm=AdmConfig(threshold=manifest["adm_threshold"]),
            snn_l1=l1, snn_l2=l2, arch=cfg, mode="infer",
            weight_bits=manifest["weight_bits"],
        )
    if manifest["kind"] == "reference":
        conv = nc.Conv1dLayer(weights=load("conv_w"), bias=load("conv_b"), stride=cfg.stride)
        fc1 = nc.DenseLayer(weights=load("fc1_w"), bias=load("fc1_b"), activation="relu")
        fc2 = nc.DenseLayer(weights=load("fc2_w"), bias=load("fc2_b"), activation="softmax")
        return ReferenceCnn(
            conv=conv, fc1=fc1, fc2=fc2, loss=nc.LossConfig(manifest.get("lasso_lambda", 0.0)),
            arch=cfg, weight_bits=manifest["weight_bits"],
        )
    raise TensorFormatError("kind", f"unknown checkpoint kind {manifest['kind']!r}")
