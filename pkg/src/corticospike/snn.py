"""LIF spiking layers, the differentiable soft-LIF surrogate, and training.

Membrane dynamics follow exponential-Euler leaky integration toward the input
current: v <- J + (v - J) * exp(-dt/tau). A neuron spikes when v exceeds the
threshold, resets, and then holds at reset for every step it enters with at
least one full step of refractory time remaining.

During training the spiking units are replaced by a smooth firing-rate curve
(softplus-smoothed threshold inside the closed-form LIF rate), so standard
backpropagation applies; inference uses the trained weights with spiking
units unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .dataset import LABELS
from .errors import ParameterError, ShapeError, TrainingError
from .neuralcore import AdamState, adam_step, cross_entropy, softmax

__all__ = [
    "LifParams",
    "LifLayerState",
    "SpikingDense",
    "SoftLifConfig",
    "SnnTrace",
    "init_spiking_dense",
    "lif_step",
    "analytic_lif_rate",
    "soft_lif_rate",
    "spiking_dense_forward",
    "frames_to_matrix",
    "snn_forward_sequence",
    "simulate_constant_current",
    "predict_events",
    "train_snn",
]

# softplus(u) evaluates to exactly u in float64 above this point
_SOFTPLUS_LINEAR = 33.0


@dataclass(frozen=True)
class LifParams:
    tau_rc_ms: float = 20.0
    v_threshold: float = 1.0
    v_reset: float = 0.0
    t_ref_ms: float = 2.0
    dt_s: float = 0.25  # one step per conv output column: stride / 256

    def __post_init__(self):
        if self.tau_rc_ms <= 0:
            raise ParameterError("tau_rc_ms must be positive")
        if self.t_ref_ms < 0:
            raise ParameterError("t_ref_ms must be nonnegative")
        if self.v_threshold <= self.v_reset:
            raise ParameterError("v_threshold must exceed v_reset")
        if self.dt_s <= 0:
            raise ParameterError("dt_s must be positive")

    @property
    def dt_ms(self) -> float:
        return self.dt_s * 1000.0

    @property
    def decay(self) -> float:
        return float(np.exp(-self.dt_ms / self.tau_rc_ms))


@dataclass
class LifLayerState:
    v: np.ndarray               # membrane voltage per neuron
    refractory_ms: np.ndarray   # remaining refractory time per neuron

    @classmethod
    def zeros(cls, n: int, v_reset: float = 0.0) -> "LifLayerState":
        return cls(v=np.full(n, float(v_reset)), refractory_ms=np.zeros(n))


@dataclass
class SpikingDense:
    weights: np.ndarray  # out x in
    bias: np.ndarray     # out
    lif: LifParams
    state: LifLayerState = None

    def __post_init__(self):
        if self.state is None:
            self.state = LifLayerState.zeros(self.weights.shape[0], self.lif.v_reset)

    def reset_state(self):
        self.state = LifLayerState.zeros(self.weights.shape[0], self.lif.v_reset)


@dataclass(frozen=True)
class SoftLifConfig:
    gamma: float = 0.02
    amplitude: float = 1.0  # maps rate (Hz) to activation

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")


def init_spiking_dense(n_in, n_out, lif: LifParams, rng, dtype=np.float32) -> SpikingDense:
    # biases start near threshold so units sit in the responsive part of the
    # sharp soft-LIF curve; zero-bias units have exactly zero rate and zero
    # gradient and the layer never trains
    bound = np.sqrt(6.0 / (n_in + n_out))
    spread = 0.5 * (lif.v_threshold - lif.v_reset)
    return SpikingDense(
        weights=rng.uniform(-bound, bound, size=(n_out, n_in)).astype(dtype),
        bias=rng.uniform(
            lif.v_threshold - spread, lif.v_threshold + spread, size=n_out
        ).astype(dtype),
        lif=lif,
    )


def lif_step(state: LifLayerState, current: np.ndarray, params: LifParams):
    """Advance every neuron one step. Returns (new_state, spikes)."""
    current = np.asarray(current, dtype=np.float64)
    if not np.all(np.isfinite(current)):
        raise ParameterError("input current must be finite")
    held = state.refractory_ms >= params.dt_ms
    rr = np.where(held, state.refractory_ms - params.dt_ms, 0.0)
    cand = current + (state.v - current) * params.decay
    fired = ~held & (cand > params.v_threshold)
    v = np.where(held | fired, params.v_reset, cand)
    rr = np.where(fired, params.t_ref_ms, rr)
    return LifLayerState(v=v, refractory_ms=rr), fired.astype(np.uint8)


def analytic_lif_rate(current, params: LifParams):
    """Closed-form steady firing rate in Hz for a constant input current."""
    j = np.asarray(current, dtype=np.float64)
    scalar = j.ndim == 0
    j = np.atleast_1d(j)
    rate = np.zeros_like(j)
    above = j > params.v_threshold
    if np.any(above):
        charge_ms = params.tau_rc_ms * np.log(
            (j[above] - params.v_reset) / (j[above] - params.v_threshold)
        )
        rate[above] = 1000.0 / (params.t_ref_ms + charge_ms)
    return float(rate[0]) if scalar else rate


def soft_lif_rate(current, cfg: SoftLifConfig, params: LifParams):
    """Smooth LIF rate and its exact derivative with respect to the current.

    The hard firing condition is smoothed with a softplus of width gamma; the
    curve converges pointwise to analytic_lif_rate as gamma -> 0. Far below
    threshold the softplus flushes to exactly zero (float64), and both the
    rate and its derivative are zero there.
    """
    j = np.asarray(current, dtype=np.float64)
    scalar = j.ndim == 0
    j = np.atleast_1d(j)
    z = j - params.v_threshold
    u = z / cfg.gamma
    rho = cfg.gamma * np.log(1.0 + np.exp(np.minimum(u, _SOFTPLUS_LINEAR)))
    rho = np.where(u > _SOFTPLUS_LINEAR, z, rho)
    rate = np.zeros_like(j)
    deriv = np.zeros_like(j)
    valid = rho > 0
    if np.any(valid):
        r = rho[valid]
        denom_ms = params.t_ref_ms + params.tau_rc_ms * np.log1p(params.v_threshold / r)
        rate[valid] = cfg.amplitude * 1000.0 / denom_ms
        deriv[valid] = (
            cfg.amplitude
            * 1000.0
            * params.tau_rc_ms
            * params.v_threshold
            * expit(u[valid])
            / (r * (r + params.v_threshold) * denom_ms**2)
        )
    if scalar:
        return float(rate[0]), float(deriv[0])
    return rate, deriv


def training_amplitude(params: LifParams) -> float:
    """Amplitude that rescales rates by the analytic maximum (1/t_ref)."""
    if params.t_ref_ms <= 0:
        return 1.0
    return params.t_ref_ms / 1000.0


def spiking_dense_forward(layer: SpikingDense, events: np.ndarray) -> np.ndarray:
    """Input current per output neuron, accumulated event-driven: only weight
    columns with an active event are added, in ascending input-index order."""
    events = np.asarray(events)
    if events.shape != (layer.weights.shape[1],):
        raise ShapeError(
            f"event vector length {events.shape} does not match layer input "
            f"{layer.weights.shape[1]}"
        )
    out = np.zeros(layer.weights.shape[0], dtype=layer.weights.dtype)
    kernels.spiking_matvec(layer.weights, layer.bias, events.astype(np.uint8), out)
    return out


def frames_to_matrix(frames) -> np.ndarray:
    """Stack [on || off] frame vectors into a (2N, L) uint8 event matrix."""
    frames = list(frames)
    if not frames:
        raise ParameterError("frame list must not be empty")
    return np.stack([np.concatenate([f.on, f.off]) for f in frames], axis=1).astype(np.uint8)


@dataclass
class SnnTrace:
    """Per-step record of a spiking forward pass."""

    hidden_spikes: np.ndarray  # L x H uint8
    out_spikes: np.ndarray     # L x 2 uint8
    out_voltages: np.ndarray   # L x 2, pre-reset candidate voltages
    step_classes: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return self.step_classes[-1]

    def as_table(self) -> str:
        lines = ["step\tclass\tv0\tv1"]
        for t, cls in enumerate(self.step_classes):
            lines.append(
                f"{t}\t{cls}\t{self.out_voltages[t, 0]:.6f}\t{self.out_voltages[t, 1]:.6f}"
            )
        return "\n".join(lines) + "\n"


def _classify_steps(out_spikes: np.ndarray, out_voltages: np.ndarray) -> list[str]:
    classes = []
    for t in range(out_spikes.shape[0]):
        spikes = out_spikes[t]
        if spikes.sum() == 1:
            idx = int(np.argmax(spikes))
        else:
            # both or neither spiked: fall back to the candidate voltages,
            # ties resolved toward index 0
            idx = int(np.argmax(out_voltages[t]))
        classes.append(LABELS[idx])
    return classes


def snn_forward_sequence(layer1: SpikingDense, layer2: SpikingDense, frames) -> SnnTrace:
    """Run an event-frame sequence through both spiking layers from a fresh
    state; the decision is the classification at the final step."""
    events = frames if isinstance(frames, np.ndarray) else frames_to_matrix(frames)
    if events.ndim != 2:
        raise ShapeError("expected a (2N, L) event matrix")
    if events.shape[0] != layer1.weights.shape[1]:
        raise ShapeError(
            f"event rows {events.shape[0]} do not match layer-1 input {layer1.weights.shape[1]}"
        )
    if events.shape[1] < 1:
        raise ParameterError("sequence must contain at least one frame")
    if layer1.lif != layer2.lif:
        raise ParameterError("both spiking layers must share LIF parameters")
    p = layer1.lif
    n_steps = events.shape[1]
    hid = np.zeros((n_steps, layer1.weights.shape[0]), dtype=np.uint8)
    out_spikes = np.zeros((n_steps, layer2.weights.shape[0]), dtype=np.uint8)
    out_v = np.zeros((n_steps, layer2.weights.shape[0]), dtype=np.float64)
    kernels.snn_sequence(
        layer1.weights, layer1.bias, layer2.weights, layer2.bias,
        np.ascontiguousarray(events, dtype=np.uint8),
        p.decay, p.dt_ms, p.t_ref_ms, p.v_threshold, p.v_reset,
        hid, out_spikes, out_v,
    )
    return SnnTrace(
        hidden_spikes=hid,
        out_spikes=out_spikes,
        out_voltages=out_v,
        step_classes=_classify_steps(out_spikes, out_v),
    )


def simulate_constant_current(current: float, params: LifParams, n_steps: int) -> np.ndarray:
    """Spike train of a single neuron driven by a constant current."""
    spikes = np.zeros(n_steps, dtype=np.uint8)
    kernels.lif_sim_constant(
        float(current), n_steps, params.decay, params.dt_ms, params.t_ref_ms,
        params.v_threshold, params.v_reset, spikes,
    )
    return spikes


def predict_events(layer1: SpikingDense, layer2: SpikingDense, event_batch: np.ndarray):
    """Final-step spiking classification for a batch of (2N, L) event matrices."""
    return np.array(
        [LABELS.index(snn_forward_sequence(layer1, layer2, ev).label) for ev in event_batch],
        dtype=np.int64,
    )


def _surrogate_forward(w1, b1, w2, b2, z, cfg, params):
    j1 = z @ w1.T + b1
    h, dh = soft_lif_rate(j1, cfg, params)
    j2 = h @ w2.T + b2
    o, do = soft_lif_rate(j2, cfg, params)
    return h, dh, o, do


def train_snn(
    layer1: SpikingDense,
    layer2: SpikingDense,
    train_events: np.ndarray,
    train_labels: np.ndarray,
    *,
    val_events: np.ndarray | None = None,
    val_labels: np.ndarray | None = None,
    epochs: int = 100,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
    gamma: float = 0.02,
    per_step_loss: bool = False,
) -> dict:
    """Train the two spiking layers on precomputed event sequences.

    The spiking units are replaced by soft-LIF rate units (state-free, rates
    rescaled to [0, 1]); the loss is the cross entropy of the softmax over the
    final step's output rates, or the per-step average when per_step_loss is
    set. When a validation set is given, the weights of the epoch with the
    best spiking validation accuracy are kept.
    """
    if layer1.lif != layer2.lif:
        raise ParameterError("both spiking layers must share LIF parameters")
    params = layer1.lif
    cfg = SoftLifConfig(gamma=gamma, amplitude=training_amplitude(params))
    train_events = np.asarray(train_events, dtype=np.uint8)
    labels = np.asarray(train_labels, dtype=np.int64)
    if train_events.ndim != 3:
        raise ShapeError("train_events must be (n_samples, 2N, L)")
    if labels.shape[0] != train_events.shape[0]:
        raise ShapeError("one label per event sequence required")
    if per_step_loss:
        n_steps = train_events.shape[2]
        z_all = (
            train_events.transpose(0, 2, 1).reshape(-1, train_events.shape[1])
        ).astype(np.float64)
        y_all = np.repeat(labels, n_steps)
    else:
        z_all = train_events[:, :, -1].astype(np.float64)
        y_all = labels

    rng = np.random.default_rng(seed)
    w1 = layer1.weights.astype(np.float64)
    b1 = layer1.bias.astype(np.float64)
    w2 = layer2.weights.astype(np.float64)
    b2 = layer2.bias.astype(np.float64)
    opt = AdamState(lr=lr)
    history = {"loss": [], "train_acc": [], "val_acc": []}
    best = None

    n = z_all.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            z = z_all[idx]
            y = y_all[idx]
            h, dh, o, do = _surrogate_forward(w1, b1, w2, b2, z, cfg, params)
            p = softmax(o)
            onehot = np.zeros_like(p)
            onehot[np.arange(y.size), y] = 1.0
            g_o = (p - onehot) / y.size
            g_j2 = g_o * do
            g_h = g_j2 @ w2
            g_j1 = g_h * dh
            grads = {
                "w2": g_j2.T @ h,
                "b2": g_j2.sum(axis=0),
                "w1": g_j1.T @ z,
                "b1": g_j1.sum(axis=0),
            }
            adam_step(opt, {"w1": w1, "b1": b1, "w2": w2, "b2": b2}, grads)

        _, _, o, _ = _surrogate_forward(w1, b1, w2, b2, z_all, cfg, params)
        p = softmax(o)
        loss = cross_entropy(p, y_all)
        if not np.isfinite(loss):
            raise TrainingError("training loss became non-finite")
        history["loss"].append(loss)
        history["train_acc"].append(float((p.argmax(axis=1) == y_all).mean()))
        if val_events is not None:
            dtype = layer1.weights.dtype
            layer1.weights, layer1.bias = w1.astype(dtype), b1.astype(dtype)
            layer2.weights, layer2.bias = w2.astype(dtype), b2.astype(dtype)
            pred = predict_events(layer1, layer2, val_events)
            val_acc = float((pred == np.asarray(val_labels)).mean())
            history["val_acc"].append(val_acc)
            if best is None or val_acc > best[0]:
                best = (val_acc, w1.copy(), b1.copy(), w2.copy(), b2.copy())

    if best is not None:
        _, w1, b1, w2, b2 = best
    dtype = layer1.weights.dtype
    layer1.weights, layer1.bias = w1.astype(dtype), b1.astype(dtype)
    layer2.weights, layer2.bias = w2.astype(dtype), b2.astype(dtype)
    layer1.reset_state()
    layer2.reset_state()
    return history
