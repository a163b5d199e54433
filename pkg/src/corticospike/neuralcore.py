"""Dense numerical layers, losses, Adam, and hand-derived backpropagation.

Only the layers the two fixed architectures need; no general autodiff.
Compute is float32 by default; pass ``dtype=np.float64`` at init for the
gradient-check mode used by the finite-difference tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError, ShapeError, TrainingError

__all__ = [
    "Conv1dLayer",
    "BatchNorm1d",
    "DenseLayer",
    "AdamState",
    "LossConfig",
    "init_conv",
    "init_dense",
    "init_batchnorm",
    "conv1d_forward",
    "conv1d_backward",
    "batchnorm_forward",
    "batchnorm_backward",
    "avgpool_global",
    "dense_forward",
    "dense_backward",
    "relu",
    "softmax",
    "cross_entropy",
    "l1_penalty",
    "adam_step",
]


@dataclass
class Conv1dLayer:
    weights: np.ndarray  # out_ch x in_ch x kernel
    bias: np.ndarray     # out_ch
    stride: int = 64

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]


@dataclass
class BatchNorm1d:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1
    mode: str = "train"  # "train" or "eval"


@dataclass
class DenseLayer:
    weights: np.ndarray  # out x in
    bias: np.ndarray     # out
    activation: str = "none"  # none | relu | softmax


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


@dataclass
class LossConfig:
    lasso_lambda: float = 0.0

    def __post_init__(self):
        if self.lasso_lambda < 0:
            raise ParameterError("lasso_lambda must be nonnegative")


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_conv(in_ch, out_ch, kernel, stride, rng, dtype=np.float32) -> Conv1dLayer:
    w = _glorot(rng, (out_ch, in_ch, kernel), in_ch * kernel, out_ch * kernel, dtype)
    return Conv1dLayer(weights=w, bias=np.zeros(out_ch, dtype=dtype), stride=stride)


def init_dense(n_in, n_out, rng, activation="none", dtype=np.float32) -> DenseLayer:
    w = _glorot(rng, (n_out, n_in), n_in, n_out, dtype)
    return DenseLayer(weights=w, bias=np.zeros(n_out, dtype=dtype), activation=activation)


def init_batchnorm(channels, dtype=np.float32) -> BatchNorm1d:
    return BatchNorm1d(
        gamma=np.ones(channels, dtype=dtype),
        beta=np.zeros(channels, dtype=dtype),
        running_mean=np.zeros(channels, dtype=dtype),
        running_var=np.ones(channels, dtype=dtype),
    )


def _as_batch(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"expected a 2-d or 3-d array, got ndim={x.ndim}")


def conv1d_forward(layer: Conv1dLayer, x: np.ndarray) -> np.ndarray:
    """Strided cross-correlation plus bias, no padding, no activation."""
    xb, squeeze = _as_batch(x)
    if xb.shape[1] != layer.weights.shape[1]:
        raise ShapeError(
            f"input has {xb.shape[1]} channels, layer expects {layer.weights.shape[1]}"
        )
    n_t = xb.shape[2]
    kk = layer.kernel
    if n_t < kk:
        raise ShapeError(f"input length {n_t} shorter than kernel {kk}")
    n_l = (n_t - kk) // layer.stride + 1
    out = np.zeros((xb.shape[0], layer.weights.shape[0], n_l), dtype=layer.weights.dtype)
    kernels.conv1d_forward(
        np.ascontiguousarray(xb, dtype=layer.weights.dtype),
        layer.weights, layer.bias, layer.stride, out,
    )
    return out[0] if squeeze else out


def conv1d_backward(layer: Conv1dLayer, x: np.ndarray, grad_out: np.ndarray):
    """Exact gradients of conv1d_forward: (grad_input, grad_weights, grad_bias)."""
    xb, squeeze = _as_batch(x)
    gb_, _ = _as_batch(grad_out)
    n_l = (xb.shape[2] - layer.kernel) // layer.stride + 1
    if gb_.shape != (xb.shape[0], layer.weights.shape[0], n_l):
        raise ShapeError(f"grad_out shape {gb_.shape} does not match forward output")
    dtype = layer.weights.dtype
    gx = np.zeros_like(xb, dtype=dtype)
    gw = np.zeros_like(layer.weights)
    gbias = np.zeros_like(layer.bias)
    kernels.conv1d_backward(
        np.ascontiguousarray(xb, dtype=dtype), layer.weights,
        np.ascontiguousarray(gb_, dtype=dtype), layer.stride, gx, gw, gbias,
    )
    return (gx[0] if squeeze else gx), gw, gbias


def batchnorm_forward(bn: BatchNorm1d, x: np.ndarray):
    """Normalize per channel. Train mode uses batch statistics over batch and
    time and updates the running stats; eval mode uses the running stats.

    Returns (output, cache); cache is None in eval mode.
    """
    xb, squeeze = _as_batch(x)
    if xb.shape[1] != bn.gamma.size:
        raise ShapeError(f"input has {xb.shape[1]} channels, bn expects {bn.gamma.size}")
    if bn.mode == "train":
        n = xb.shape[0] * xb.shape[2]
        if n < 2:
            raise ParameterError("train-mode batch norm needs at least 2 values per channel")
        mean = xb.mean(axis=(0, 2))
        var = xb.var(axis=(0, 2))
        bn.running_mean = ((1 - bn.momentum) * bn.running_mean + bn.momentum * mean).astype(
            bn.running_mean.dtype
        )
        bn.running_var = ((1 - bn.momentum) * bn.running_var + bn.momentum * var).astype(
            bn.running_var.dtype
        )
    else:
        mean = bn.running_mean
        var = bn.running_var
    inv_std = 1.0 / np.sqrt(var + bn.eps)
    xhat = (xb - mean[None, :, None]) * inv_std[None, :, None]
    y = (bn.gamma[None, :, None] * xhat + bn.beta[None, :, None]).astype(xb.dtype)
    cache = (xhat, inv_std.astype(xb.dtype)) if bn.mode == "train" else None
    return (y[0] if squeeze else y), cache


def batchnorm_backward(bn: BatchNorm1d, cache, grad_out: np.ndarray):
    """Gradients through train-mode batch normalization."""
    if cache is None:
        raise ParameterError("backward requires a train-mode forward cache")
    xhat, inv_std = cache
    gy, squeeze = _as_batch(grad_out)
    dgamma = (gy * xhat).sum(axis=(0, 2))
    dbeta = gy.sum(axis=(0, 2))
    dxhat = gy * bn.gamma[None, :, None]
    mean_dxhat = dxhat.mean(axis=(0, 2), keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=(0, 2), keepdims=True)
    gx = inv_std[None, :, None] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    gx = gx.astype(xhat.dtype)
    return (gx[0] if squeeze else gx), dgamma, dbeta


def avgpool_global(x: np.ndarray) -> np.ndarray:
    """Per-channel mean over all positions."""
    x = np.asarray(x)
    if x.shape[-1] < 1:
        raise ShapeError("cannot pool an empty axis")
    return x.mean(axis=-1)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def dense_forward(layer: DenseLayer, x: np.ndarray):
    """Affine map plus the layer's activation. Returns (output, cache)."""
    x = np.asarray(x)
    if x.shape[-1] != layer.weights.shape[1]:
        raise ShapeError(
            f"input width {x.shape[-1]} does not match layer input {layer.weights.shape[1]}"
        )
    z = x @ layer.weights.T + layer.bias
    if layer.activation == "none":
        y = z
    elif layer.activation == "relu":
        y = relu(z)
    elif layer.activation == "softmax":
        y = softmax(z)
    else:
        raise ParameterError(f"unknown activation {layer.activation!r}")
    return y, (x, z)


def dense_backward(layer: DenseLayer, cache, grad_out: np.ndarray):
    """Gradients of dense_forward. For a softmax layer, grad_out must already
    be the gradient with respect to the pre-activation logits (the usual
    softmax/cross-entropy shortcut)."""
    x, z = cache
    if layer.activation == "none" or layer.activation == "softmax":
        gz = grad_out
    elif layer.activation == "relu":
        gz = grad_out * (z > 0)
    else:
        raise ParameterError(f"unknown activation {layer.activation!r}")
    gz = gz.astype(layer.weights.dtype)
    gw = gz.T @ x if gz.ndim == 2 else np.outer(gz, x)
    gb = gz.sum(axis=0) if gz.ndim == 2 else gz
    gx = gz @ layer.weights
    return gx, gw.astype(layer.weights.dtype), gb.astype(layer.bias.dtype)


def cross_entropy(probabilities: np.ndarray, target_class) -> float:
    """Mean negative log-likelihood; probabilities floored at 1e-12."""
    p = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    targets = np.atleast_1d(np.asarray(target_class, dtype=np.int64))
    if p.shape[0] != targets.shape[0]:
        raise ShapeError("one target per probability row required")
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-5):
        raise ParameterError("probability rows must sum to 1 within 1e-5")
    picked = np.maximum(p[np.arange(p.shape[0]), targets], 1e-12)
    return float(-np.log(picked).mean())


def l1_penalty(weight_arrays, lasso_lambda: float) -> float:
    """lambda times the summed absolute value of all weight tensors (biases excluded)."""
    if lasso_lambda < 0:
        raise ParameterError("lasso_lambda must be nonnegative")
    if lasso_lambda == 0:
        return 0.0
    return float(lasso_lambda * sum(np.abs(w).sum() for w in weight_arrays))


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update, in place. Parameter iteration order is
    sorted by name so trajectories are reproducible."""
    state.step += 1
    t = state.step
    for name in sorted(params):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name], dtype=np.float64)
            state.v[name] = np.zeros_like(params[name], dtype=np.float64)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * np.square(g, dtype=np.float64)
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        params[name] -= update.astype(params[name].dtype)
    return params
