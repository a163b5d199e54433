"""The numba kernels and their pure-numpy fallbacks compute identical bits."""

import numpy as np
import pytest

from corticospike import kernels as K

pytestmark = pytest.mark.skipif(
    not K.NUMBA_ENABLED, reason="numba backend disabled; nothing to compare"
)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_conv_forward_parity(dtype):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 5, 40)).astype(dtype)
    w = rng.standard_normal((6, 5, 7)).astype(dtype)
    b = rng.standard_normal(6).astype(dtype)
    n_l = (40 - 7) // 3 + 1
    out_jit = np.zeros((3, 6, n_l), dtype=dtype)
    out_np = np.zeros_like(out_jit)
    K._conv1d_forward_jit(x, w, b, 3, out_jit)
    K.conv1d_forward_numpy(x, w, b, 3, out_np)
    assert np.array_equal(out_jit, out_np)


@pytest.mark.parametrize("stride", [2, 7])  # overlapping and disjoint windows
def test_conv_backward_parity(stride):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 4, 30))
    w = rng.standard_normal((5, 4, 7))
    n_l = (30 - 7) // stride + 1
    gout = rng.standard_normal((2, 5, n_l))
    args_jit = (np.zeros_like(x), np.zeros_like(w), np.zeros(5))
    args_np = (np.zeros_like(x), np.zeros_like(w), np.zeros(5))
    K._conv1d_backward_jit(x, w, gout, stride, *args_jit)
    K.conv1d_backward_numpy(x, w, gout, stride, *args_np)
    for a, b in zip(args_jit, args_np):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_adm_parity():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((8, 200))
    for threshold in (0.1, 0.45, 1.3):
        on_j = np.zeros((8, 200), dtype=np.uint8)
        off_j = np.zeros_like(on_j)
        on_n = np.zeros_like(on_j)
        off_n = np.zeros_like(on_j)
        K._adm_encode_jit(x, threshold, on_j, off_j)
        K.adm_encode_numpy(x, threshold, on_n, off_n)
        assert np.array_equal(on_j, on_n)
        assert np.array_equal(off_j, off_n)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_spiking_matvec_parity(dtype):
    rng = np.random.default_rng(3)
    w = rng.standard_normal((9, 14)).astype(dtype)
    b = rng.standard_normal(9).astype(dtype)
    ev = (rng.random(14) < 0.4).astype(np.uint8)
    out_j = np.zeros(9, dtype=dtype)
    out_n = np.zeros(9, dtype=dtype)
    K._spiking_matvec_jit(w, b, ev, out_j)
    K.spiking_matvec_numpy(w, b, ev, out_n)
    assert np.array_equal(out_j, out_n)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_snn_sequence_parity(dtype):
    rng = np.random.default_rng(4)
    w1 = rng.standard_normal((10, 12)).astype(dtype)
    b1 = rng.uniform(0.5, 1.5, 10).astype(dtype)
    w2 = rng.standard_normal((2, 10)).astype(dtype)
    b2 = rng.uniform(0.5, 1.5, 2).astype(dtype)
    events = (rng.random((12, 20)) < 0.3).astype(np.uint8)
    decay = float(np.exp(-250.0 / 20.0))

    def run(fn):
        hid = np.zeros((20, 10), dtype=np.uint8)
        spk = np.zeros((20, 2), dtype=np.uint8)
        volt = np.zeros((20, 2))
        fn(w1, b1, w2, b2, events, decay, 250.0, 2.0, 1.0, 0.0, hid, spk, volt)
        return hid, spk, volt

    hid_j, spk_j, volt_j = run(K._snn_sequence_jit)
    hid_n, spk_n, volt_n = run(K.snn_sequence_numpy)
    assert np.array_equal(hid_j, hid_n)
    assert np.array_equal(spk_j, spk_n)
    assert np.array_equal(volt_j, volt_n)


def test_lif_sim_parity():
    spikes_j = np.zeros(5000, dtype=np.uint8)
    spikes_n = np.zeros(5000, dtype=np.uint8)
    decay = float(np.exp(-0.05 / 20.0))
    K._lif_sim_jit(2.0, 5000, decay, 0.05, 2.0, 1.0, 0.0, spikes_j)
    K.lif_sim_constant_numpy(2.0, 5000, decay, 0.05, 2.0, 1.0, 0.0, spikes_n)
    assert np.array_equal(spikes_j, spikes_n)
