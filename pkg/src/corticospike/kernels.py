"""Hot numeric kernels: numba @njit loops plus pure-numpy fallbacks.

The module-level names (``conv1d_forward`` etc.) point at whichever path
``backend.BACKEND`` selected. Both paths of a kernel perform the identical
per-element floating-point operation sequence wherever a fixed summation
order is contractual:

* conv forward accumulates onto the bias channel-major, tap-minor
  (``for c: for k: acc += w[o,c,k] * x[b,c,l*stride+k]``);
* event-driven accumulation adds active weight columns in ascending
  input-index order starting from the bias.
"""

from __future__ import annotations

import numpy as np

from .backend import BACKEND, NUMBA_ENABLED, njit

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "conv1d_forward",
    "conv1d_backward",
    "adm_encode_arrays",
    "spiking_matvec",
    "snn_sequence",
    "lif_sim_constant",
]


# ---------------------------------------------------------------------------
# conv1d forward


def _conv1d_forward_loops(x, w, bias, stride, out):
    n_b, n_in, _ = x.shape
    n_out = w.shape[0]
    kk = w.shape[2]
    n_l = out.shape[2]
    for b in range(n_b):
        for o in range(n_out):
            for l in range(n_l):
                out[b, o, l] = bias[o]
    for b in range(n_b):
        for o in range(n_out):
            for c in range(n_in):
                for l in range(n_l):
                    p = l * stride
                    for k in range(kk):
                        out[b, o, l] += w[o, c, k] * x[b, c, p + k]


def conv1d_forward_numpy(x, w, bias, stride, out):
    n_in = x.shape[1]
    kk = w.shape[2]
    n_l = out.shape[2]
    out[:] = bias[None, :, None]
    pos = stride * np.arange(n_l)
    for c in range(n_in):
        for k in range(kk):
            out += w[None, :, c, k, None] * x[:, None, c, pos + k]


# ---------------------------------------------------------------------------
# conv1d backward


def _conv1d_backward_loops(x, w, gout, stride, gx, gw, gb):
    n_b, n_in, _ = x.shape
    n_out = w.shape[0]
    kk = w.shape[2]
    n_l = gout.shape[2]
    for b in range(n_b):
        for o in range(n_out):
            for l in range(n_l):
                g = gout[b, o, l]
                gb[o] += g
                p = l * stride
                for c in range(n_in):
                    for k in range(kk):
                        gx[b, c, p + k] += w[o, c, k] * g
                        gw[o, c, k] += x[b, c, p + k] * g


def conv1d_backward_numpy(x, w, gout, stride, gx, gw, gb):
    n_in = x.shape[1]
    kk = w.shape[2]
    n_l = gout.shape[2]
    pos = stride * np.arange(n_l)
    gb += gout.sum(axis=(0, 2))
    for c in range(n_in):
        for k in range(kk):
            # positions l*stride+k are distinct for fixed k, so fancy-index
            # accumulation is safe here
            gx[:, c, pos + k] += np.einsum("o,bol->bl", w[:, c, k], gout)
            gw[:, c, k] += np.einsum("bol,bl->o", gout, x[:, c, pos + k])


# ---------------------------------------------------------------------------
# ADM encoding: delta against the previous sample (zero before the first),
# ON iff delta > T, OFF iff delta < -T


def _adm_encode_loops(xseq, threshold, on, off):
    n_ch, n_steps = xseq.shape
    for c in range(n_ch):
        prev = 0.0
        for t in range(n_steps):
            delta = xseq[c, t] - prev
            if delta > threshold:
                on[c, t] = 1
            elif delta < -threshold:
                off[c, t] = 1
            prev = xseq[c, t]


def adm_encode_numpy(xseq, threshold, on, off):
    delta = xseq.astype(np.float64, copy=True)
    delta[:, 1:] -= xseq[:, :-1].astype(np.float64)
    on[:] = delta > threshold
    off[:] = delta < -threshold


# ---------------------------------------------------------------------------
# event-driven dense accumulation


def _spiking_matvec_loops(w, bias, events, out):
    n_out, n_in = w.shape
    for o in range(n_out):
        out[o] = bias[o]
    for k in range(n_in):
        if events[k] != 0:
            for o in range(n_out):
                out[o] += w[o, k]


def spiking_matvec_numpy(w, bias, events, out):
    out[:] = bias
    for k in np.flatnonzero(events):
        out += w[:, k]


# ---------------------------------------------------------------------------
# two-layer spiking sequence
#
# Per step: event-driven layer-1 currents -> LIF update -> hidden spikes drive
# layer-2 currents -> LIF update. Refractory rule: a neuron holds at reset for
# every step it enters with at least one full step of refractory time left;
# shorter leftovers expire within the step. Recorded output voltages are the
# pre-reset candidate values.


def _snn_sequence_loops(
    w1, b1, w2, b2, events, decay, dt_ms, t_ref_ms, v_th, v_reset,
    hid_spikes, out_spikes, out_v,
):
    n_hid, n_in = w1.shape
    n_out = w2.shape[0]
    n_steps = events.shape[1]
    v1 = np.full(n_hid, v_reset)
    rr1 = np.zeros(n_hid)
    v2 = np.full(n_out, v_reset)
    rr2 = np.zeros(n_out)
    # currents accumulate in float64 regardless of weight dtype
    j1 = np.zeros(n_hid)
    j2 = np.zeros(n_out)
    for t in range(n_steps):
        for h in range(n_hid):
            j1[h] = b1[h]
        for k in range(n_in):
            if events[k, t] != 0:
                for h in range(n_hid):
                    j1[h] += w1[h, k]
        for h in range(n_hid):
            if rr1[h] >= dt_ms:
                rr1[h] -= dt_ms
                v1[h] = v_reset
            else:
                rr1[h] = 0.0
                v = j1[h] + (v1[h] - j1[h]) * decay
                if v > v_th:
                    hid_spikes[t, h] = 1
                    v1[h] = v_reset
                    rr1[h] = t_ref_ms
                else:
                    v1[h] = v
        for o in range(n_out):
            j2[o] = b2[o]
        for h in range(n_hid):
            if hid_spikes[t, h] != 0:
                for o in range(n_out):
                    j2[o] += w2[o, h]
        for o in range(n_out):
            if rr2[o] >= dt_ms:
                rr2[o] -= dt_ms
                v2[o] = v_reset
                out_v[t, o] = v_reset
            else:
                rr2[o] = 0.0
                v = j2[o] + (v2[o] - j2[o]) * decay
                out_v[t, o] = v
                if v > v_th:
                    out_spikes[t, o] = 1
                    v2[o] = v_reset
                    rr2[o] = t_ref_ms
                else:
                    v2[o] = v


def snn_sequence_numpy(
    w1, b1, w2, b2, events, decay, dt_ms, t_ref_ms, v_th, v_reset,
    hid_spikes, out_spikes, out_v,
):
    n_hid = w1.shape[0]
    n_out = w2.shape[0]
    n_steps = events.shape[1]
    v1 = np.full(n_hid, v_reset)
    rr1 = np.zeros(n_hid)
    v2 = np.full(n_out, v_reset)
    rr2 = np.zeros(n_out)
    for t in range(n_steps):
        j1 = b1.astype(np.float64)
        for k in np.flatnonzero(events[:, t]):
            j1 = j1 + w1[:, k]
        held = rr1 >= dt_ms
        rr1 = np.where(held, rr1 - dt_ms, 0.0)
        cand = j1 + (v1 - j1) * decay
        fired = ~held & (cand > v_th)
        hid_spikes[t] = fired
        v1 = np.where(held | fired, v_reset, cand)
        rr1 = np.where(fired, t_ref_ms, rr1)

        j2 = b2.astype(np.float64)
        for h in np.flatnonzero(hid_spikes[t]):
            j2 = j2 + w2[:, h]
        held2 = rr2 >= dt_ms
        rr2 = np.where(held2, rr2 - dt_ms, 0.0)
        cand2 = j2 + (v2 - j2) * decay
        out_v[t] = np.where(held2, v_reset, cand2)
        fired2 = ~held2 & (cand2 > v_th)
        out_spikes[t] = fired2
        v2 = np.where(held2 | fired2, v_reset, cand2)
        rr2 = np.where(fired2, t_ref_ms, rr2)


# ---------------------------------------------------------------------------
# constant-current LIF simulation (rate-check oracle driver)


def _lif_sim_loops(j_const, n_steps, decay, dt_ms, t_ref_ms, v_th, v_reset, spikes):
    v = v_reset
    rr = 0.0
    for t in range(n_steps):
        if rr >= dt_ms:
            rr -= dt_ms
            v = v_reset
        else:
            rr = 0.0
            v = j_const + (v - j_const) * decay
            if v > v_th:
                spikes[t] = 1
                v = v_reset
                rr = t_ref_ms


def lif_sim_constant_numpy(j_const, n_steps, decay, dt_ms, t_ref_ms, v_th, v_reset, spikes):
    _lif_sim_loops(j_const, n_steps, decay, dt_ms, t_ref_ms, v_th, v_reset, spikes)


# ---------------------------------------------------------------------------
# dispatch

if NUMBA_ENABLED:
    _jit = njit(cache=True)
    _conv1d_forward_jit = _jit(_conv1d_forward_loops)
    _conv1d_backward_jit = _jit(_conv1d_backward_loops)
    _adm_encode_jit = _jit(_adm_encode_loops)
    _spiking_matvec_jit = _jit(_spiking_matvec_loops)
    _snn_sequence_jit = _jit(_snn_sequence_loops)
    _lif_sim_jit = _jit(_lif_sim_loops)

    conv1d_forward = _conv1d_forward_jit
    conv1d_backward = _conv1d_backward_jit
    adm_encode_arrays = _adm_encode_jit
    spiking_matvec = _spiking_matvec_jit
    snn_sequence = _snn_sequence_jit
    lif_sim_constant = _lif_sim_jit
else:
    conv1d_forward = conv1d_forward_numpy
    conv1d_backward = conv1d_backward_numpy
    adm_encode_arrays = adm_encode_numpy
    spiking_matvec = spiking_matvec_numpy
    snn_sequence = snn_sequence_numpy
    lif_sim_constant = lif_sim_constant_numpy
