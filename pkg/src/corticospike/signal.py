"""DSP primitives for EEG preprocessing and speech-envelope extraction.

All operations are pure functions of their inputs: same Waveform in, same
Waveform out, no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _sps

from .errors import DegenerateInputError, ParameterError

__all__ = [
    "FirFilter",
    "Waveform",
    "design_fir_bandpass",
    "apply_fir",
    "notch_60",
    "hilbert_envelope",
    "normalize_energy",
    "resample_linear",
]

# signals whose mean square power is already within this relative tolerance of
# one are returned unchanged, which makes normalize_energy exactly idempotent
_UNIT_POWER_RTOL = 1e-12


@dataclass(frozen=True)
class Waveform:
    """A uniformly sampled real signal."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.fs <= 0:
            raise ParameterError(f"sampling rate must be positive, got {self.fs}")
        if self.samples.ndim != 1:
            raise ParameterError("waveform samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("waveform samples must be finite")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class FirFilter:
    """Linear-phase FIR filter: symmetric taps, even order."""

    taps: np.ndarray
    order: int
    fs: float
    band: tuple = field(default=(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.float64))
        if self.order % 2 != 0:
            raise ParameterError(f"filter order must be even, got {self.order}")
        if self.taps.size != self.order + 1:
            raise ParameterError(
                f"expected {self.order + 1} taps for order {self.order}, got {self.taps.size}"
            )
        if not np.array_equal(self.taps, self.taps[::-1]):
            raise ParameterError("taps must be symmetric (linear phase)")


def design_fir_bandpass(order: int, low_hz: float, high_hz: float, fs: float) -> FirFilter:
    """Design a Hamming-windowed-sinc bandpass filter.

    The returned taps are exactly symmetric and the magnitude response is
    unity (within a fraction of a dB) at the band center.
    """
    if order % 2 != 0 or order < 2:
        raise ParameterError(f"order must be even and >= 2, got {order}")
    if not (0.0 < low_hz < high_hz < fs / 2.0):
        raise ParameterError(
            f"band edges must satisfy 0 < low < high < fs/2, got ({low_hz}, {high_hz}) at fs={fs}"
        )
    taps = _sps.firwin(order + 1, [low_hz, high_hz], window="hamming", pass_zero=False, fs=fs)
    taps = 0.5 * (taps + taps[::-1])  # force bit-exact symmetry
    return FirFilter(taps=taps, order=order, fs=fs, band=(low_hz, high_hz))


def apply_fir(filt: FirFilter, x: Waveform) -> Waveform:
    """Convolve with the filter and cancel its group delay.

    Direct-form convolution shifted left by order/2 samples; edges are
    zero-padded so the output length equals the input length. The first and
    last order/2 samples are usable but degraded.
    """
    if filt.fs != x.fs:
        raise ParameterError(f"filter rate {filt.fs} does not match signal rate {x.fs}")
    n = len(x)
    if n <= filt.order:
        raise ParameterError(f"signal length {n} must exceed filter order {filt.order}")
    full = np.convolve(x.samples, filt.taps, mode="full")
    half = filt.order // 2
    return Waveform(samples=full[half : half + n], fs=x.fs)


def notch_60(x: Waveform, q: float = 30.0) -> Waveform:
    """Second-order recursive notch at 60 Hz with quality factor q."""
    if x.fs <= 120.0:
        raise ParameterError(f"sampling rate must exceed 120 Hz for a 60 Hz notch, got {x.fs}")
    b, a = _sps.iirnotch(60.0, q, fs=x.fs)
    return Waveform(samples=_sps.lfilter(b, a, x.samples), fs=x.fs)


def hilbert_envelope(x: Waveform) -> Waveform:
    """Magnitude of the analytic signal (frequency-domain Hilbert transform)."""
    if len(x) < 8:
        raise ParameterError(f"need at least 8 samples, got {len(x)}")
    return Waveform(samples=np.abs(_sps.hilbert(x.samples)), fs=x.fs)


def normalize_energy(x: Waveform) -> Waveform:
    """Scale so the mean squared sample value is one."""
    mean_sq = float(np.mean(x.samples**2))
    if mean_sq == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero signal")
    if abs(mean_sq - 1.0) <= _UNIT_POWER_RTOL:
        return Waveform(samples=x.samples.copy(), fs=x.fs)
    return Waveform(samples=x.samples / np.sqrt(mean_sq), fs=x.fs)


def resample_linear(x: Waveform, to_fs: float) -> Waveform:
    """Linear interpolation onto a uniform grid spanning the same duration."""
    if to_fs <= 0:
        raise ParameterError(f"target rate must be positive, got {to_fs}")
    n = len(x)
    m = max(1, int(round(n * to_fs / x.fs)))
    t_old = np.arange(n) / x.fs
    t_new = np.arange(m) / to_fs
    return Waveform(samples=np.interp(t_new, t_old, x.samples), fs=to_fs)
