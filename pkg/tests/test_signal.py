import numpy as np
import pytest

from corticospike.errors import DegenerateInputError, ParameterError
from corticospike.signal import (
    FirFilter,
    Waveform,
    apply_fir,
    design_fir_bandpass,
    hilbert_envelope,
    normalize_energy,
    notch_60,
    resample_linear,
)

FS = 256.0


def freq_response_db(taps, f_hz, fs):
    # DFT of the taps evaluated at one frequency: the independent oracle
    k = np.arange(len(taps))
    h = np.sum(np.asarray(taps) * np.exp(-2j * np.pi * f_hz * k / fs))
    return 20.0 * np.log10(max(abs(h), 1e-300))


def sine(f_hz, fs=FS, seconds=2.0, amp=1.0):
    t = np.arange(int(round(seconds * fs))) / fs
    return Waveform(amp * np.sin(2 * np.pi * f_hz * t), fs)


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


class TestDesignFirBandpass:
    def test_paper_filter_tap_count_and_symmetry(self):
        filt = design_fir_bandpass(128, 0.5, 40.0, FS)
        assert filt.taps.size == 129
        assert np.array_equal(filt.taps, filt.taps[::-1])

    def test_passband_center_near_unity(self):
        filt = design_fir_bandpass(128, 0.5, 40.0, FS)
        assert abs(freq_response_db(filt.taps, 20.0, FS)) <= 0.5

    def test_stopband_at_60hz(self):
        filt = design_fir_bandpass(128, 0.5, 40.0, FS)
        assert freq_response_db(filt.taps, 60.0, FS) <= -40.0

    def test_minimal_order_symmetric(self):
        filt = design_fir_bandpass(2, 0.5, 40.0, FS)
        assert filt.taps.size == 3
        assert filt.taps[0] == filt.taps[2]

    def test_odd_order_rejected(self):
        with pytest.raises(ParameterError):
            design_fir_bandpass(127, 0.5, 40.0, FS)

    def test_bad_band_edges_rejected(self):
        with pytest.raises(ParameterError):
            design_fir_bandpass(128, 40.0, 0.5, FS)
        with pytest.raises(ParameterError):
            design_fir_bandpass(128, 0.5, 130.0, FS)


class TestApplyFir:
    def test_identity_kernel(self):
        filt = FirFilter(taps=[1.0], order=0, fs=FS)
        x = Waveform(np.random.default_rng(0).standard_normal(100), FS)
        y = apply_fir(filt, x)
        assert np.array_equal(y.samples, x.samples)

    def test_unit_dc_gain_on_constant(self):
        filt = FirFilter(taps=[0.25, 0.5, 0.25], order=2, fs=FS)
        x = Waveform(np.full(64, 2.0), FS)
        y = apply_fir(filt, x)
        assert np.allclose(y.samples[1:-1], 2.0)
        assert len(y) == len(x)

    def test_passband_sine_rms_preserved(self):
        filt = design_fir_bandpass(128, 0.5, 40.0, FS)
        x = sine(20.0)
        y = apply_fir(filt, x)
        interior = slice(64, len(x) - 64)
        ratio = rms(y.samples[interior]) / rms(x.samples[interior])
        assert abs(ratio - 1.0) <= 0.06

    def test_group_delay_compensated(self):
        # a band-center sinusoid stays phase-aligned with the input
        filt = design_fir_bandpass(128, 0.5, 40.0, FS)
        x = sine(20.0)
        y = apply_fir(filt, x)
        a = x.samples[64:-64]
        b = y.samples[64:-64]
        lags = np.arange(-5, 6)
        scores = [np.dot(a, np.roll(b, lag)) for lag in lags]
        assert abs(lags[int(np.argmax(scores))]) <= 1

    def test_rate_mismatch_rejected(self):
        filt = design_fir_bandpass(4, 0.5, 40.0, FS)
        with pytest.raises(ParameterError):
            apply_fir(filt, Waveform(np.zeros(100), 512.0))

    def test_short_signal_rejected(self):
        filt = design_fir_bandpass(128, 0.5, 40.0, FS)
        with pytest.raises(ParameterError):
            apply_fir(filt, Waveform(np.zeros(100), FS))


class TestNotch60:
    def test_60hz_attenuated(self):
        y = notch_60(sine(60.0), q=30.0)
        interior = slice(256, None)
        ratio = rms(y.samples[interior]) / rms(sine(60.0).samples[interior])
        assert ratio <= 0.032

    def test_30hz_preserved(self):
        y = notch_60(sine(30.0), q=30.0)
        interior = slice(256, None)
        ratio = rms(y.samples[interior]) / rms(sine(30.0).samples[interior])
        assert ratio >= 0.89

    def test_impulse_response_oracle(self):
        # black-box frequency response from the impulse response
        impulse = np.zeros(2048)
        impulse[0] = 1.0
        h = notch_60(Waveform(impulse, FS), q=30.0).samples
        assert freq_response_db(h, 60.0, FS) <= -30.0
        assert freq_response_db(h, 30.0, FS) >= -1.0

    def test_zero_in_zero_out(self):
        y = notch_60(Waveform(np.zeros(512), FS), q=30.0)
        assert np.array_equal(y.samples, np.zeros(512))

    def test_low_rate_rejected(self):
        with pytest.raises(ParameterError):
            notch_60(Waveform(np.zeros(512), 100.0), q=30.0)


class TestHilbertEnvelope:
    def test_zero_signal(self):
        env = hilbert_envelope(Waveform(np.zeros(64), FS))
        assert np.array_equal(env.samples, np.zeros(64))

    def test_constant_amplitude_sine(self):
        env = hilbert_envelope(sine(10.0, amp=0.7))
        interior = env.samples[50:-50]
        assert np.all(np.abs(interior - 0.7) <= 0.02 * 0.7)

    def test_amplitude_modulated_product(self):
        t = np.arange(512) / FS
        x = np.sin(2 * np.pi * 5 * t) * np.sin(2 * np.pi * 50 * t)
        env = hilbert_envelope(Waveform(x, FS))
        expected = np.abs(np.sin(2 * np.pi * 5 * t))
        assert np.max(np.abs(env.samples[50:-50] - expected[50:-50])) <= 0.05

    def test_nonnegative_and_same_length(self):
        x = Waveform(np.random.default_rng(3).standard_normal(777), FS)
        env = hilbert_envelope(x)
        assert len(env) == 777
        assert np.all(env.samples >= 0)

    def test_carrier_frequency_independence(self):
        t = np.arange(1024) / FS
        modulator = 0.6 + 0.4 * np.sin(2 * np.pi * 3 * t)
        interior = slice(100, -100)
        for carrier in (30.0, 50.0, 70.0):
            x = Waveform(modulator * np.sin(2 * np.pi * carrier * t), FS)
            env = hilbert_envelope(x).samples
            rel = np.abs(env[interior] - modulator[interior]) / np.max(modulator)
            assert np.max(rel) <= 0.05

    def test_too_short_rejected(self):
        with pytest.raises(ParameterError):
            hilbert_envelope(Waveform(np.zeros(4), FS))


class TestNormalizeEnergy:
    def test_already_unit_power(self):
        x = Waveform(np.array([1.0, 1.0, 1.0, 1.0]), FS)
        assert np.array_equal(normalize_energy(x).samples, x.samples)

    def test_sparse_unit_power(self):
        x = Waveform(np.array([2.0, 0.0, 0.0, 0.0]), FS)
        assert np.array_equal(normalize_energy(x).samples, x.samples)

    def test_scaling(self):
        x = Waveform(np.array([3.0, 3.0, 3.0, 3.0]), FS)
        assert np.array_equal(normalize_energy(x).samples, np.ones(4))

    def test_idempotent_bit_for_bit(self):
        x = Waveform(np.random.default_rng(7).standard_normal(4096) * 3.7, FS)
        once = normalize_energy(x)
        twice = normalize_energy(once)
        assert np.array_equal(once.samples, twice.samples)

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateInputError):
            normalize_energy(Waveform(np.zeros(16), FS))


class TestResampleLinear:
    def test_constant(self):
        x = Waveform(np.ones(1024), 1024.0)
        y = resample_linear(x, 256.0)
        assert len(y) == 256
        assert np.array_equal(y.samples, np.ones(256))

    def test_linear_signal_exact(self):
        n = 512
        slope = 1.0 / ((n - 1) / 512.0)  # ramp 0..1 over the signal span
        t_old = np.arange(n) / 512.0
        x = Waveform(slope * t_old, 512.0)
        y = resample_linear(x, 256.0)
        t_new = np.arange(len(y)) / 256.0
        assert np.max(np.abs(y.samples - slope * t_new)) == 0.0

    def test_sine_against_analytic(self):
        t_old = np.arange(2048) / 1024.0
        x = Waveform(np.sin(2 * np.pi * 4 * t_old), 1024.0)
        y = resample_linear(x, 256.0)
        t_new = np.arange(len(y)) / 256.0
        assert np.max(np.abs(y.samples - np.sin(2 * np.pi * 4 * t_new))) <= 0.01

    def test_bad_rate_rejected(self):
        with pytest.raises(ParameterError):
            resample_linear(Waveform(np.ones(16), FS), 0.0)


def test_operations_are_pure():
    x = Waveform(np.random.default_rng(5).standard_normal(600), FS)
    before = x.samples.copy()
    filt = design_fir_bandpass(64, 0.5, 40.0, FS)
    apply_fir(filt, x)
    notch_60(x)
    hilbert_envelope(x)
    normalize_energy(x)
    resample_linear(x, 128.0)
    assert np.array_equal(x.samples, before)
