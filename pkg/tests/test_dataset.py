import numpy as np
import pytest

from corticospike.dataset import (
    AUDITORY_8,
    CHANNELS_16,
    Sample,
    SyntheticConfig,
    Trial,
    build_input,
    load_trials,
    save_trials,
    select_channels,
    split_train_val,
    synth_trial,
    window_samples,
)
from corticospike.errors import (
    ChannelNotFoundError,
    DegenerateInputError,
    ParameterError,
)

DELAY_SAMPLES = 26  # round(100 ms * 256 Hz / 1000)


def delayed_corr(channel, envelope, delay=DELAY_SAMPLES):
    a = channel[delay:].astype(np.float64)
    b = envelope[: envelope.size - delay].astype(np.float64)
    return float(np.corrcoef(a, b)[0, 1])


def matched_filter_label(trial, delay=DELAY_SAMPLES):
    """Independent oracle: delay-compensated correlation against both envelopes."""
    mean_eeg = trial.eeg.mean(axis=0)
    score_f = delayed_corr(mean_eeg, trial.env_f, delay)
    score_m = delayed_corr(mean_eeg, trial.env_m, delay)
    return "F" if score_f >= score_m else "M"


class TestSynthTrial:
    def test_noiseless_channels_are_delayed_attended_envelope(self):
        cfg = SyntheticConfig(noise_sigma=0.0, unattended_gain=0.0, attend_gain=1.0, seed=11)
        trial = synth_trial(cfg)
        attended = trial.env_f if trial.label == "F" else trial.env_m
        for channel in trial.eeg:
            assert delayed_corr(channel, attended) >= 1.0 - 1e-6

    def test_deterministic_given_seed(self):
        cfg = SyntheticConfig(seed=5, noise_sigma=0.4, unattended_gain=0.2)
        a = synth_trial(cfg)
        b = synth_trial(cfg)
        assert np.array_equal(a.eeg, b.eeg)
        assert np.array_equal(a.env_f, b.env_f)
        assert np.array_equal(a.env_m, b.env_m)
        assert a.label == b.label

    def test_attended_beats_unattended_under_noise(self):
        wins = 0
        for seed in range(100):
            cfg = SyntheticConfig(
                duration_s=5.0, noise_sigma=0.5, unattended_gain=0.3, seed=seed
            )
            trial = synth_trial(cfg)
            att, un = (
                (trial.env_f, trial.env_m) if trial.label == "F" else (trial.env_m, trial.env_f)
            )
            mean_eeg = trial.eeg.mean(axis=0)
            if delayed_corr(mean_eeg, att) > delayed_corr(mean_eeg, un):
                wins += 1
        assert wins >= 95

    def test_matched_filter_oracle_100pct_noiseless(self):
        for seed in range(40):
            cfg = SyntheticConfig(duration_s=5.0, noise_sigma=0.0, unattended_gain=0.0, seed=seed)
            trial = synth_trial(cfg)
            assert matched_filter_label(trial) == trial.label

    def test_envelopes_unit_power(self):
        trial = synth_trial(SyntheticConfig(seed=3))
        assert abs(np.mean(trial.env_f.astype(np.float64) ** 2) - 1.0) <= 1e-5
        assert abs(np.mean(trial.env_m.astype(np.float64) ** 2) - 1.0) <= 1e-5

    def test_invalid_config_rejected(self):
        with pytest.raises(ParameterError):
            SyntheticConfig(noise_sigma=-1.0)
        with pytest.raises(ParameterError):
            SyntheticConfig(unattended_gain=1.0)
        with pytest.raises(ParameterError):
            SyntheticConfig(attend_gain=0.0)


class TestSelectChannels:
    def _trial16(self, seed=0):
        return synth_trial(SyntheticConfig(n_channels=16, duration_s=2.0, seed=seed))

    def test_paper_subset(self):
        trial = self._trial16()
        sub = select_channels(trial, AUDITORY_8)
        assert sub.channel_names == AUDITORY_8
        assert sub.eeg.shape[0] == 8
        for i, name in enumerate(AUDITORY_8):
            src = trial.channel_names.index(name)
            assert np.array_equal(sub.eeg[i], trial.eeg[src])

    def test_identity(self):
        trial = self._trial16()
        same = select_channels(trial, CHANNELS_16)
        assert np.array_equal(same.eeg, trial.eeg)
        assert same.channel_names == trial.channel_names

    def test_unknown_name_reported(self):
        trial = self._trial16()
        with pytest.raises(ChannelNotFoundError, match="XX"):
            select_channels(trial, ["C3", "XX"])


class TestBuildInput:
    def _trial(self, channels, seconds):
        rng = np.random.default_rng(0)
        n = int(seconds * 256)
        return Trial(
            eeg=rng.standard_normal((channels, n)),
            env_f=rng.standard_normal(n),
            env_m=rng.standard_normal(n),
            label="F",
            channel_names=[f"CH{i:02d}" for i in range(channels)],
        )

    def test_shape_8ch(self):
        assert build_input(self._trial(8, 1.0)).shape == (10, 256)

    def test_shape_16ch(self):
        assert build_input(self._trial(16, 3.0)).shape == (18, 768)

    def test_row_order(self):
        trial = self._trial(8, 1.0)
        matrix = build_input(trial)
        assert np.array_equal(matrix[0], trial.env_f)
        assert np.array_equal(matrix[-1], trial.env_m)
        assert np.array_equal(matrix[1:-1], trial.eeg)


class TestWindowSamples:
    def _trial(self, seconds=20.0, label="F"):
        rng = np.random.default_rng(1)
        n = int(seconds * 256)
        return Trial(
            eeg=rng.standard_normal((8, n)),
            env_f=rng.standard_normal(n),
            env_m=rng.standard_normal(n),
            label=label,
            channel_names=[f"CH{i:02d}" for i in range(8)],
        )

    def test_one_second_windows(self):
        samples = window_samples([self._trial()], 1.0)
        assert len(samples) == 20
        assert all(s.input.shape == (10, 256) for s in samples)

    def test_three_second_windows_discard_remainder(self):
        samples = window_samples([self._trial()], 3.0)
        assert len(samples) == 6

    def test_window_longer_than_trial_rejected(self):
        with pytest.raises(ParameterError):
            window_samples([self._trial()], 25.0)

    def test_labels_preserved(self):
        samples = window_samples([self._trial(label="M"), self._trial(label="F")], 2.0)
        assert [s.label for s in samples] == ["M"] * 10 + ["F"] * 10

    def test_windows_are_consecutive_slices(self):
        trial = self._trial()
        full = build_input(trial)
        samples = window_samples([trial], 1.0)
        for i, s in enumerate(samples):
            assert np.array_equal(s.input, full[:, i * 256 : (i + 1) * 256])


def _make_samples(n_f, n_m):
    x = np.zeros((10, 256), dtype=np.float32)
    return [Sample(input=x, label="F", window_s=1.0) for _ in range(n_f)] + [
        Sample(input=x, label="M", window_s=1.0) for _ in range(n_m)
    ]


class TestSplitTrainVal:
    def test_stratified_80_20(self):
        train, val = split_train_val(_make_samples(50, 50), 0.8, seed=0)
        assert len(train) == 80 and len(val) == 20
        n_f = sum(1 for s in train if s.label == "F")
        assert abs(n_f - 40) <= 1

    def test_deterministic(self):
        samples = _make_samples(30, 20)
        for s, i in zip(samples, range(len(samples))):
            s.input = np.full((10, 256), i, dtype=np.float32)
        a_train, a_val = split_train_val(samples, 0.8, seed=9)
        b_train, b_val = split_train_val(samples, 0.8, seed=9)
        assert [s.input[0, 0] for s in a_train] == [s.input[0, 0] for s in b_train]
        assert [s.input[0, 0] for s in a_val] == [s.input[0, 0] for s in b_val]

    def test_small_split(self):
        train, val = split_train_val(_make_samples(5, 5), 0.8, seed=1)
        assert len(train) == 8 and len(val) == 2

    def test_empty_rejected(self):
        with pytest.raises(DegenerateInputError):
            split_train_val([], 0.8, seed=0)

    def test_bad_ratio_rejected(self):
        with pytest.raises(ParameterError):
            split_train_val(_make_samples(2, 2), 1.5, seed=0)


class TestManifestStorage:
    def test_roundtrip(self, tmp_path):
        trials = [
            synth_trial(SyntheticConfig(duration_s=2.0, seed=s, noise_sigma=0.1))
            for s in range(4)
        ]
        trials[2].session_kind = "online"
        trials[3].session_kind = "online"
        manifest = save_trials(tmp_path, trials)
        loaded = load_trials(manifest)
        assert len(loaded) == 4
        for orig, back in zip(trials, loaded):
            assert back.label == orig.label
            assert np.array_equal(back.eeg, orig.eeg)
            assert np.array_equal(back.env_f, orig.env_f)

    def test_session_filter(self, tmp_path):
        trials = [synth_trial(SyntheticConfig(duration_s=2.0, seed=s)) for s in range(3)]
        trials[0].session_kind = "online"
        manifest = save_trials(tmp_path, trials)
        assert len(load_trials(manifest, session="online")) == 1
        assert len(load_trials(manifest, session="calibration")) == 2

    def test_subject_filter(self, tmp_path):
        trials = [synth_trial(SyntheticConfig(duration_s=2.0, seed=s)) for s in range(3)]
        trials[1].subject_id = "s2"
        manifest = save_trials(tmp_path, trials)
        assert len(load_trials(manifest, subject="s2")) == 1
