import mpmath
import numpy as np
import pytest

from embedloc import melfront
from embedloc.errors import ConfigError, DataError
from conftest import make_tone_mel


def test_config_validation():
    with pytest.raises(ConfigError):
        melfront.MelConfig(window_length=4096)
    with pytest.raises(ConfigError):
        melfront.MelConfig(hop=0)
    with pytest.raises(ConfigError):
        melfront.MelConfig(num_bands=1)
    with pytest.raises(ConfigError):
        melfront.MelConfig(log_floor=0.0)


def test_two_band_peak_ordering():
    cfg = melfront.MelConfig(num_bands=2, dft_size=1024, window_length=400)
    fb = melfront.build_filterbank(cfg)
    assert fb.weights.shape[0] == 2
    assert np.argmax(fb.weights[0]) < np.argmax(fb.weights[1])


def test_rows_are_single_peaked():
    fb = melfront.build_filterbank(melfront.MelConfig())
    for row in fb.weights:
        peak = np.argmax(row)
        support = np.nonzero(row)[0]
        assert len(support) >= 1
        # rises up to the peak, falls after it, over the support
        assert np.all(np.diff(row[support[0]:peak + 1]) >= 0)
        assert np.all(np.diff(row[peak:support[-1] + 1]) <= 0)


def test_band_centers_match_high_precision_mel_grid():
    # independent oracle: evaluate mel/mel-inverse with mpmath at 50 digits
    cfg = melfront.MelConfig()
    fb = melfront.build_filterbank(cfg)
    with mpmath.workdps(50):
        lo = mpmath.mpf(0)
        hi = 2595 * mpmath.log10(1 + mpmath.mpf(cfg.sample_rate_hz) / 2 / 700)
        for u in range(cfg.num_bands):
            mel_u = lo + (hi - lo) * (u + 1) / (cfg.num_bands + 1)
            hz = 700 * (mpmath.mpf(10) ** (mel_u / 2595) - 1)
            assert abs(fb.band_center_hz[u] - float(hz)) < 0.5


def test_empty_band_raises_naming_first_band():
    cfg = melfront.MelConfig(num_bands=512, dft_size=256, window_length=256)
    with pytest.raises(ConfigError, match="band"):
        melfront.build_filterbank(cfg)


def test_silence_clamps_to_floor():
    cfg = melfront.MelConfig()
    mel = melfront.compute_mel(np.zeros(16000), cfg)
    np.testing.assert_allclose(mel.values, np.log10(cfg.log_floor))


def test_frame_count_formula():
    cfg = melfront.MelConfig()
    for n in (400, 401, 560, 16000):
        mel = melfront.compute_mel(np.random.default_rng(0).standard_normal(n), cfg)
        assert mel.num_frames == (n - cfg.window_length) // cfg.hop + 1


def test_short_input_raises():
    cfg = melfront.MelConfig()
    with pytest.raises(DataError):
        melfront.compute_mel(np.zeros(cfg.window_length - 1), cfg)


def test_tone_hits_band_center():
    # brute-force scan: a tone at a band's center frequency should put
    # that band on top
    cfg = melfront.MelConfig()
    fb = melfront.build_filterbank(cfg)
    for u_star in (10, 30, 60, 90):
        mel = make_tone_mel(fb.band_center_hz[u_star], cfg, seconds=1.0)
        assert np.argmax(mel.values.mean(axis=1)) == u_star


def test_tone_localization_within_one_band():
    cfg = melfront.MelConfig()
    fb = melfront.build_filterbank(cfg)
    for freq in (200.0, 440.0, 1000.0, 3000.0, 6500.0):
        mel = make_tone_mel(freq, cfg, seconds=1.0)
        peak = np.argmax(mel.values.mean(axis=1))
        nearest = np.argmin(np.abs(fb.band_center_hz - freq))
        assert abs(int(peak) - int(nearest)) <= 1


def test_determinism():
    cfg = melfront.MelConfig()
    pcm = np.random.default_rng(3).standard_normal(8000)
    a = melfront.compute_mel(pcm, cfg)
    b = melfront.compute_mel(pcm.copy(), cfg)
    np.testing.assert_array_equal(a.values, b.values)


def test_energy_monotonicity():
    cfg = melfront.MelConfig()
    pcm = 0.1 * np.random.default_rng(4).standard_normal(8000)
    base = melfront.compute_mel(pcm, cfg)
    scaled = melfront.compute_mel(3.0 * pcm, cfg)
    unclamped = base.values > np.log10(cfg.log_floor)
    assert np.all(scaled.values[unclamped] >= base.values[unclamped])


def test_wav_roundtrip(tmp_path):
    cfg = melfront.MelConfig()
    pcm = 0.3 * np.sin(2 * np.pi * 440 * np.arange(8000) / cfg.sample_rate_hz)
    path = tmp_path / "t.wav"
    melfront.write_pcm_wav(path, pcm, cfg.sample_rate_hz)
    back, rate = melfront.load_pcm_wav(path)
    assert rate == cfg.sample_rate_hz
    np.testing.assert_allclose(back, pcm, atol=1.0 / 32768)


def test_raw_f32_roundtrip(tmp_path):
    pcm = np.random.default_rng(5).standard_normal(4096).astype("<f4")
    path = tmp_path / "t.f32"
    pcm.tofile(path)
    np.testing.assert_array_equal(melfront.load_pcm_f32(path), pcm.astype(float))


def test_mel_spectrogram_persistence(tmp_path):
    cfg = melfront.MelConfig()
    mel = melfront.compute_mel(np.random.default_rng(6).standard_normal(8000),
                               cfg, source_id="t0")
    path = tmp_path / "t0.emlt"
    mel.save(path)
    back = melfront.MelSpectrogram.load(path, cfg, source_id="t0")
    np.testing.assert_allclose(back.values, mel.values, atol=1e-6)
