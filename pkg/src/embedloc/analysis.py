"""Signal-level oracles operating directly on mel spectrograms.

These deliberately avoid the embedding pipeline: tempo comes from the
autocorrelation of the frame-energy envelope, the key root from the
strongest spectral peak folded to a pitch class. They are used to check
that synthetic ground-truth labels are recoverable, and as independent
references in tests.
"""

import numpy as np

from .melfront import band_grid_mel, mel_to_hz

C4_HZ = 261.6255653005986
PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


def _parabolic_refine(y, i):
    """Sub-sample peak position around index i of a sampled curve."""
    if i <= 0 or i >= len(y) - 1:
        return float(i)
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom == 0:
        return float(i)
    return i + 0.5 * (y[i - 1] - y[i + 1]) / denom


def frame_energy(mel):
    """Linear-power energy envelope over frames."""
    return np.sum(10.0 ** mel.values, axis=0)


def estimate_tempo_autocorrelation(mel, min_bpm=50.0, max_bpm=250.0):
    """Tempo in BPM from the envelope autocorrelation peak.

    Prefers the half lag when it is nearly as strong, so click trains do
    not get reported at half tempo.
    """
    env = frame_energy(mel)
    env = env - env.mean()
    # widen click peaks so non-integer periods still align well
    env = np.convolve(env, np.hanning(5), mode="same")
    fps = mel.config.frames_per_second
    ac = np.correlate(env, env, mode="full")[len(env) - 1:]
    lag_lo = max(2, int(np.floor(fps * 60.0 / max_bpm)))
    lag_hi = min(len(ac) - 2, int(np.ceil(fps * 60.0 / min_bpm)))
    if lag_hi <= lag_lo:
        raise ValueError("envelope too short for tempo range")
    lags = np.arange(lag_lo, lag_hi + 1)
    best = int(lags[np.argmax(ac[lag_lo:lag_hi + 1])])

    # prefer an integer sub-multiple of the winning lag when it is
    # nearly as strong: click trains repeat at every period multiple
    for divisor in (3, 2):
        lo = max(lag_lo, int(round(best / divisor)) - 1)
        hi = min(lag_hi, int(round(best / divisor)) + 1)
        if lo > hi:
            continue
        cand = lo + int(np.argmax(ac[lo:hi + 1]))
        if ac[cand] >= 0.8 * ac[best]:
            best = cand
            break
    lag = _parabolic_refine(ac, best)
    return 60.0 * fps / lag


def estimate_root_pitch_class(mel, fmin_hz=450.0, fmax_hz=1100.0):
    """Pitch class (0 = C) of the strongest time-averaged spectral peak
    inside [fmin_hz, fmax_hz]."""
    power = np.mean(10.0 ** mel.values, axis=1)
    centers_mel = band_grid_mel(mel.config)[1:-1]
    centers_hz = mel_to_hz(centers_mel)
    window = np.where((centers_hz >= fmin_hz) & (centers_hz <= fmax_hz))[0]
    if len(window) < 3:
        raise ValueError("too few bands in the search window")
    local = power[window]
    peak = int(np.argmax(local))
    pos = _parabolic_refine(local, peak)
    # interpolate the band-center frequency (on the mel axis) at the peak
    mel_pos = np.interp(pos, np.arange(len(window)), centers_mel[window])
    freq = float(mel_to_hz(mel_pos))
    return int(np.round(12.0 * np.log2(freq / C4_HZ))) % 12


def chroma_profile(mel, fmin_hz=100.0, fmax_hz=4000.0):
    """Fold time-averaged band power into 12 pitch-class bins."""
    power = np.mean(10.0 ** mel.values, axis=1)
    centers_hz = mel_to_hz(band_grid_mel(mel.config)[1:-1])
    chroma = np.zeros(12)
    for p, f in zip(power, centers_hz):
        if fmin_hz <= f <= fmax_hz:
            pc = int(np.round(12.0 * np.log2(f / C4_HZ))) % 12
            chroma[pc] += p
    return chroma
