"""Log-mel spectrogram frontend.

Band centers are uniformly spaced on the HTK mel scale,
mel(f) = 2595 * log10(1 + f/700), from 0 Hz to half the sample rate.
Triangular bands are stored with unit peak (no area normalization);
consumers that need normalized rows divide by the row sum.
"""

import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from . import tensorio

HTK_MEL_CONST = 2595.0


def hz_to_mel(f):
    return HTK_MEL_CONST * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / HTK_MEL_CONST) - 1.0)


@dataclass(frozen=True)
class MelConfig:
    sample_rate_hz: int = 16000
    dft_size: int = 2048
    window_length: int = 400
    hop: int = 160
    num_bands: int = 96
    window_kind: str = "hann"
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.window_length > self.dft_size:
            raise ConfigError("window_length %d exceeds dft_size %d"
                              % (self.window_length, self.dft_size))
        if self.hop < 1:
            raise ConfigError("hop must be >= 1")
        if self.num_bands < 2:
            raise ConfigError("num_bands must be >= 2")
        if self.window_kind != "hann":
            raise ConfigError("unsupported window_kind %r" % self.window_kind)
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")

    @property
    def frames_per_second(self):
        return self.sample_rate_hz / self.hop

    def to_dict(self):
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "dft_size": self.dft_size,
            "window_length": self.window_length,
            "hop": self.hop,
            "num_bands": self.num_bands,
            "window_kind": self.window_kind,
            "log_floor": self.log_floor,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray      # (U, K//2 + 1), unit-peak triangles
    band_center_hz: np.ndarray

    @property
    def num_bands(self):
        return self.weights.shape[0]


@dataclass
class MelSpectrogram:
    values: np.ndarray       # (U, M) log10 magnitudes
    config: MelConfig
    source_id: str = ""

    @property
    def num_bands(self):
        return self.values.shape[0]

    @property
    def num_frames(self):
        return self.values.shape[1]

    def copy(self, values=None, source_id=None):
        return MelSpectrogram(
            values=np.array(self.values if values is None else values),
            config=self.config,
            source_id=self.source_id if source_id is None else source_id,
        )

    def save(self, path):
        tensorio.write_tensor(path, self.values)

    @classmethod
    def load(cls, path, config, source_id=""):
        return cls(values=tensorio.read_tensor(path).astype(float),
                   config=config, source_id=source_id)


def band_grid_mel(config):
    """U+2 uniformly spaced mel points from 0 Hz to Nyquist; interior
    points are the band centers."""
    lo = hz_to_mel(0.0)
    hi = hz_to_mel(config.sample_rate_hz / 2.0)
    return np.linspace(lo, hi, config.num_bands + 2)


def build_filterbank(config: MelConfig) -> MelFilterbank:
    """Triangular mel filterbank; adjacent triangles cross at 50% height."""
    n_bins = config.dft_size // 2 + 1
    bin_hz = np.arange(n_bins) * config.sample_rate_hz / config.dft_size
    edges_hz = mel_to_hz(band_grid_mel(config))

    weights = np.zeros((config.num_bands, n_bins))
    for u in range(config.num_bands):
        lo, ctr, hi = edges_hz[u], edges_hz[u + 1], edges_hz[u + 2]
        rising = (bin_hz - lo) / (ctr - lo)
        falling = (hi - bin_hz) / (hi - ctr)
        weights[u] = np.clip(np.minimum(rising, falling), 0.0, None)
        if not np.any(weights[u] > 0):
            raise ConfigError(
                "mel band %d is empty: too many bands for dft_size=%d at "
                "sample_rate_hz=%d" % (u, config.dft_size, config.sample_rate_hz))
    return MelFilterbank(weights=weights, band_center_hz=edges_hz[1:-1].copy())


def stft_magnitude(pcm, config):
    """Left-aligned frames, Hann window, |rfft|; returns (K//2+1, M)."""
    pcm = np.asarray(pcm, dtype=float)
    n, l = config.window_length, config.hop
    if len(pcm) < n:
        raise DataError("pcm of %d samples is shorter than one window (%d)"
                        % (len(pcm), n))
    m = (len(pcm) - n) // l + 1
    idx = np.arange(n)[None, :] + l * np.arange(m)[:, None]
    frames = pcm[idx] * np.hanning(n)[None, :]
    return np.abs(np.fft.rfft(frames, n=config.dft_size, axis=1)).T


def compute_mel(pcm, config: MelConfig, source_id: str = "",
                filterbank: MelFilterbank | None = None) -> MelSpectrogram:
    """Log-mel spectrogram: log10(max(floor, S @ |STFT|))."""
    if filterbank is None:
        filterbank = build_filterbank(config)
    mag = stft_magnitude(pcm, config)
    banded = filterbank.weights @ mag
    values = np.log10(np.maximum(config.log_floor, banded))
    return MelSpectrogram(values=values, config=config, source_id=source_id)


def log_silence(config):
    """The log-domain value representing zero energy."""
    return float(np.log10(config.log_floor))


def load_pcm_wav(path):
    """Mono 16-bit little-endian WAV -> (float samples in [-1, 1), rate)."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise DataError("%s: expected mono WAV" % path)
        if wf.getsampwidth() != 2:
            raise DataError("%s: expected 16-bit samples" % path)
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    return pcm, rate


def write_pcm_wav(path, pcm, rate):
    """Write float samples (clipped to [-1, 1)) as mono 16-bit WAV."""
    scaled = np.clip(np.asarray(pcm, dtype=float), -1.0, 32767.0 / 32768.0)
    data = (scaled * 32768.0).astype("<i2").tobytes()
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(rate))
        wf.writeframes(data)


def load_pcm_f32(path):
    """Raw float32 little-endian PCM; rate comes from the manifest."""
    return np.fromfile(str(path), dtype="<f4").astype(float)
