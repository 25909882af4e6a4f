"""Mel-spectrogram augmentations: time-stretch (TS), pitch-shift (PS),
equalization (EQ) and random-resized-crop (RRC), plus their parameter
samplers and chained application.

Pipeline order is always TS -> PS -> EQ. RRC is an alternative to TS/PS
and may not be combined with them; RRC + EQ is allowed.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DataError
from .melfront import MelSpectrogram, build_filterbank, log_silence

TAU_RANGE = (0.75, 1.5)
TAU_OP_RANGE = (0.25, 4.0)
MU_RANGE = (0.749, 1.335)
LOWPASS_CORNER_RANGE = (2200.0, 4000.0)
HIGHPASS_CORNER_RANGE = (200.0, 1200.0)
RRC_TIME_SCALE_RANGE = (0.6, 1.0)
RRC_FREQ_SCALE_RANGE = (0.6, 1.0)

STAGES = ("TS", "PS", "EQ", "RRC")


# ---------------------------------------------------------------------------
# parameter types

@dataclass(frozen=True)
class TimeStretchParams:
    tau: float

    def __post_init__(self):
        if not (TAU_OP_RANGE[0] < self.tau < TAU_OP_RANGE[1]):
            raise ConfigError("tau %g outside operational range %s"
                              % (self.tau, (TAU_OP_RANGE,)))


@dataclass(frozen=True)
class PitchShiftParams:
    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("mu must be positive")


@dataclass(frozen=True)
class EqParams:
    mode: str                 # none | lowpass | highpass
    corner_hz: float = 0.0
    order: int = 3

    def __post_init__(self):
        if self.mode not in ("none", "lowpass", "highpass"):
            raise ConfigError("unknown EQ mode %r" % self.mode)
        if self.mode == "lowpass" and not (
                LOWPASS_CORNER_RANGE[0] <= self.corner_hz <= LOWPASS_CORNER_RANGE[1]):
            raise ConfigError("lowpass corner %g Hz outside %s"
                              % (self.corner_hz, (LOWPASS_CORNER_RANGE,)))
        if self.mode == "highpass" and not (
                HIGHPASS_CORNER_RANGE[0] <= self.corner_hz <= HIGHPASS_CORNER_RANGE[1]):
            raise ConfigError("highpass corner %g Hz outside %s"
                              % (self.corner_hz, (HIGHPASS_CORNER_RANGE,)))
        if self.order != 3:
            raise ConfigError("only third-order EQ is supported")


@dataclass(frozen=True)
class RrcParams:
    time_scale: float
    freq_scale: float
    time_offset: float = 0.0
    freq_offset: float = 0.0

    def __post_init__(self):
        if self.time_scale <= 0 or self.freq_scale <= 0:
            raise ConfigError("RRC scales must be positive")
        if self.time_scale > 1.0 or self.freq_scale > 1.0:
            raise ConfigError("RRC crop must lie inside the source")
        if not (0.0 <= self.time_offset <= 1.0 and 0.0 <= self.freq_offset <= 1.0):
            raise ConfigError("RRC offsets must be fractions in [0, 1]")


@dataclass(frozen=True)
class AugmentationSpec:
    chain: tuple = ()
    rng_seed: int = 0
    context_seconds: float = 4.5
    output_seconds: float = 3.0

    def __post_init__(self):
        chain = tuple(self.chain)
        object.__setattr__(self, "chain", chain)
        for stage in chain:
            if stage not in STAGES:
                raise ConfigError("unknown augmentation stage %r" % stage)
        if len(set(chain)) != len(chain):
            raise ConfigError("duplicate stages in chain %s" % (chain,))
        if "RRC" in chain and ({"TS", "PS"} & set(chain)):
            raise ConfigError("RRC may not be combined with TS or PS")
        order = [s for s in ("TS", "PS", "EQ") if s in chain]
        if order != [s for s in chain if s in ("TS", "PS", "EQ")]:
            raise ConfigError("chain %s violates TS -> PS -> EQ order" % (chain,))
        if self.context_seconds < self.output_seconds:
            raise ConfigError("context_seconds must cover output_seconds")

    @property
    def chain_id(self):
        return "+".join(self.chain) if self.chain else "none"

    def context_frames(self, config):
        return int(round(self.context_seconds * config.frames_per_second))

    def output_frames(self, config):
        return int(round(self.output_seconds * config.frames_per_second))

    def to_dict(self):
        return {"chain": list(self.chain), "rng_seed": self.rng_seed,
                "context_seconds": self.context_seconds,
                "output_seconds": self.output_seconds}

    @classmethod
    def from_dict(cls, d):
        return cls(chain=tuple(d.get("chain", ())),
                   rng_seed=int(d.get("rng_seed", 0)),
                   context_seconds=float(d.get("context_seconds", 4.5)),
                   output_seconds=float(d.get("output_seconds", 3.0)))


# ---------------------------------------------------------------------------
# RNG derivation: scheduling-independent per-sample streams

def derive_rng(seed, *keys):
    """Deterministic child RNG from a base seed and hashable keys."""
    digest = hashlib.sha256(repr((int(seed),) + keys).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


# ---------------------------------------------------------------------------
# parameter samplers

def _log_uniform(rng, lo, hi):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_tau(rng) -> TimeStretchParams:
    """tau ~ 1/(tau * log(1.5/0.75)) on [0.75, 1.5] (log-uniform)."""
    return TimeStretchParams(tau=_log_uniform(rng, *TAU_RANGE))


def sample_mu(rng) -> PitchShiftParams:
    """mu ~ 1/(mu * log(1.335/0.749)) on [0.749, 1.335] (log-uniform)."""
    return PitchShiftParams(mu=_log_uniform(rng, *MU_RANGE))


def sample_eq(rng) -> EqParams:
    """Equal thirds none / lowpass / highpass; corner uniform per mode."""
    mode = ("none", "lowpass", "highpass")[rng.integers(3)]
    if mode == "none":
        return EqParams(mode="none")
    lo, hi = LOWPASS_CORNER_RANGE if mode == "lowpass" else HIGHPASS_CORNER_RANGE
    return EqParams(mode=mode, corner_hz=float(rng.uniform(lo, hi)))


def sample_rrc(rng) -> RrcParams:
    return RrcParams(
        time_scale=_log_uniform(rng, *RRC_TIME_SCALE_RANGE),
        freq_scale=float(rng.uniform(*RRC_FREQ_SCALE_RANGE)),
        time_offset=float(rng.uniform()),
        freq_offset=float(rng.uniform()),
    )


# ---------------------------------------------------------------------------
# frequency warp (pitch shift geometry)

def mel_band_scale(num_bands, sample_rate_hz):
    """S_U = U / log10(1 + R/700): bands per decade-ish on the HTK axis."""
    return num_bands / np.log10(1.0 + sample_rate_hz / 700.0)


def warp_band_position(u, mu, num_bands, sample_rate_hz):
    """Band-axis position that linear frequency mu * f(u) maps to, where
    f(u) is the linear frequency of band position u."""
    s = mel_band_scale(num_bands, sample_rate_hz)
    u = np.asarray(u, dtype=float)
    return s * np.log10(1.0 + mu * (10.0 ** (u / s) - 1.0))


# ---------------------------------------------------------------------------
# transforms

def center_crop(x: MelSpectrogram, frames: int) -> MelSpectrogram:
    if x.num_frames < frames:
        raise DataError("cannot crop %d frames from %d" % (frames, x.num_frames))
    start = (x.num_frames - frames) // 2
    return x.copy(values=x.values[:, start:start + frames])


def time_stretch(x: MelSpectrogram, p: TimeStretchParams,
                 out_frames: int | None = None) -> MelSpectrogram:
    """Resample along time at positions tau*m with a natural cubic spline.

    out_frames=None stretches the full source extent.
    """
    m_src = x.num_frames
    if m_src < 2:
        raise DataError("need at least 2 frames to stretch")
    max_out = int(np.floor((m_src - 1) / p.tau)) + 1
    if out_frames is None:
        out_frames = max_out
    elif out_frames > max_out:
        raise DataError(
            "insufficient context: tau=%g over %d output frames needs %d "
            "source frames, have %d"
            % (p.tau, out_frames, int(np.ceil(p.tau * (out_frames - 1))) + 1, m_src))
    spline = CubicSpline(np.arange(m_src), x.values, axis=1, bc_type="natural")
    t = np.clip(p.tau * np.arange(out_frames), 0, m_src - 1)
    return x.copy(values=spline(t))


def pitch_shift(x: MelSpectrogram, p: PitchShiftParams) -> MelSpectrogram:
    """Warp the band axis so content at linear frequency f moves to mu*f.

    Output band v interpolates the source column at the inverse warp
    position; positions beyond the top band (mu < 1) become silence.
    """
    u_count = x.num_bands
    cfg = x.config
    src_pos = warp_band_position(np.arange(u_count), 1.0 / p.mu,
                                 u_count, cfg.sample_rate_hz)
    valid = src_pos <= u_count - 1
    spline = CubicSpline(np.arange(u_count), x.values, axis=0, bc_type="natural")
    out = spline(np.clip(src_pos, 0, u_count - 1))
    out[~valid, :] = log_silence(cfg)
    return x.copy(values=out)


def butterworth_magnitude(freq_hz, corner_hz, mode, order=3):
    """Analytic third-order Butterworth magnitude response."""
    r = np.asarray(freq_hz, dtype=float) / corner_hz
    r2n = r ** (2 * order)
    if mode == "lowpass":
        return 1.0 / np.sqrt(1.0 + r2n)
    if mode == "highpass":
        return r ** order / np.sqrt(1.0 + r2n)
    raise ConfigError("unknown Butterworth mode %r" % mode)


def eq_offsets(config, p: EqParams, filterbank=None):
    """Per-band additive log offsets log10(sum_k S_u[k] B[k]) with
    row-sum-normalized filterbank rows."""
    if p.mode == "none":
        return np.zeros(config.num_bands)
    if filterbank is None:
        filterbank = build_filterbank(config)
    n_bins = filterbank.weights.shape[1]
    bin_hz = np.arange(n_bins) * config.sample_rate_hz / config.dft_size
    response = butterworth_magnitude(bin_hz, p.corner_hz, p.mode, p.order)
    rows = filterbank.weights / filterbank.weights.sum(axis=1, keepdims=True)
    banded = rows @ response
    return np.log10(np.maximum(banded, 1e-300))


def equalize(x: MelSpectrogram, p: EqParams, filterbank=None) -> MelSpectrogram:
    if p.mode == "none":
        return x.copy()
    offs = eq_offsets(x.config, p, filterbank)
    return x.copy(values=x.values + offs[:, None])


def _resize_bilinear(arr, out_rows, out_cols):
    """Align-corners bilinear resize of a 2-D array."""
    rows, cols = arr.shape

    def positions(n_out, n_src):
        if n_out == 1 or n_src == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * (n_src - 1) / (n_out - 1)

    r = positions(out_rows, rows)
    c = positions(out_cols, cols)
    r0 = np.floor(r).astype(int)
    c0 = np.floor(c).astype(int)
    r1 = np.minimum(r0 + 1, rows - 1)
    c1 = np.minimum(c0 + 1, cols - 1)
    fr = (r - r0)[:, None]
    fc = (c - c0)[None, :]
    top = arr[np.ix_(r0, c0)] * (1 - fc) + arr[np.ix_(r0, c1)] * fc
    bot = arr[np.ix_(r1, c0)] * (1 - fc) + arr[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def random_resized_crop(x: MelSpectrogram, p: RrcParams,
                        out_frames: int | None = None) -> MelSpectrogram:
    """Crop a time/frequency sub-rectangle (scales are fractions of the
    source extents) and resize it back to the full band grid."""
    u_count, m_src = x.values.shape
    if out_frames is None:
        out_frames = m_src
    crop_f = max(2, int(round(p.time_scale * m_src)))
    crop_u = max(2, int(round(p.freq_scale * u_count)))
    if crop_f > m_src or crop_u > u_count:
        raise DataError("RRC crop exceeds source extent")
    f0 = int(round(p.time_offset * (m_src - crop_f)))
    u0 = int(round(p.freq_offset * (u_count - crop_u)))
    patch = x.values[u0:u0 + crop_u, f0:f0 + crop_f]
    return x.copy(values=_resize_bilinear(patch, u_count, out_frames))


def apply_chain(x: MelSpectrogram, spec: AugmentationSpec, rng=None) -> MelSpectrogram:
    """Sample parameters for every enabled stage and apply them in
    pipeline order; the result always has output_seconds of frames."""
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    ctx = spec.context_frames(x.config)
    out = spec.output_frames(x.config)
    if x.num_frames < ctx:
        raise DataError("input has %d frames, chain needs %d of context"
                        % (x.num_frames, ctx))
    work = center_crop(x, ctx)
    if "RRC" in spec.chain:
        work = random_resized_crop(work, sample_rrc(rng), out_frames=out)
    elif "TS" in spec.chain:
        work = time_stretch(work, sample_tau(rng), out_frames=out)
    else:
        work = center_crop(work, out)
    if "PS" in spec.chain:
        work = pitch_shift(work, sample_mu(rng))
    if "EQ" in spec.chain:
        work = equalize(work, sample_eq(rng))
    return work
