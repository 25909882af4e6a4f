"""Dataset manifests, local contrastive pair sampling, and a synthetic
music-like corpus with known BPM, key and tags.

Manifests are JSON lines, one record per line, with fields:
track_id, feature_path, duration_s, bpm, key_label, tags, split.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .analysis import PITCH_CLASSES
from .augment import AugmentationSpec, derive_rng
from .errors import DataError, TrackTooShort
from .melfront import (MelConfig, MelSpectrogram, build_filterbank,
                       compute_mel, load_pcm_f32, load_pcm_wav, write_pcm_wav)

KEY_VOCABULARY = tuple("%s:%s" % (pc, quality)
                       for pc in PITCH_CLASSES for quality in ("maj", "min"))

PAIR_MAX_SEPARATION_S = 5.0

TIMBRE_TAGS = ("sine", "saw-like", "noise-perc")


@dataclass
class TrackRecord:
    track_id: str
    feature_path: str
    duration_s: float
    bpm: float | None = None
    key_label: str | None = None
    tags: tuple = ()
    split: str = "train"

    def __post_init__(self):
        if self.bpm is not None and not (30.0 <= self.bpm <= 300.0):
            raise DataError("track %s: bpm %g outside [30, 300]"
                            % (self.track_id, self.bpm))
        if self.key_label is not None and self.key_label not in KEY_VOCABULARY:
            raise DataError("track %s: unknown key label %r"
                            % (self.track_id, self.key_label))
        if self.split not in ("train", "test"):
            raise DataError("track %s: unknown split %r" % (self.track_id, self.split))
        self.tags = tuple(self.tags)

    def to_dict(self):
        return {"track_id": self.track_id, "feature_path": self.feature_path,
                "duration_s": self.duration_s, "bpm": self.bpm,
                "key_label": self.key_label, "tags": list(self.tags),
                "split": self.split}

    @classmethod
    def from_dict(cls, d):
        return cls(track_id=d["track_id"], feature_path=d["feature_path"],
                   duration_s=float(d["duration_s"]), bpm=d.get("bpm"),
                   key_label=d.get("key_label"), tags=tuple(d.get("tags", ())),
                   split=d.get("split", "train"))


def write_manifest(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def read_manifest(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TrackRecord.from_dict(json.loads(line)))
    return records


def load_track_mel(record: TrackRecord, config: MelConfig, base_dir="",
                   filterbank=None) -> MelSpectrogram:
    """Load a track's features: .emlt files directly, audio via the
    frontend (raw .f32 assumes the manifest's declared sample rate)."""
    path = os.path.join(base_dir, record.feature_path)
    if path.endswith(".emlt"):
        return MelSpectrogram.load(path, config, source_id=record.track_id)
    if path.endswith(".wav"):
        pcm, rate = load_pcm_wav(path)
        if rate != config.sample_rate_hz:
            raise DataError("%s: rate %d != configured %d"
                            % (path, rate, config.sample_rate_hz))
    elif path.endswith(".f32"):
        pcm = load_pcm_f32(path)
    else:
        raise DataError("unrecognized feature file %s" % path)
    return compute_mel(pcm, config, source_id=record.track_id,
                       filterbank=filterbank)


# ---------------------------------------------------------------------------
# contrastive pair sampling

@dataclass
class PairSample:
    anchor: MelSpectrogram
    positive: MelSpectrogram
    track_id: str
    anchor_offset_s: float
    positive_offset_s: float


def sample_pair_offsets(duration_s, context_s, rng,
                        max_separation_s=PAIR_MAX_SEPARATION_S):
    """Anchor uniform over the valid range; positive uniform within
    +/- max_separation_s of it, clipped to track bounds."""
    hi = duration_s - context_s
    if duration_s < 2.0 * context_s + max_separation_s:
        raise TrackTooShort("duration %.2f s below minimum %.2f s"
                            % (duration_s, 2.0 * context_s + max_separation_s))
    anchor = rng.uniform(0.0, hi)
    positive = rng.uniform(max(0.0, anchor - max_separation_s),
                           min(hi, anchor + max_separation_s))
    return float(anchor), float(positive)


def sample_pair(record: TrackRecord, mel: MelSpectrogram,
                spec: AugmentationSpec, rng) -> PairSample:
    """Draw a locally-positioned pair of context segments from one track."""
    cfg = mel.config
    ctx_frames = spec.context_frames(cfg)
    a_off, p_off = sample_pair_offsets(record.duration_s, spec.context_seconds, rng)

    def segment(offset_s):
        start = int(round(offset_s * cfg.frames_per_second))
        start = min(start, mel.num_frames - ctx_frames)
        if start < 0:
            raise TrackTooShort("track %s has %d frames, need %d"
                                % (record.track_id, mel.num_frames, ctx_frames))
        return mel.copy(values=mel.values[:, start:start + ctx_frames])

    return PairSample(anchor=segment(a_off), positive=segment(p_off),
                      track_id=record.track_id,
                      anchor_offset_s=a_off, positive_offset_s=p_off)


# ---------------------------------------------------------------------------
# synthetic corpus

def _click_times(bpm, duration_s):
    period = 60.0 / bpm
    return np.arange(0.0, duration_s, period)


def synthesize_track(bpm, key_label, timbre, duration_s, rate, rng):
    """One music-like mono track: a click train at `bpm` plus a sustained
    triad in `key_label`, voiced per the timbre family."""
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    pc_name, quality = key_label.split(":")
    pc = PITCH_CLASSES.index(pc_name)
    root = 523.2511306011972 * 2.0 ** (pc / 12.0)   # C5-referenced roots
    third = root * 2.0 ** ((4 if quality == "maj" else 3) / 12.0)
    fifth = root * 2.0 ** (7.0 / 12.0)

    tonal = np.zeros(n)
    partials = [(root, 1.0), (2.0 * root, 0.45), (third, 0.4), (fifth, 0.5)]
    if timbre == "saw-like":
        partials += [(3.0 * root, 0.25), (4.0 * root, 0.18), (5.0 * root, 0.12)]
    for freq, amp in partials:
        if freq < rate / 2.0:
            tonal += amp * np.sin(2.0 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))

    clicks = np.zeros(n)
    burst_len = int(0.008 * rate)
    burst = rng.standard_normal(burst_len) * np.exp(-np.arange(burst_len) / (0.002 * rate))
    for ct in _click_times(bpm, duration_s):
        start = int(round(ct * rate))
        stop = min(n, start + burst_len)
        clicks[start:stop] += burst[:stop - start]

    if timbre == "noise-perc":
        signal = 0.35 * tonal + 1.0 * clicks
    else:
        signal = 1.0 * tonal + 0.5 * clicks
    peak = np.max(np.abs(signal))
    return 0.5 * signal / peak if peak > 0 else signal


def generate_synthetic_corpus(out_dir, num_tracks, rng=None, seed=0,
                              duration_s=16.0, sample_rate_hz=16000,
                              test_fraction=0.25):
    """Emit WAV files plus a manifest with ground-truth BPM, key and tags.

    BPM values cycle through an integer grid in [60, 180]; keys cycle
    through all 24 labels; timbre families alternate.
    """
    if rng is None:
        rng = derive_rng(seed, "corpus")
    os.makedirs(out_dir, exist_ok=True)
    bpm_grid = np.linspace(60, 180, 25).round().astype(int)
    # shuffle so tempo is statistically independent of the cycling key
    # assignment; cycling both grids would alias them together
    bpm_order = rng.permutation(len(bpm_grid))
    records = []
    for i in range(num_tracks):
        bpm = int(bpm_grid[bpm_order[i % len(bpm_grid)]])
        key = KEY_VOCABULARY[i % len(KEY_VOCABULARY)]
        timbre = TIMBRE_TAGS[i % len(TIMBRE_TAGS)]
        density = "dense-rhythm" if bpm >= 120 else "sparse-rhythm"
        track_rng = derive_rng(seed, "track", i)
        pcm = synthesize_track(bpm, key, timbre, duration_s, sample_rate_hz,
                               track_rng)
        track_id = "synth-%04d" % i
        wav_name = track_id + ".wav"
        write_pcm_wav(os.path.join(out_dir, wav_name), pcm, sample_rate_hz)
        split = "test" if track_rng.uniform() < test_fraction else "train"
        records.append(TrackRecord(
            track_id=track_id, feature_path=wav_name, duration_s=duration_s,
            bpm=float(bpm), key_label=key, tags=(timbre, density), split=split))
    write_manifest(os.path.join(out_dir, "manifest.jsonl"), records)
    return records


def extract_features(records, config: MelConfig, base_dir, out_dir):
    """PCM -> mel EMLT files; returns records rewritten to point at them."""
    os.makedirs(out_dir, exist_ok=True)
    fb = build_filterbank(config)
    out = []
    for rec in records:
        mel = load_track_mel(rec, config, base_dir=base_dir, filterbank=fb)
        name = rec.track_id + ".emlt"
        mel.save(os.path.join(out_dir, name))
        new = TrackRecord.from_dict(rec.to_dict())
        new.feature_path = name
        out.append(new)
    write_manifest(os.path.join(out_dir, "manifest.jsonl"), out)
    return out
