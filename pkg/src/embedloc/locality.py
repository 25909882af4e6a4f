"""Embedding-space locality experiments: manipulation sweeps and
neighborhood metrics (tempo RMMS, key precision, tag precision, tag
retrieval)."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .augment import PitchShiftParams, TimeStretchParams, pitch_shift, time_stretch
from .embedspace import EmbeddingSet, cosine_distance, embed_track, knn
from .errors import ConfigError, DataError

TEMPO_OCTAVES = (1.0 / 3.0, 0.5, 1.0, 2.0, 3.0)

DEFAULT_STRETCH_GRID = tuple(2.0 ** (i / 8.0) for i in range(-8, 9))
DEFAULT_PITCH_GRID = tuple(range(-12, 13))   # semitones


@dataclass
class SweepResult:
    kind: str
    factors: list
    distances: dict              # factor -> list of per-track distances
    provenance: dict = field(default_factory=dict)

    def mean(self, factor):
        return float(np.mean(self.distances[factor]))

    def iqr(self, factor):
        lo, hi = np.percentile(self.distances[factor], [25, 75])
        return float(hi - lo)

    def to_json(self, path):
        payload = {"kind": self.kind, "factors": list(self.factors),
                   "provenance": self.provenance,
                   "rows": [{"factor": f, "mean": self.mean(f),
                             "iqr": self.iqr(f),
                             "distances": [float(d) for d in self.distances[f]]}
                            for f in self.factors]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["factor", "mean_distance", "iqr"])
            for f in self.factors:
                writer.writerow([f, self.mean(f), self.iqr(f)])


def manipulation_sweep(mels, params, kind, grid, window_frames,
                       provenance=None) -> SweepResult:
    """Cosine distance between track-average embeddings of modified and
    unmodified tracks, per grid factor.

    kind "time_stretch": factors are stretch ratios; "pitch_shift":
    factors are semitone offsets.
    """
    if kind not in ("time_stretch", "pitch_shift"):
        raise ConfigError("unknown sweep kind %r" % kind)
    identity = 1.0 if kind == "time_stretch" else 0.0
    if not any(np.isclose(f, identity) for f in grid):
        raise ConfigError("sweep grid must contain the identity factor")

    base = {mel.source_id: embed_track(mel, params, window_frames)
            for mel in mels}
    distances = {f: [] for f in grid}
    for mel in mels:
        for f in grid:
            if kind == "time_stretch":
                modified = time_stretch(mel, TimeStretchParams(tau=float(f)))
            else:
                modified = pitch_shift(mel, PitchShiftParams(mu=2.0 ** (f / 12.0)))
            emb = embed_track(modified, params, window_frames)
            distances[f].append(cosine_distance(base[mel.source_id], emb))
    return SweepResult(kind=kind, factors=list(grid), distances=distances,
                       provenance=provenance or {})


# ---------------------------------------------------------------------------
# neighborhood metrics

def _bpm_map(records):
    return {r.track_id: r.bpm for r in records}


def _key_map(records):
    return {r.track_id: r.key_label for r in records}


def _tag_map(records):
    return {r.track_id: set(r.tags) for r in records}


def _neighbor_ids(emb_set, seed_id, k):
    return [tid for tid, _ in knn(emb_set, seed_id, k)]


def tempo_rmms(emb_set: EmbeddingSet, records, k):
    """Mean over seeds of sqrt(mean_j min_o (o*bpm_seed - bpm_j)^2),
    octaves o applied to the seed's tempo."""
    bpm = _bpm_map(records)
    per_seed = []
    for seed in emb_set.ids:
        if bpm.get(seed) is None:
            continue
        candidates = [o * bpm[seed] for o in TEMPO_OCTAVES]
        sq = [min((c - bpm[nb]) ** 2 for c in candidates)
              for nb in _neighbor_ids(emb_set, seed, k)
              if bpm.get(nb) is not None]
        if sq:
            per_seed.append(np.sqrt(np.mean(sq)))
    if not per_seed:
        raise DataError("no seeds with tempo labels")
    return float(np.mean(per_seed))


def key_precision(emb_set: EmbeddingSet, records, k):
    """Mean over seeds of the fraction of k neighbors sharing the seed's
    key label."""
    keys = _key_map(records)
    per_seed = []
    for seed in emb_set.ids:
        if keys.get(seed) is None:
            continue
        hits = sum(1 for nb in _neighbor_ids(emb_set, seed, k)
                   if keys.get(nb) == keys[seed])
        per_seed.append(hits / k)
    if not per_seed:
        raise DataError("no seeds with key labels")
    return float(np.mean(per_seed))


def tag_precision(emb_set: EmbeddingSet, records, k):
    """Mean over seeds of (retrieved neighbor tags that the seed also
    carries) / (all retrieved neighbor tags)."""
    tags = _tag_map(records)
    per_seed = []
    for seed in emb_set.ids:
        seed_tags = tags.get(seed)
        if not seed_tags:
            continue
        retrieved = 0
        matched = 0
        for nb in _neighbor_ids(emb_set, seed, k):
            for t in tags.get(nb, ()):
                retrieved += 1
                if t in seed_tags:
                    matched += 1
        per_seed.append(matched / retrieved if retrieved else 0.0)
    if not per_seed:
        raise DataError("no seeds with tags")
    return float(np.mean(per_seed))


def tag_retrieval(emb_set: EmbeddingSet, records, k):
    """Per tag, the fraction of carrier tracks whose k-neighborhood
    contains another carrier; averaged over tags. Single-carrier tags
    score zero."""
    tags = _tag_map(records)
    carriers = {}
    for tid in emb_set.ids:
        for t in tags.get(tid, ()):
            carriers.setdefault(t, []).append(tid)
    if not carriers:
        raise DataError("no tags present")
    neighborhoods = {tid: set(_neighbor_ids(emb_set, tid, k))
                     for tid in emb_set.ids}
    per_tag = []
    for t, members in carriers.items():
        member_set = set(members)
        hits = sum(1 for tid in members
                   if neighborhoods[tid] & (member_set - {tid}))
        per_tag.append(hits / len(members))
    return float(np.mean(per_tag))


@dataclass
class NeighborhoodReport:
    k_grid: list
    tempo_rmms: dict
    key_precision: dict
    tag_precision: dict
    tag_retrieval: dict
    provenance: dict = field(default_factory=dict)

    METRICS = ("tempo_rmms", "key_precision", "tag_precision", "tag_retrieval")

    def to_json(self, path):
        payload = {"k_grid": list(self.k_grid), "provenance": self.provenance}
        for m in self.METRICS:
            payload[m] = {str(k): v for k, v in getattr(self, m).items()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k"] + list(self.METRICS))
            for k in self.k_grid:
                writer.writerow([k] + [getattr(self, m).get(k, "") for m in self.METRICS])


def compute_neighborhood_report(emb_set, records, k_grid,
                                provenance=None) -> NeighborhoodReport:
    report = NeighborhoodReport(
        k_grid=list(k_grid), tempo_rmms={}, key_precision={},
        tag_precision={}, tag_retrieval={}, provenance=provenance or {})
    for k in k_grid:
        report.tempo_rmms[k] = tempo_rmms(emb_set, records, k)
        report.key_precision[k] = key_precision(emb_set, records, k)
        report.tag_precision[k] = tag_precision(emb_set, records, k)
        report.tag_retrieval[k] = tag_retrieval(emb_set, records, k)
    return report
