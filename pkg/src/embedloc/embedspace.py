"""Track embedding extraction, persistence, and exact cosine-distance
nearest neighbor search."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensorio
from .encoder import encode
from .errors import DataError, TrackTooShort


@dataclass
class EmbeddingSet:
    ids: list
    matrix: np.ndarray          # (N, D), unit rows, aligned with ids
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ids) != len(set(self.ids)):
            raise DataError("duplicate track ids in embedding set")
        if self.matrix.shape[0] != len(self.ids):
            raise DataError("id/matrix length mismatch")
        self._index = {tid: i for i, tid in enumerate(self.ids)}

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.ids)

    def vector(self, track_id):
        if track_id not in self._index:
            raise DataError("unknown track id %r" % track_id)
        return self.matrix[self._index[track_id]]

    def save(self, path_prefix):
        tensorio.write_tensor(path_prefix + ".emlt", self.matrix)
        header = {"dim": int(self.dim), "ids": list(self.ids),
                  "provenance": self.provenance}
        with open(path_prefix + ".json", "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=2)

    @classmethod
    def load(cls, path_prefix):
        with open(path_prefix + ".json", "r", encoding="utf-8") as fh:
            header = json.load(fh)
        matrix = tensorio.read_tensor(path_prefix + ".emlt").astype(float)
        return cls(ids=list(header["ids"]), matrix=matrix,
                   provenance=header.get("provenance", {}))


def track_windows(mel, window_frames, hop_frames=None):
    """Consecutive windows over the track; non-overlapping by default."""
    if hop_frames is None:
        hop_frames = window_frames
    starts = range(0, mel.num_frames - window_frames + 1, hop_frames)
    return [mel.values[:, s:s + window_frames] for s in starts]


def embed_track(mel, params, window_frames, hop_frames=None):
    """Track-average embedding: per-window embeddings averaged then
    re-normalized to unit length."""
    windows = track_windows(mel, window_frames, hop_frames)
    if not windows:
        raise TrackTooShort("track %s: %d frames < window of %d"
                            % (mel.source_id, mel.num_frames, window_frames))
    z = encode(params, np.stack(windows))
    mean = z.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise DataError("degenerate zero-mean embedding for %s" % mel.source_id)
    return mean / norm


def build_embedding_set(mels, params, window_frames, provenance=None):
    """Embed an iterable of MelSpectrograms (keyed by source_id)."""
    ids, rows = [], []
    for mel in mels:
        rows.append(embed_track(mel, params, window_frames))
        ids.append(mel.source_id)
    return EmbeddingSet(ids=ids, matrix=np.stack(rows),
                        provenance=provenance or {})


def cosine_distance(a, b):
    return 1.0 - float(np.dot(a, b))


def knn(emb_set: EmbeddingSet, query_id, k):
    """Exact k nearest neighbors by cosine distance, query excluded;
    ties broken by ascending track id."""
    if k >= len(emb_set):
        raise DataError("k=%d must be < set size %d" % (k, len(emb_set)))
    q = emb_set.vector(query_id)
    dists = 1.0 - emb_set.matrix @ q
    order = sorted(
        (i for i, tid in enumerate(emb_set.ids) if tid != query_id),
        key=lambda i: (dists[i], emb_set.ids[i]))
    return [(emb_set.ids[i], float(dists[i])) for i in order[:k]]
