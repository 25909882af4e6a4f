"""Tempo classification probe over embeddings: 271 integer-BPM classes
(30..300), one 512-unit hidden layer with 75% dropout, argmax after
Hamming-window smoothing; scored with Acc1/Acc2."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensorio
from .augment import derive_rng
from .errors import ConfigError, DataError, NumericalError

BPM_MIN = 30
BPM_MAX = 300
NUM_CLASSES = BPM_MAX - BPM_MIN + 1   # 271
SMOOTHING_TAPS = 15

ACC_TOLERANCE = 0.04
ACC2_OCTAVES = (1.0 / 3.0, 0.5, 1.0, 2.0, 3.0)


@dataclass
class ProbeConfig:
    batch_size: int = 64
    total_steps: int = 2000
    learning_rate: float = 0.05
    dropout: float = 0.75
    hidden_units: int = 512
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must be in [0, 1)")
        if self.batch_size < 1 or self.total_steps < 1:
            raise ConfigError("batch_size and total_steps must be positive")

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "batch_size", "total_steps", "learning_rate", "dropout",
            "hidden_units", "rng_seed")}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ProbeModel:
    w1: np.ndarray   # (hidden, D)
    b1: np.ndarray
    w2: np.ndarray   # (NUM_CLASSES, hidden)
    b2: np.ndarray

    @classmethod
    def init(cls, dim, hidden_units, rng):
        return cls(
            w1=rng.standard_normal((hidden_units, dim)) / np.sqrt(dim),
            b1=np.zeros(hidden_units),
            w2=rng.standard_normal((NUM_CLASSES, hidden_units)) / np.sqrt(hidden_units),
            b2=np.zeros(NUM_CLASSES),
        )

    def tensors(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def probe_scores(model: ProbeModel, embeddings, dropout_mask=None):
    """Class scores (logits); dropout_mask applies only during training."""
    x = np.atleast_2d(np.asarray(embeddings, dtype=float))
    h = np.maximum(0.0, x @ model.w1.T + model.b1)
    if dropout_mask is not None:
        h = h * dropout_mask
    return h, h @ model.w2.T + model.b2


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def train_probe(emb_set, records, config: ProbeConfig, split="train"):
    """Crossentropy training of the probe on integer-BPM targets."""
    bpm = {r.track_id: r.bpm for r in records}
    split_of = {r.track_id: r.split for r in records}
    missing = [tid for tid in emb_set.ids if bpm.get(tid) is None]
    if missing:
        raise DataError("tracks without bpm labels: %s" % ", ".join(sorted(missing)))
    usable = [tid for tid in emb_set.ids if split_of.get(tid) == split]
    if not usable:
        usable = list(emb_set.ids)
    classes = np.array([int(round(bpm[tid])) - BPM_MIN for tid in usable])
    if len(set(classes)) < 2:
        raise DataError("need at least 2 distinct BPM classes to train")
    x_all = np.stack([emb_set.vector(tid) for tid in usable])

    model = ProbeModel.init(emb_set.dim, config.hidden_units,
                            derive_rng(config.rng_seed, "probe-init"))
    keep = 1.0 - config.dropout
    losses = []
    for step in range(config.total_steps):
        rng = derive_rng(config.rng_seed, "probe-step", step)
        picks = rng.integers(0, len(usable), size=config.batch_size)
        x = x_all[picks]
        y = classes[picks]
        mask = (rng.uniform(size=(len(picks), config.hidden_units)) < keep) / keep
        h, logits = probe_scores(model, x, dropout_mask=mask)
        probs = _softmax(logits)
        loss = -np.mean(np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300)))
        if not np.isfinite(loss):
            raise NumericalError("probe loss non-finite at step %d" % step)
        dlogits = probs
        dlogits[np.arange(len(y)), y] -= 1.0
        dlogits /= len(y)
        gw2 = dlogits.T @ h
        gb2 = dlogits.sum(axis=0)
        dh = (dlogits @ model.w2) * (h > 0)
        gw1 = dh.T @ x
        gb1 = dh.sum(axis=0)
        lr = config.learning_rate
        model.w1 -= lr * gw1
        model.b1 -= lr * gb1
        model.w2 -= lr * gw2
        model.b2 -= lr * gb2
        losses.append(float(loss))
    return model, losses


def smooth_scores(scores, taps=SMOOTHING_TAPS):
    """Same-length zero-padded convolution with a Hamming window along
    the BPM axis."""
    window = np.hamming(taps)
    return np.convolve(np.asarray(scores, dtype=float), window, mode="same")


def estimate_tempo(model: ProbeModel, embedding):
    """Integer BPM: argmax of smoothed class scores; ties -> lowest BPM."""
    _, logits = probe_scores(model, embedding)
    smoothed = smooth_scores(logits[0])
    return BPM_MIN + int(np.argmax(smoothed))


def acc1(estimates, truths, tolerance=ACC_TOLERANCE):
    """Fraction of estimates within +/- tolerance of the true tempo."""
    est, tru = _check_aligned(estimates, truths)
    return float(np.mean(np.abs(est - tru) / tru <= tolerance))


def acc2(estimates, truths, tolerance=ACC_TOLERANCE, octaves=ACC2_OCTAVES):
    """Like acc1 but against any tempo-octave multiple of the truth."""
    est, tru = _check_aligned(estimates, truths)
    hits = np.zeros(len(est), dtype=bool)
    for o in octaves:
        ref = tru * o
        hits |= np.abs(est - ref) / ref <= tolerance
    return float(np.mean(hits))


def _check_aligned(estimates, truths):
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if len(est) != len(tru):
        raise DataError("estimate/truth length mismatch")
    if len(est) == 0:
        raise DataError("accuracy undefined on an empty evaluation set")
    return est, tru


def save_probe(path, model: ProbeModel, config: ProbeConfig, extra=None):
    os.makedirs(path, exist_ok=True)
    header = {"tensors": {}, "config": config.to_dict(),
              "bpm_min": BPM_MIN, "bpm_max": BPM_MAX}
    if extra:
        header.update(extra)
    for name, tensor in model.tensors().items():
        fname = name + ".emlt"
        tensorio.write_tensor(os.path.join(path, fname), tensor)
        header["tensors"][name] = {"file": fname, "dims": list(tensor.shape)}
    with open(os.path.join(path, "header.json"), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2)


def load_probe(path):
    with open(os.path.join(path, "header.json"), "r", encoding="utf-8") as fh:
        header = json.load(fh)
    tensors = {name: tensorio.read_tensor(os.path.join(path, meta["file"])).astype(float)
               for name, meta in header["tensors"].items()}
    return ProbeModel(**tensors), ProbeConfig.from_dict(header["config"]), header
