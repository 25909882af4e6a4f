"""Small contrastive encoder trained with NT-Xent on locally sampled,
independently augmented pairs.

Architecture: fixed temporal pooling -> linear -> tanh -> linear -> L2
normalize. A pure time average is blind to tempo (resampling the time
axis preserves it), so pooling concatenates three summaries per patch:
per-band time average, per-band mean absolute frame difference, and a
log-lag autocorrelation of the band-averaged envelope. Gradients are
analytic; the loss gradient is checked against finite differences in
the test suite.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensorio
from .augment import AugmentationSpec, apply_chain, derive_rng
from .corpus import load_track_mel, sample_pair
from .errors import ConfigError, DataError, NumericalError


@dataclass
class TrainConfig:
    batch_pairs: int = 64
    total_steps: int = 5000
    warmup_steps: int = 250
    peak_lr: float = 0.001
    temperature: float = 0.1
    momentum: float = 0.0
    embedding_dim: int = 64
    hidden_units: int = 256
    rng_seed: int = 0

    def __post_init__(self):
        if self.warmup_steps >= self.total_steps:
            raise ConfigError("warmup_steps must be < total_steps")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.batch_pairs < 2:
            raise ConfigError("need at least 2 pairs per batch")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must be in [0, 1)")

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "batch_pairs", "total_steps", "warmup_steps", "peak_lr",
            "temperature", "momentum", "embedding_dim", "hidden_units",
            "rng_seed")}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


ENVELOPE_LAGS = np.unique(np.round(
    np.geomspace(8, 128, 24)).astype(int))   # frames, log-spaced


def pool_features(batch_values):
    """Fixed temporal pooling of (B, U, M) patches to (B, 2U + L).

    Concatenates the per-band time average, the per-band mean absolute
    frame-to-frame difference (scales with stretch factor), and the
    normalized autocorrelation of the band-averaged envelope at
    log-spaced lags (shifts along log-lag under stretch).
    """
    x = np.asarray(batch_values, dtype=float)
    if x.ndim == 2:
        x = x[None]
    mean = x.mean(axis=2)
    diff = np.abs(np.diff(x, axis=2)).mean(axis=2)
    env = x.mean(axis=1)
    env = env - env.mean(axis=1, keepdims=True)
    m = env.shape[1]
    power = np.maximum(np.sum(env * env, axis=1), 1e-12)
    lags = ENVELOPE_LAGS[ENVELOPE_LAGS < m]
    ac = np.zeros((x.shape[0], len(ENVELOPE_LAGS)))
    for j, lag in enumerate(lags):
        ac[:, j] = np.sum(env[:, lag:] * env[:, :m - lag], axis=1) / power
    # bring the three groups to comparable per-dimension magnitude
    return np.concatenate([mean, 16.0 * diff, 24.0 * ac], axis=1)


def feature_dim(num_bands):
    return 2 * num_bands + len(ENVELOPE_LAGS)


@dataclass
class EncoderParams:
    w1: np.ndarray   # (hidden, feature_dim)
    b1: np.ndarray
    w2: np.ndarray   # (D, hidden)
    b2: np.ndarray

    @classmethod
    def init(cls, num_bands, hidden_units, embedding_dim, rng):
        f = feature_dim(num_bands)
        return cls(
            w1=rng.standard_normal((hidden_units, f)) / np.sqrt(f),
            b1=np.zeros(hidden_units),
            w2=rng.standard_normal((embedding_dim, hidden_units)) / np.sqrt(hidden_units),
            b2=np.zeros(embedding_dim),
        )

    def tensors(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def encode(params: EncoderParams, batch_values, return_cache=False):
    """Map (B, U, M) mel patches to (B, D) unit vectors."""
    pooled = pool_features(batch_values)
    h = np.tanh(pooled @ params.w1.T + params.b1)
    e = h @ params.w2.T + params.b2
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    z = e / norms
    if return_cache:
        return z, (pooled, h, e, norms)
    return z


def encode_backward(params, cache, dz):
    """Gradients of a scalar loss w.r.t. encoder parameters, given dL/dz."""
    pooled, h, e, norms = cache
    z = e / norms
    de = (dz - z * np.sum(dz * z, axis=1, keepdims=True)) / norms
    gw2 = de.T @ h
    gb2 = de.sum(axis=0)
    dh = de @ params.w2
    dpre = dh * (1.0 - h * h)
    gw1 = dpre.T @ pooled
    gb1 = dpre.sum(axis=0)
    return {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2}


def ntxent_loss(embeddings, temperature):
    """NT-Xent over 2B unit vectors paired as (2i, 2i+1).

    Returns (loss, gradient w.r.t. the embeddings). Each anchor's
    positive competes against the other 2B-2 vectors in the batch.
    """
    z = np.asarray(embeddings, dtype=float)
    n = z.shape[0]
    if n < 4 or n % 2:
        raise DataError("need 2B embeddings with B >= 2, got %d" % n)
    sims = (z @ z.T) / temperature
    np.fill_diagonal(sims, -np.inf)
    pos = np.arange(n) ^ 1
    row_max = sims.max(axis=1, keepdims=True)
    expd = np.exp(sims - row_max)
    denom = expd.sum(axis=1)
    log_probs = sims[np.arange(n), pos] - (row_max[:, 0] + np.log(denom))
    loss = -log_probs.mean()

    probs = expd / denom[:, None]          # softmax over b != i
    grad_sims = probs.copy()
    grad_sims[np.arange(n), pos] -= 1.0
    grad_sims /= n
    dz = (grad_sims + grad_sims.T) @ z / temperature
    return loss, dz


def lr_at(step, config: TrainConfig):
    """Linear warmup to peak_lr, then cosine decay to zero."""
    if not (0 <= step <= config.total_steps):
        raise ConfigError("step %d outside [0, %d]" % (step, config.total_steps))
    if step < config.warmup_steps:
        return config.peak_lr * step / config.warmup_steps
    span = config.total_steps - config.warmup_steps
    frac = (step - config.warmup_steps) / span
    return config.peak_lr * 0.5 * (1.0 + np.cos(np.pi * frac))


def usable_train_tracks(records, aug_spec: AugmentationSpec):
    minimum = 2.0 * aug_spec.context_seconds + 5.0
    return [r for r in records if r.split == "train" and r.duration_s >= minimum]


def train(records, aug_spec: AugmentationSpec, config: TrainConfig,
          mel_config, base_dir="", mel_cache=None, loss_hook=None):
    """SGD over NT-Xent on augmented local pairs; single-threaded and
    bit-reproducible for a fixed seed.

    Returns (params, per-step loss list).
    """
    tracks = usable_train_tracks(records, aug_spec)
    if len(tracks) < 2:
        raise DataError("need at least 2 usable train tracks, have %d" % len(tracks))
    if mel_cache is None:
        mel_cache = {}
    for rec in tracks:
        if rec.track_id not in mel_cache:
            mel_cache[rec.track_id] = load_track_mel(rec, mel_config, base_dir)

    seed = config.rng_seed
    init_rng = derive_rng(seed, "init")
    params = EncoderParams.init(mel_config.num_bands, config.hidden_units,
                                config.embedding_dim, init_rng)
    velocity = {k: np.zeros_like(v) for k, v in params.tensors().items()}
    losses = []
    for step in range(config.total_steps):
        step_rng = derive_rng(seed, "step", step)
        picks = step_rng.integers(0, len(tracks), size=config.batch_pairs)
        views = []
        for i, ti in enumerate(picks):
            rec = tracks[ti]
            pair = sample_pair(rec, mel_cache[rec.track_id], aug_spec,
                               derive_rng(seed, "pair", step, i))
            for vi, seg in enumerate((pair.anchor, pair.positive)):
                out = apply_chain(seg, aug_spec,
                                  rng=derive_rng(seed, "augment", step, i, vi))
                views.append(out.values)
        z, cache = encode(params, np.stack(views), return_cache=True)
        loss, dz = ntxent_loss(z, config.temperature)
        if not np.isfinite(loss):
            raise NumericalError("non-finite loss at step %d" % step)
        grads = encode_backward(params, cache, dz)
        lr = lr_at(step, config)
        for name, grad in grads.items():
            velocity[name] = config.momentum * velocity[name] - lr * grad
            getattr(params, name)[...] += velocity[name]
        losses.append(float(loss))
        if loss_hook is not None:
            loss_hook(step, float(loss))
    return params, losses


# ---------------------------------------------------------------------------
# checkpoints: EMLT tensors + JSON header

def save_checkpoint(path, params: EncoderParams, config: TrainConfig,
                    num_bands, step, extra=None):
    os.makedirs(path, exist_ok=True)
    header = {"tensors": {}, "config": config.to_dict(),
              "num_bands": num_bands, "step": step,
              "seed": config.rng_seed}
    if extra:
        header.update(extra)
    for name, tensor in params.tensors().items():
        fname = name + ".emlt"
        tensorio.write_tensor(os.path.join(path, fname), tensor)
        header["tensors"][name] = {"file": fname, "dims": list(tensor.shape)}
    with open(os.path.join(path, "header.json"), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2)


def load_checkpoint(path):
    with open(os.path.join(path, "header.json"), "r", encoding="utf-8") as fh:
        header = json.load(fh)
    tensors = {name: tensorio.read_tensor(os.path.join(path, meta["file"])).astype(float)
               for name, meta in header["tensors"].items()}
    params = EncoderParams(**tensors)
    config = TrainConfig.from_dict(header["config"])
    return params, config, header
