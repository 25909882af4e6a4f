"""Command-line pipeline driver.

Subcommands: synth, extract, train, embed, sweep, neighborhood,
retrieval, probe, report. Configuration is a single JSON document;
--set a.b.c=value overrides any leaf. EMBEDLOC_SEED overrides the
global seed. Exit codes: 0 ok, 2 config error, 3 data error,
4 numerical failure.
"""

import argparse
import copy
import csv
import hashlib
import json
import os
import sys

import numpy as np

from .augment import AugmentationSpec
from .corpus import (extract_features, generate_synthetic_corpus,
                     load_track_mel, read_manifest)
from .embedspace import EmbeddingSet, build_embedding_set
from .encoder import TrainConfig, load_checkpoint, save_checkpoint, train
from .errors import ConfigError, DataError, EmbedlocError, NumericalError
from .locality import (DEFAULT_PITCH_GRID, DEFAULT_STRETCH_GRID,
                       compute_neighborhood_report, manipulation_sweep,
                       tag_precision, tag_retrieval)
from .melfront import MelConfig, build_filterbank
from .probe import ProbeConfig, acc1, acc2, estimate_tempo, save_probe, train_probe

DEFAULT_CONFIG = {
    "seed": 0,
    "paths": {"corpus_dir": "corpus", "output_dir": "out"},
    "corpus": {"num_tracks": 48, "duration_s": 16.0, "test_fraction": 0.25},
    "mel": MelConfig().to_dict(),
    "augmentation": AugmentationSpec().to_dict(),
    "train": TrainConfig().to_dict(),
    "probe": ProbeConfig().to_dict(),
    "metrics": {
        "k_grid": [1, 2, 4, 8],
        "rmms_direction": "seed_octaves",
        "tag_precision_variant": "multiset",
        "stretch_grid": list(DEFAULT_STRETCH_GRID),
        "pitch_grid": list(DEFAULT_PITCH_GRID),
        "sweep_kind": "time_stretch",
    },
}


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(config, dotted, raw_value):
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    node = config
    parts = dotted.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError("unknown config path %r" % dotted)
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError("unknown config field %r" % dotted)
    node[parts[-1]] = value


def load_config(path=None, overrides=()):
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                config = _deep_merge(config, json.load(fh))
        except FileNotFoundError:
            raise ConfigError("config file not found: %s" % path)
        except json.JSONDecodeError as exc:
            raise ConfigError("config file %s is not valid JSON: %s" % (path, exc))
    for item in overrides:
        if "=" not in item:
            raise ConfigError("override %r is not of the form path=value" % item)
        dotted, raw = item.split("=", 1)
        _apply_override(config, dotted, raw)
    env_seed = os.environ.get("EMBEDLOC_SEED")
    if env_seed is not None:
        try:
            config["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError("EMBEDLOC_SEED must be an integer, got %r" % env_seed)
    return config


def config_hash(config):
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _provenance(config, **extra):
    prov = {"config_hash": config_hash(config), "seed": config["seed"],
            "aug_chain": config["augmentation"]["chain"],
            "rmms_direction": config["metrics"]["rmms_direction"],
            "tag_precision_variant": config["metrics"]["tag_precision_variant"]}
    prov.update(extra)
    return prov


def _mel_config(config):
    return MelConfig.from_dict(config["mel"])


def _aug_spec(config):
    spec = dict(config["augmentation"])
    spec["rng_seed"] = config["seed"]
    return AugmentationSpec.from_dict(spec)


def _artifact_id(config):
    return "%s-s%d" % (_aug_spec(config).chain_id, config["seed"])


def _features_dir(config):
    return os.path.join(config["paths"]["output_dir"], "features")


def _feature_manifest(config):
    path = os.path.join(_features_dir(config), "manifest.jsonl")
    if not os.path.exists(path):
        raise DataError("feature manifest missing; run `extract` first (%s)" % path)
    return read_manifest(path), _features_dir(config)


def _load_mels(records, config):
    mel_cfg = _mel_config(config)
    base = _features_dir(config)
    return [load_track_mel(rec, mel_cfg, base_dir=base) for rec in records]


def _checkpoint_dir(config):
    return os.path.join(config["paths"]["output_dir"], "checkpoints",
                        _artifact_id(config))


def _embedding_prefix(config):
    d = os.path.join(config["paths"]["output_dir"], "embeddings")
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, _artifact_id(config))


def _window_frames(config):
    return _aug_spec(config).output_frames(_mel_config(config))


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(config):
    corpus_dir = config["paths"]["corpus_dir"]
    records = generate_synthetic_corpus(
        corpus_dir, num_tracks=int(config["corpus"]["num_tracks"]),
        seed=config["seed"], duration_s=float(config["corpus"]["duration_s"]),
        sample_rate_hz=int(config["mel"]["sample_rate_hz"]),
        test_fraction=float(config["corpus"]["test_fraction"]))
    print("synth: wrote %d tracks to %s" % (len(records), corpus_dir))


def cmd_extract(config):
    corpus_dir = config["paths"]["corpus_dir"]
    manifest = os.path.join(corpus_dir, "manifest.jsonl")
    if not os.path.exists(manifest):
        raise DataError("corpus manifest missing: %s" % manifest)
    records = read_manifest(manifest)
    out = extract_features(records, _mel_config(config), corpus_dir,
                           _features_dir(config))
    print("extract: wrote %d feature files to %s" % (len(out), _features_dir(config)))


def cmd_train(config):
    records, base = _feature_manifest(config)
    train_cfg = TrainConfig.from_dict(dict(config["train"], rng_seed=config["seed"]))
    params, losses = train(records, _aug_spec(config), train_cfg,
                           _mel_config(config), base_dir=base)
    ckpt = _checkpoint_dir(config)
    save_checkpoint(ckpt, params, train_cfg, config["mel"]["num_bands"],
                    step=train_cfg.total_steps,
                    extra={"provenance": _provenance(config)})
    with open(os.path.join(ckpt, "loss.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        writer.writerows(enumerate(losses))
    print("train: %d steps, final loss %.4f, checkpoint %s"
          % (len(losses), losses[-1], ckpt))


def cmd_embed(config):
    records, _ = _feature_manifest(config)
    params, _, header = load_checkpoint(_checkpoint_dir(config))
    mels = _load_mels(records, config)
    emb = build_embedding_set(
        mels, params, _window_frames(config),
        provenance=_provenance(config, checkpoint=_checkpoint_dir(config)))
    prefix = _embedding_prefix(config)
    emb.save(prefix)
    print("embed: %d tracks -> %s.{json,emlt}" % (len(emb), prefix))


def cmd_sweep(config):
    records, _ = _feature_manifest(config)
    params, _, _ = load_checkpoint(_checkpoint_dir(config))
    kind = config["metrics"]["sweep_kind"]
    grid = (config["metrics"]["stretch_grid"] if kind == "time_stretch"
            else config["metrics"]["pitch_grid"])
    test = [r for r in records if r.split == "test"] or records
    result = manipulation_sweep(_load_mels(test, config), params, kind, grid,
                                _window_frames(config),
                                provenance=_provenance(config, sweep_kind=kind))
    out = config["paths"]["output_dir"]
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, "sweep-%s-%s" % (kind, _artifact_id(config)))
    result.to_json(stem + ".json")
    result.to_csv(stem + ".csv")
    print("sweep: %s over %d factors -> %s.{json,csv}" % (kind, len(grid), stem))


def _load_embeddings(config):
    prefix = _embedding_prefix(config)
    if not os.path.exists(prefix + ".json"):
        raise DataError("embedding set missing; run `embed` first (%s)" % prefix)
    return EmbeddingSet.load(prefix)


def cmd_neighborhood(config):
    records, _ = _feature_manifest(config)
    emb = _load_embeddings(config)
    k_grid = [int(k) for k in config["metrics"]["k_grid"]]
    report = compute_neighborhood_report(emb, records, k_grid,
                                         provenance=_provenance(config))
    stem = os.path.join(config["paths"]["output_dir"],
                        "neighborhood-%s" % _artifact_id(config))
    report.to_json(stem + ".json")
    report.to_csv(stem + ".csv")
    print("neighborhood: k grid %s -> %s.{json,csv}" % (k_grid, stem))


def cmd_retrieval(config):
    records, _ = _feature_manifest(config)
    emb = _load_embeddings(config)
    k_grid = [int(k) for k in config["metrics"]["k_grid"]]
    rows = [{"k": k, "tag_precision": tag_precision(emb, records, k),
             "tag_retrieval": tag_retrieval(emb, records, k)} for k in k_grid]
    stem = os.path.join(config["paths"]["output_dir"],
                        "retrieval-%s" % _artifact_id(config))
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        json.dump({"provenance": _provenance(config), "rows": rows}, fh, indent=2)
    with open(stem + ".csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["k", "tag_precision", "tag_retrieval"])
        writer.writeheader()
        writer.writerows(rows)
    print("retrieval: k grid %s -> %s.{json,csv}" % (k_grid, stem))


def cmd_probe(config):
    records, _ = _feature_manifest(config)
    emb = _load_embeddings(config)
    probe_cfg = ProbeConfig.from_dict(dict(config["probe"], rng_seed=config["seed"]))
    model, losses = train_probe(emb, records, probe_cfg)
    out = config["paths"]["output_dir"]
    probe_dir = os.path.join(out, "probe-%s" % _artifact_id(config))
    save_probe(probe_dir, model, probe_cfg,
               extra={"provenance": _provenance(config)})
    test = [r for r in records if r.split == "test" and r.bpm is not None]
    rows = []
    for rec in test:
        est = estimate_tempo(model, emb.vector(rec.track_id))
        rows.append({"track_id": rec.track_id, "truth": rec.bpm, "estimate": est})
    if rows:
        ests = [r["estimate"] for r in rows]
        tru = [r["truth"] for r in rows]
        a1, a2 = acc1(ests, tru), acc2(ests, tru)
        for r in rows:
            r["acc1_hit"] = int(abs(r["estimate"] - r["truth"]) / r["truth"] <= 0.04)
            r["acc2_hit"] = int(any(
                abs(r["estimate"] - o * r["truth"]) / (o * r["truth"]) <= 0.04
                for o in (1 / 3, 0.5, 1.0, 2.0, 3.0)))
        with open(os.path.join(probe_dir, "eval.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "track_id", "truth", "estimate", "acc1_hit", "acc2_hit"])
            writer.writeheader()
            writer.writerows(rows)
        with open(os.path.join(probe_dir, "summary.json"), "w") as fh:
            json.dump({"provenance": _provenance(config), "acc1": a1, "acc2": a2,
                       "num_test_tracks": len(rows)}, fh, indent=2)
        print("probe: acc1=%.3f acc2=%.3f over %d test tracks -> %s"
              % (a1, a2, len(rows), probe_dir))
    else:
        print("probe: trained (no labeled test tracks to evaluate) -> %s" % probe_dir)


def cmd_report(config):
    out = config["paths"]["output_dir"]
    merged = {"config_hash": config_hash(config), "seed": config["seed"],
              "artifacts": {}}
    for name in sorted(os.listdir(out)) if os.path.isdir(out) else []:
        if name.endswith(".json"):
            with open(os.path.join(out, name), "r", encoding="utf-8") as fh:
                merged["artifacts"][name] = json.load(fh)
    path = os.path.join(out, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(merged, fh, indent=2)
    print("report: merged %d artifacts -> %s" % (len(merged["artifacts"]), path))


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "embed": cmd_embed,
    "sweep": cmd_sweep,
    "neighborhood": cmd_neighborhood,
    "retrieval": cmd_retrieval,
    "probe": cmd_probe,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="embedloc",
        description="Mel augmentation, contrastive training, and "
                    "embedding-space locality metrics.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="path to a JSON run config")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="PATH=VALUE", help="override a config leaf")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker count (execution is always deterministic)")
    parser.add_argument("--deterministic", action="store_true",
                        help="force single-threaded execution")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        config = load_config(args.config, args.overrides)
        COMMANDS[args.command](config)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except NumericalError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 4
    except (DataError, EmbedlocError, OSError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
