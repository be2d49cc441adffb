"""Command-line orchestration: prepare -> serialize -> embed -> train, plus
the overlap stress sweep. Stages hand off through files in the output
directory so external tools can interpose (e.g. replace the embedding store
between serialize and train).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import shutil
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, apply_overrides, load_config
from .dataset import ClientPartition, ColumnSpec, SplitSpec, split
from .encoders import (
    KIND_HASH,
    KIND_RAW,
    KIND_STORE,
    build_encoder,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionMismatch,
    FedAlignError,
    MissingEmbedding,
    MissingFile,
)
from .fed import (
    ClientData,
    client_sequences,
    comm_cost,
    raw_feature_matrix,
    record_id_for,
    round_csv,
    run_rounds,
)
from .metrics import RunSummary, stability_csv, stress_csv, stress_sweep, summary_csv
from .models import ModelShape
from .pipeline import (
    build_scenario_partitions,
    load_dataset,
    resolve_alias_table,
    resolve_templates,
    run_overlap_experiment,
)
from .serialize import read_corpus, write_corpus
from .store import EmbeddingStore, read_store, write_store

CACHE_ENV = "FEDALIGN_CACHE_DIR"

PARTITIONS_FILE = "partitions.json"
SPLITS_FILE = "splits.json"
CORPUS_FILE = "corpus.jsonl"
STORE_FILE = "embeddings.fedemb"
MANIFEST_FILE = "manifest.json"


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: str, obj) -> None:
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _update_manifest(out_dir: str, cfg: ExperimentConfig, new_artifacts: dict) -> None:
    path = os.path.join(out_dir, MANIFEST_FILE)
    manifest = {"artifacts": {}, "timestamps": {}}
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    manifest["config_hash"] = cfg.config_hash()
    manifest["tool_version"] = __version__
    now = datetime.datetime.now(datetime.timezone.utc).isoformat()
    for name, rel in new_artifacts.items():
        full = os.path.join(out_dir, rel)
        if not os.path.exists(full):
            raise FedAlignError(f"artifact {rel} missing at manifest write time")
        manifest.setdefault("artifacts", {})[name] = rel
        manifest.setdefault("timestamps", {})[name] = now
    _write_json(path, manifest)


# --------------------------------------------------------------------------
# artifact (de)serialization


def _partitions_to_json(parts) -> dict:
    return {
        "clients": [
            {
                "client_id": p.client_id,
                "row_indices": list(p.row_indices),
                "schema": [{"name": c.name, "kind": c.kind} for c in p.schema],
                "canonical_of": dict(sorted(p.canonical_of.items())),
                "shared_features": sorted(p.shared_features),
                "unique_features": sorted(p.unique_features),
            }
            for p in parts
        ]
    }


def _partitions_from_json(obj) -> list[ClientPartition]:
    parts = []
    for c in obj["clients"]:
        parts.append(
            ClientPartition(
                client_id=int(c["client_id"]),
                row_indices=tuple(int(i) for i in c["row_indices"]),
                schema=tuple(ColumnSpec(s["name"], s["kind"]) for s in c["schema"]),
                canonical_of=dict(c["canonical_of"]),
                shared_features=frozenset(c["shared_features"]),
                unique_features=frozenset(c["unique_features"]),
            )
        )
    return parts


def _load_artifact(out_dir: str, name: str):
    path = os.path.join(out_dir, name)
    if not os.path.exists(path):
        raise MissingFile(f"{name} not found in {out_dir}; run the earlier stages first")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --------------------------------------------------------------------------
# commands


def cmd_prepare(cfg: ExperimentConfig, args) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    ds = load_dataset(cfg.dataset)
    alias_table = resolve_alias_table(cfg.alias_table_spec, ds)
    parts = build_scenario_partitions(cfg, ds, alias_table, cfg.master_seed)
    labels = ds.labels()
    splits = []
    for p in parts:
        train_idx, test_idx = split(
            p,
            SplitSpec(
                train_fraction=cfg.train_fraction,
                stratified=cfg.stratified,
                seed=cfg.master_seed,
            ),
            labels,
        )
        splits.append({"client_id": p.client_id, "train": train_idx, "test": test_idx})
    _write_json(os.path.join(out, PARTITIONS_FILE), _partitions_to_json(parts))
    _write_json(os.path.join(out, SPLITS_FILE), {"clients": splits})
    _update_manifest(out, cfg, {"partitions": PARTITIONS_FILE, "splits": SPLITS_FILE})
    _say(args, f"prepared {len(parts)} client partitions in {out}")
    return 0


def cmd_serialize(cfg: ExperimentConfig, args) -> int:
    out = cfg.output_dir
    ds = load_dataset(cfg.dataset)
    parts = _partitions_from_json(_load_artifact(out, PARTITIONS_FILE))
    templates = resolve_templates(cfg.templates_path) if cfg.fmt == "natural" else None
    sequences = []
    for p in parts:
        if not p.row_indices:
            print(f"warning: client {p.client_id} has no rows", file=sys.stderr)
            continue
        sequences.extend(client_sequences(ds, p, cfg.fmt, templates))
    sequences.sort(key=lambda s: (s.client_id, s.record_id))
    n = write_corpus(os.path.join(out, CORPUS_FILE), sequences)
    _update_manifest(out, cfg, {"corpus": CORPUS_FILE})
    _say(args, f"serialized {n} records ({cfg.fmt}) to {out}/{CORPUS_FILE}")
    return 0


def _hash_store_for_corpus(cfg: ExperimentConfig, corpus, alias_table) -> EmbeddingStore:
    enc_cfg = cfg.encoder_config(alias_table)
    encoder = build_encoder(enc_cfg)
    store = EmbeddingStore(dim=enc_cfg.dim, encoder_id=encoder.encoder_id)
    for seq in corpus:
        store.add(seq.record_id, encoder.encode(seq).values.astype(np.float32))
    return store


def _raw_store(cfg: ExperimentConfig, ds, parts) -> EmbeddingStore:
    dim = cfg.encoder_config(None).dim
    store = EmbeddingStore(dim=dim, encoder_id="raw-features-v1")
    for p in parts:
        X = raw_feature_matrix(ds, p, dim)
        for i, r in enumerate(p.row_indices):
            store.add(record_id_for(p.client_id, r), X[i].astype(np.float32))
    return store


def _cache_key(cfg: ExperimentConfig, corpus_path: str) -> str:
    h = hashlib.sha256()
    h.update(
        json.dumps(cfg.normalized["encoder"], sort_keys=True).encode("utf-8")
    )
    with open(corpus_path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def cmd_embed(cfg: ExperimentConfig, args) -> int:
    out = cfg.output_dir
    corpus_path = os.path.join(out, CORPUS_FILE)
    corpus = read_corpus(corpus_path)
    store_path = os.path.join(out, STORE_FILE)
    kind = cfg.normalized["encoder"]["kind"]

    if kind == KIND_STORE:
        src = cfg.normalized["encoder"]["store_path"]
        external = read_store(src)
        if external.dim != cfg.encoder_config(None).dim:
            raise DimensionMismatch(
                f"store dim {external.dim} != configured encoder.dim "
                f"{cfg.encoder_config(None).dim}"
            )
        missing = [s.record_id for s in corpus if s.record_id not in external.vectors]
        if missing:
            raise MissingEmbedding(missing)
        shutil.copyfile(src, store_path)
        _update_manifest(out, cfg, {"store": STORE_FILE})
        _say(args, f"validated external store ({len(external)} records) -> {store_path}")
        return 0

    cache_dir = os.environ.get(CACHE_ENV)
    cache_file = None
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        cache_file = os.path.join(cache_dir, _cache_key(cfg, corpus_path) + ".fedemb")
        if os.path.exists(cache_file):
            shutil.copyfile(cache_file, store_path)
            _update_manifest(out, cfg, {"store": STORE_FILE})
            _say(args, f"embedding cache hit -> {store_path}")
            return 0

    if kind == KIND_HASH:
        ds = load_dataset(cfg.dataset)
        alias_table = resolve_alias_table(cfg.alias_table_spec, ds)
        store = _hash_store_for_corpus(cfg, corpus, alias_table)
    elif kind == KIND_RAW:
        ds = load_dataset(cfg.dataset)
        parts = _partitions_from_json(_load_artifact(out, PARTITIONS_FILE))
        store = _raw_store(cfg, ds, parts)
    else:
        raise ConfigError(f"encoder.kind: cannot embed with {kind!r}")

    write_store(store_path, store)
    if cache_file:
        shutil.copyfile(store_path, cache_file)
    _update_manifest(out, cfg, {"store": STORE_FILE})
    _say(args, f"embedded {len(store)} records at dim {store.dim} -> {store_path}")
    return 0


def _clients_from_artifacts(cfg: ExperimentConfig, out: str):
    ds = load_dataset(cfg.dataset)
    parts = _partitions_from_json(_load_artifact(out, PARTITIONS_FILE))
    split_obj = {c["client_id"]: c for c in _load_artifact(out, SPLITS_FILE)["clients"]}
    store = read_store(os.path.join(out, STORE_FILE))
    labels = ds.labels()
    clients = []
    for p in parts:
        ids = [record_id_for(p.client_id, r) for r in p.row_indices]
        missing = [rid for rid in ids if rid not in store.vectors]
        if missing:
            raise MissingEmbedding(missing)
        sp = split_obj[p.client_id]
        def matrix(rows):
            return np.stack(
                [
                    np.asarray(store.vectors[record_id_for(p.client_id, r)], dtype=np.float64)
                    for r in rows
                ]
            )
        clients.append(
            ClientData(
                client_id=p.client_id,
                X_train=matrix(sp["train"]),
                y_train=labels[sp["train"]].astype(np.float64),
                X_test=matrix(sp["test"]),
                y_test=labels[sp["test"]].astype(np.float64),
                train_indices=list(sp["train"]),
                test_indices=list(sp["test"]),
            )
        )
    return clients, store


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = cfg.output_dir
    clients, store = _clients_from_artifacts(cfg, out)
    dim = store.dim
    if dim != cfg.encoder_config(None).dim:
        raise ConfigError(
            f"encoder.dim: store has dim {dim}, config says {cfg.encoder_config(None).dim}"
        )

    f1s = []
    per_client: dict[int, list[float]] = {}
    per_seed_rounds = {}
    totals = {"bytes_up": 0, "bytes_down": 0}
    for seed in cfg.seeds:
        fed_cfg = cfg.fed_config(seed)
        result = run_rounds(clients, cfg.model_kind, dim, fed_cfg)
        f1s.append(result.final_f1)
        for cid, score in result.per_client_f1.items():
            per_client.setdefault(cid, []).append(score)
        per_seed_rounds[seed] = result
        totals["bytes_up"] += sum(l.bytes_up for l in result.round_logs)
        totals["bytes_down"] += sum(l.bytes_down for l in result.round_logs)
        _say(args, f"seed {seed}: final F1 {result.final_f1:.4f}")

    summary = RunSummary.from_scores(f1s, per_client)
    shape = ModelShape(cfg.model_kind, dim, 16 if cfg.model_kind == "mlp" else 0)
    params, payload = comm_cost(shape, cfg.fed_config(cfg.seeds[0]))

    artifacts = {}
    for seed, result in per_seed_rounds.items():
        name = f"rounds_seed{seed}.csv"
        _write_text(os.path.join(out, name), round_csv(result))
        artifacts[f"rounds_seed{seed}"] = name

    summary_obj = {
        "config_hash": cfg.config_hash(),
        "encoder_id": store.encoder_id,
        "model_kind": cfg.model_kind,
        "dim": dim,
        "params": params,
        "payload_bytes_per_client_per_round": payload,
        "rounds": cfg.normalized["fed"]["rounds"],
        "seeds": cfg.seeds,
        "f1_per_seed": [[seed, f1v] for seed, f1v in zip(cfg.seeds, f1s)],
        "mean_f1": summary.mean,
        "std_f1": summary.std,
        "min_f1": summary.min,
        "max_f1": summary.max,
        "per_client_f1": {
            str(cid): scores for cid, scores in sorted(per_client.items())
        },
        "total_bytes_up": totals["bytes_up"],
        "total_bytes_down": totals["bytes_down"],
    }
    _write_json(os.path.join(out, "summary.json"), summary_obj)
    _write_text(os.path.join(out, "summary.csv"), summary_csv({"run": summary}))
    _write_text(os.path.join(out, "stability.csv"), stability_csv(summary))
    artifacts.update(
        {"summary": "summary.json", "summary_csv": "summary.csv", "stability": "stability.csv"}
    )
    _update_manifest(out, cfg, artifacts)
    _say(args, f"mean F1 {summary.mean:.4f} +/- {summary.std:.4f} over {len(f1s)} seeds")
    return 0


def cmd_stress(cfg: ExperimentConfig, args) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    ds = load_dataset(cfg.dataset)
    alias_table = resolve_alias_table(cfg.alias_table_spec, ds)
    enc = cfg.encoder_config(None)
    templates = (
        resolve_templates(cfg.templates_path) if cfg.fmt == "natural" else None
    )

    def run_cell(overlap: float, variant: str, seed: int):
        result = run_overlap_experiment(
            ds,
            alias_table,
            overlap=overlap,
            variant=variant,
            seed=seed,
            n_clients=cfg.n_clients,
            dim=enc.dim,
            model_kind=cfg.model_kind,
            fmt=cfg.fmt,
            fed_cfg=cfg.fed_config(seed),
            templates=templates,
        )
        return result.final_f1, result.per_client_f1

    report = stress_sweep(
        run_cell,
        overlaps=cfg.stress_overlaps,
        variants=cfg.stress_variants,
        seeds=cfg.seeds,
    )
    report_cells = []
    for overlap in report.overlaps:
        for variant in report.variants:
            s = report.summary(overlap, variant)
            report_cells.append(
                {
                    "overlap": overlap,
                    "variant": variant,
                    "mean_f1": s.mean,
                    "std_f1": s.std,
                    "f1_per_seed": [[seed, v] for seed, v in zip(cfg.seeds, s.f1s)],
                }
            )
            _say(args, f"overlap {overlap} {variant}: mean F1 {s.mean:.4f}")
    _write_text(os.path.join(out, "stress.csv"), stress_csv(report))
    _write_json(
        os.path.join(out, "stress.json"),
        {"config_hash": cfg.config_hash(), "cells": report_cells},
    )
    _update_manifest(out, cfg, {"stress": "stress.csv", "stress_json": "stress.json"})
    return 0


# --------------------------------------------------------------------------
# argument parsing / dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedalign",
        description="Federated training on schema-heterogeneous tabular data "
        "via text serialization and aligned embeddings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("prepare", "partition the dataset across simulated clients"),
        ("serialize", "write the text corpus for the prepared partitions"),
        ("embed", "encode the corpus into an embedding store"),
        ("train", "run federated training from the stored embeddings"),
        ("stress", "sweep schema overlap levels and compare variants"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed-override", type=int, default=None, metavar="N")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument(
            "--format",
            default=None,
            choices=["structured", "natural", "compact"],
            help="override serialization format",
        )
        p.add_argument(
            "--encoder",
            default=None,
            choices=["hash", "store", "raw"],
            help="override encoder kind",
        )
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


_COMMANDS = {
    "prepare": cmd_prepare,
    "serialize": cmd_serialize,
    "embed": cmd_embed,
    "train": cmd_train,
    "stress": cmd_stress,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(
            cfg,
            seed_override=args.seed_override,
            out=args.out,
            fmt=args.format,
            encoder_kind=args.encoder,
        )
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FedAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
