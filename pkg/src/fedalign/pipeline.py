"""End-to-end experiment assembly shared by the CLI and the test suite.

`run_overlap_experiment` is the one-call path: generate/ingest data,
partition at a given schema overlap, encode with either the canonicalizing
hash encoder ("aligned") or the positional raw-feature baseline ("raw"),
and run federated training.
"""

from __future__ import annotations

from .dataset import (
    AliasTable,
    TabularDataset,
    default_alias_table,
    impute,
    load_csv,
    overlap_partition,
    partition,
)
from .encoders import KIND_HASH, KIND_RAW, EncoderConfig
from .errors import ConfigError
from .fed import FedConfig, FedRun, run
from .models import TrainConfig
from .serialize import STRUCTURED, default_templates, load_templates
from .synth import synth_dataset

VARIANT_ALIGNED = "aligned"
VARIANT_RAW = "raw"


def load_dataset(cfg_dataset: dict) -> TabularDataset:
    """Materialize the dataset a config describes (file or synthetic)."""
    if cfg_dataset.get("path"):
        ds = load_csv(cfg_dataset["path"], cfg_dataset["label_column"])
        return impute(ds)
    synth = cfg_dataset.get("synthetic") or {}
    return synth_dataset(
        n_rows=int(synth.get("n_rows", 600)), seed=int(synth.get("seed", 0))
    )


def resolve_alias_table(spec, ds: TabularDataset) -> AliasTable:
    """None -> packaged default table; "identity" -> canonical names only;
    anything else -> a JSON file path."""
    if spec is None:
        return default_alias_table()
    if spec == "identity":
        return AliasTable.identity([c.name for c in ds.feature_columns])
    return AliasTable.load(spec)


def resolve_templates(path):
    return default_templates() if path is None else load_templates(path)


def variant_encoder_config(
    variant: str, dim: int, alias_table: AliasTable, max_tokens: int = 128
) -> EncoderConfig:
    if variant == VARIANT_ALIGNED:
        return EncoderConfig(
            kind=KIND_HASH,
            dim=dim,
            canonicalize=True,
            alias_table=alias_table,
            max_tokens=max_tokens,
        )
    if variant == VARIANT_RAW:
        return EncoderConfig(kind=KIND_RAW, dim=dim)
    raise ConfigError(f"unknown pipeline variant {variant!r}")


def run_overlap_experiment(
    ds: TabularDataset,
    alias_table: AliasTable,
    *,
    overlap: float,
    variant: str,
    seed: int,
    n_clients: int = 3,
    dim: int = 768,
    model_kind: str = "mlp",
    fmt: str = STRUCTURED,
    rounds: int = 25,
    train_cfg: TrainConfig | None = None,
    fed_cfg: FedConfig | None = None,
    templates=None,
) -> FedRun:
    """Partition at `overlap`, encode per `variant`, train federated.

    Everything (partitions, splits, initialization, shuffling) is keyed off
    `seed`, so one seed = one complete repeat of the experiment.
    """
    parts = overlap_partition(ds, n_clients, overlap, alias_table, seed=seed)
    encoder_cfg = variant_encoder_config(variant, dim, alias_table)
    if fed_cfg is None:
        tc = train_cfg or TrainConfig()
        fed_cfg = FedConfig(rounds=rounds, train_cfg=tc, seed=seed)
    else:
        fed_cfg = FedConfig(
            rounds=fed_cfg.rounds,
            participation_fraction=fed_cfg.participation_fraction,
            train_cfg=fed_cfg.train_cfg,
            seed=seed,
            bytes_per_param=fed_cfg.bytes_per_param,
            per_round_overhead_bytes=fed_cfg.per_round_overhead_bytes,
            weighted_aggregation=fed_cfg.weighted_aggregation,
            train_fraction=fed_cfg.train_fraction,
        )
    return run(ds, parts, encoder_cfg, model_kind, fmt, fed_cfg, templates=templates)


def build_scenario_partitions(cfg, ds: TabularDataset, alias_table: AliasTable, seed: int):
    """Partitions for a config's scenario block (overlap or shared/unique)."""
    su = cfg.shared_unique
    if su is not None:
        shared, unique = su
        return partition(ds, cfg.n_clients, shared, unique, alias_table, seed)
    return overlap_partition(ds, cfg.n_clients, cfg.overlap_fraction, alias_table, seed)
