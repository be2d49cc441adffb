"""Experiment configuration: a versioned JSON file, validated into typed
pieces, with a canonical hash for manifests.

The hash is the SHA-256 of the fully-defaulted config rendered as canonical
JSON (sorted keys, compact separators), so field order and omitted-default
fields do not change it.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .encoders import KIND_HASH, KIND_RAW, KIND_STORE, EncoderConfig
from .errors import ConfigError
from .fed import FedConfig
from .models import KIND_LR, KIND_MLP, TrainConfig
from .serialize import FORMATS

CONFIG_VERSION = 1

_DEFAULTS = {
    "version": CONFIG_VERSION,
    "dataset": {"synthetic": {"n_rows": 600, "seed": 0}},
    "scenario": {"n_clients": 3, "overlap_fraction": 0.8},
    "alias_table": None,
    "serialization": {"format": "structured", "templates": None},
    "encoder": {
        "kind": "hash",
        "dim": 768,
        "canonicalize": True,
        "max_tokens": 128,
        "store_path": None,
        "normalize_store": False,
    },
    "model": {"kind": "mlp", "input_dim": None},
    "fed": {
        "rounds": 25,
        "participation_fraction": 1.0,
        "bytes_per_param": 4,
        "per_round_overhead_bytes": 800,
        "weighted_aggregation": False,
    },
    "train": {
        "epochs": 10,
        "batch_size": 32,
        "lr": 0.001,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "patience": 5,
        "val_fraction": 0.1,
        "lambda": 0.01,
        "dropout_p": 0.2,
    },
    "split": {"train_fraction": 0.8, "stratified": True},
    "seeds": [1, 2, 3, 4, 5],
    "master_seed": 0,
    "stress": {"overlaps": [0.8, 0.6, 0.4, 0.2], "variants": ["aligned", "raw"]},
    "output_dir": "out",
}


def _merge_defaults(raw: dict, defaults: dict, path: str = "") -> dict:
    out = {}
    for key, default in defaults.items():
        here = f"{path}.{key}" if path else key
        if key in raw:
            value = raw[key]
            if isinstance(default, dict) and isinstance(value, dict):
                out[key] = _merge_defaults(value, default, here)
            else:
                out[key] = value
        else:
            out[key] = json.loads(json.dumps(default))  # deep copy
    for key in raw:
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"{here}: unknown configuration field")
    return out


@dataclass
class ExperimentConfig:
    normalized: dict

    # ---- dataset -----------------------------------------------------------
    @property
    def dataset(self) -> dict:
        return self.normalized["dataset"]

    # ---- scenario ----------------------------------------------------------
    @property
    def n_clients(self) -> int:
        return int(self.normalized["scenario"]["n_clients"])

    @property
    def overlap_fraction(self):
        return self.normalized["scenario"].get("overlap_fraction")

    @property
    def shared_unique(self):
        sc = self.normalized["scenario"]
        if "shared" in sc:
            return int(sc["shared"]), int(sc.get("unique", 0))
        return None

    # ---- stages -------------------------------------------------------------
    @property
    def alias_table_spec(self):
        return self.normalized["alias_table"]

    @property
    def fmt(self) -> str:
        return self.normalized["serialization"]["format"]

    @property
    def templates_path(self):
        return self.normalized["serialization"]["templates"]

    def encoder_config(self, alias_table=None) -> EncoderConfig:
        e = self.normalized["encoder"]
        return EncoderConfig(
            kind=e["kind"],
            dim=int(e["dim"]),
            canonicalize=bool(e["canonicalize"]),
            alias_table=alias_table,
            store_path=e["store_path"],
            max_tokens=int(e["max_tokens"]),
            normalize_store=bool(e["normalize_store"]),
        )

    @property
    def model_kind(self) -> str:
        return self.normalized["model"]["kind"]

    def train_config(self, seed: int = 0) -> TrainConfig:
        t = self.normalized["train"]
        return TrainConfig(
            epochs=int(t["epochs"]),
            batch_size=int(t["batch_size"]),
            lr=float(t["lr"]),
            beta1=float(t["beta1"]),
            beta2=float(t["beta2"]),
            eps=float(t["eps"]),
            patience=int(t["patience"]),
            val_fraction=float(t["val_fraction"]),
            seed=seed,
            lam=float(t["lambda"]),
            dropout_p=float(t["dropout_p"]),
        )

    def fed_config(self, seed: int) -> FedConfig:
        f = self.normalized["fed"]
        return FedConfig(
            rounds=int(f["rounds"]),
            participation_fraction=float(f["participation_fraction"]),
            train_cfg=self.train_config(seed),
            seed=seed,
            bytes_per_param=int(f["bytes_per_param"]),
            per_round_overhead_bytes=int(f["per_round_overhead_bytes"]),
            weighted_aggregation=bool(f["weighted_aggregation"]),
            train_fraction=float(self.normalized["split"]["train_fraction"]),
        )

    @property
    def stratified(self) -> bool:
        return bool(self.normalized["split"]["stratified"])

    @property
    def train_fraction(self) -> float:
        return float(self.normalized["split"]["train_fraction"])

    @property
    def seeds(self) -> list[int]:
        return [int(s) for s in self.normalized["seeds"]]

    @property
    def master_seed(self) -> int:
        return int(self.normalized["master_seed"])

    @property
    def stress_overlaps(self) -> list[float]:
        return [float(o) for o in self.normalized["stress"]["overlaps"]]

    @property
    def stress_variants(self) -> list[str]:
        return [str(v) for v in self.normalized["stress"]["variants"]]

    @property
    def output_dir(self) -> str:
        return self.normalized["output_dir"]

    def config_hash(self) -> str:
        canonical = json.dumps(self.normalized, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _validate(cfg: ExperimentConfig) -> None:
    n = cfg.normalized
    if int(n["version"]) != CONFIG_VERSION:
        raise ConfigError(f"version: expected {CONFIG_VERSION}, got {n['version']}")

    ds = n["dataset"]
    has_path = "path" in ds and ds.get("path")
    has_synth = "synthetic" in ds and ds.get("synthetic") is not None
    if has_path == has_synth:
        raise ConfigError("dataset: exactly one of 'path' or 'synthetic' must be set")
    if has_path and not ds.get("label_column"):
        raise ConfigError("dataset.label_column: required with dataset.path")

    sc = n["scenario"]
    if int(sc.get("n_clients", 0)) < 1:
        raise ConfigError("scenario.n_clients: must be >= 1")
    has_overlap = sc.get("overlap_fraction") is not None
    has_shared = sc.get("shared") is not None
    if has_overlap == has_shared:
        raise ConfigError(
            "scenario: exactly one of 'overlap_fraction' or 'shared'+'unique' must be set"
        )
    if has_overlap and not (0.0 < float(sc["overlap_fraction"]) <= 1.0):
        raise ConfigError("scenario.overlap_fraction: must be in (0, 1]")

    if n["serialization"]["format"] not in FORMATS:
        raise ConfigError(
            f"serialization.format: must be one of {', '.join(FORMATS)}"
        )

    e = n["encoder"]
    if e["kind"] not in (KIND_HASH, KIND_STORE, KIND_RAW):
        raise ConfigError(f"encoder.kind: unknown kind {e['kind']!r}")
    if int(e["dim"]) <= 0:
        raise ConfigError("encoder.dim: must be positive")
    if e["kind"] == KIND_STORE and not e["store_path"]:
        raise ConfigError("encoder.store_path: required when encoder.kind is 'store'")

    m = n["model"]
    if m["kind"] not in (KIND_LR, KIND_MLP):
        raise ConfigError(f"model.kind: must be 'lr' or 'mlp', got {m['kind']!r}")
    if m["input_dim"] is not None and int(m["input_dim"]) != int(e["dim"]):
        raise ConfigError(
            f"model.input_dim: {m['input_dim']} does not match encoder.dim {e['dim']}"
        )

    f = n["fed"]
    if int(f["rounds"]) < 1:
        raise ConfigError("fed.rounds: must be >= 1")
    if not (0.0 < float(f["participation_fraction"]) <= 1.0):
        raise ConfigError("fed.participation_fraction: must be in (0, 1]")

    t = n["train"]
    if not (0.0 <= float(t["val_fraction"]) < 0.5):
        raise ConfigError("train.val_fraction: must be in [0, 0.5)")
    for key in ("batch_size", "patience"):
        if int(t[key]) < 1:
            raise ConfigError(f"train.{key}: must be >= 1")
    if int(t["epochs"]) < 0:
        raise ConfigError("train.epochs: must be >= 0")

    sp = n["split"]
    if not (0.0 < float(sp["train_fraction"]) < 1.0):
        raise ConfigError("split.train_fraction: must be in (0, 1)")

    if not n["seeds"]:
        raise ConfigError("seeds: need at least one seed")

    for o in n["stress"]["overlaps"]:
        if not (0.0 < float(o) <= 1.0):
            raise ConfigError(f"stress.overlaps: {o} outside (0, 1]")
    for v in n["stress"]["variants"]:
        if v not in ("aligned", "raw"):
            raise ConfigError(f"stress.variants: unknown variant {v!r}")


# scenario dicts may use shared/unique instead of overlap_fraction; patch the
# defaults accordingly before merging
def _scenario_defaults(raw_scenario: dict) -> dict:
    base = {"n_clients": 3}
    if "shared" in raw_scenario or "unique" in raw_scenario:
        base.update({"shared": 8, "unique": 3})
    else:
        base.update({"overlap_fraction": 0.8})
    return base


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    defaults = dict(_DEFAULTS)
    defaults["scenario"] = _scenario_defaults(raw.get("scenario", {}))
    ds = raw.get("dataset", {})
    if "path" in ds:
        defaults["dataset"] = {"path": None, "label_column": None}
    normalized = _merge_defaults(raw, defaults)
    cfg = ExperimentConfig(normalized=normalized)
    _validate(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return from_dict(raw)


def apply_overrides(cfg: ExperimentConfig, *, seed_override=None, out=None,
                    fmt=None, encoder_kind=None) -> ExperimentConfig:
    """Rebuild the config with CLI flag overrides applied."""
    raw = json.loads(json.dumps(cfg.normalized))
    if seed_override is not None:
        raw["master_seed"] = int(seed_override)
    if out is not None:
        raw["output_dir"] = out
    if fmt is not None:
        raw["serialization"]["format"] = fmt
    if encoder_kind is not None:
        raw["encoder"]["kind"] = encoder_kind
        if encoder_kind != KIND_STORE:
            raw["encoder"]["store_path"] = None
    return from_dict(raw)
