"""Federated training loop: broadcast, local training, delta aggregation,
and per-round communication metering, over an in-process transport.

The aggregation rule is the unweighted delta mean

    W_{t+1} = W_t + (1/|S_t|) * sum_i DeltaW_i

(a config flag switches to classical sample-count weighting). Deltas are
summed per coordinate in ascending value order, which makes the aggregate
bitwise independent of client ordering.

Serialization and encoding run once up front and are cached for all rounds;
encoders are frozen, so round 1 and round T see identical embeddings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import ClientPartition, SplitSpec, TabularDataset, split
from .encoders import (
    KIND_RAW,
    EncoderConfig,
    build_encoder,
)
from .errors import ConfigMismatch, EmptyDeltaSet, ShapeMismatch
from .hashing import derive_seed
from .metrics import confusion, f1
from .models import (
    ModelShape,
    TrainConfig,
    WeightVector,
    flatten,
    inference_loss,
    init_model,
    predict_batch,
    train_local,
    unflatten,
)
from .serialize import serialize_record
from .util import round_half_up


@dataclass(frozen=True)
class FedConfig:
    rounds: int = 25
    participation_fraction: float = 1.0
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    bytes_per_param: int = 4
    per_round_overhead_bytes: int = 800
    weighted_aggregation: bool = False
    train_fraction: float = 0.8


@dataclass
class RoundLog:
    round: int
    participant_ids: list[int]
    global_train_loss_mean: float
    global_f1: float
    bytes_up: int
    bytes_down: int
    wall_time: float  # seconds; excluded from exported reports


@dataclass
class FedRun:
    config: dict
    final_weights: WeightVector
    round_logs: list[RoundLog]
    per_client_f1: dict[int, float]

    @property
    def final_f1(self) -> float:
        return self.round_logs[-1].global_f1 if self.round_logs else 0.0

    def f1_at_round(self, r: int) -> float:
        for log in self.round_logs:
            if log.round == r:
                return log.global_f1
        raise KeyError(f"no round {r} in run")


def record_id_for(client_id: int, row_index: int) -> str:
    return f"c{client_id}-r{row_index:06d}"


# --------------------------------------------------------------------------
# protocol primitives


def sample_clients(n_clients: int, fraction: float, round_idx: int, seed: int) -> list[int]:
    """|S_t| = max(1, round(fraction*n)) client ids (1-based), uniform without
    replacement, deterministic per (seed, round)."""
    if not (0.0 < fraction <= 1.0):
        raise ConfigMismatch(f"participation fraction must be in (0,1], got {fraction}")
    k = max(1, round_half_up(fraction * n_clients))
    k = min(k, n_clients)
    if k == n_clients:
        return list(range(1, n_clients + 1))
    rng = np.random.default_rng(derive_seed(seed, f"sample-round{round_idx}"))
    picks = rng.choice(n_clients, size=k, replace=False)
    return sorted(int(i) + 1 for i in picks)


def _sorted_mean(deltas: list[np.ndarray]) -> np.ndarray:
    """Mean of delta vectors, summed per coordinate in sorted order so the
    result is bitwise independent of input ordering."""
    stacked = np.stack(deltas, axis=0)
    stacked = np.sort(stacked, axis=0)
    total = np.zeros(stacked.shape[1])
    for row in stacked:
        total += row
    return total / len(deltas)


def aggregate(w_global: WeightVector, deltas: list[WeightVector]) -> WeightVector:
    """W + mean(deltas), the unweighted rule."""
    if not deltas:
        raise EmptyDeltaSet("no client deltas to aggregate")
    for d in deltas:
        if d.shape != w_global.shape:
            raise ShapeMismatch(
                f"delta shape {d.shape} does not match global {w_global.shape}"
            )
    mean = _sorted_mean([d.values for d in deltas])
    return WeightVector(w_global.values + mean, w_global.shape)


def aggregate_weighted(
    w_global: WeightVector, deltas: list[WeightVector], counts: list[int]
) -> WeightVector:
    """Classical sample-count-weighted averaging of deltas."""
    if not deltas:
        raise EmptyDeltaSet("no client deltas to aggregate")
    if len(counts) != len(deltas):
        raise ShapeMismatch("one sample count per delta required")
    total = float(sum(counts))
    scaled = [d.values * (c / total) for d, c in zip(deltas, counts)]
    stacked = np.sort(np.stack(scaled, axis=0), axis=0)
    out = np.zeros(stacked.shape[1])
    for row in stacked:
        out += row
    return WeightVector(w_global.values + out, w_global.shape)


def comm_cost(shape: ModelShape, fed_cfg: FedConfig) -> tuple[int, int]:
    """(parameter count, bytes per client per round in one direction)."""
    params = shape.n_params
    return params, params * fed_cfg.bytes_per_param + fed_cfg.per_round_overhead_bytes


# --------------------------------------------------------------------------
# client data assembly (serialize + encode once, then reuse every round)


@dataclass
class ClientData:
    client_id: int
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    train_indices: list[int]
    test_indices: list[int]


def client_sequences(ds: TabularDataset, part: ClientPartition, fmt: str, templates=None):
    """Serialized TextSequence per partition row, in row-index order."""
    label_idx = ds.column_index(ds.label_column)
    col_idx = {c.name: ds.column_index(part.canonical_of[c.name]) for c in part.schema}
    out = []
    for r in part.row_indices:
        row = ds.rows[r]
        record = {name: row[j] for name, j in col_idx.items()}
        out.append(
            serialize_record(
                record,
                part.schema,
                fmt,
                templates=templates,
                canonical_of=part.canonical_of,
                record_id=record_id_for(part.client_id, r),
                client_id=part.client_id,
                label=int(row[label_idx]),
            )
        )
    return out


def raw_feature_matrix(ds: TabularDataset, part: ClientPartition, dim: int) -> np.ndarray:
    """Baseline passthrough encoding: the client's feature values in sorted
    renamed-label order, standardized per column over the client's rows,
    zero-padded to `dim` columns.

    Categorical values become per-client integer codes (sorted unique order)
    before standardization. No cross-client name alignment happens here;
    that is the point of the baseline.
    """
    names = sorted(c.name for c in part.schema)
    if len(names) > dim:
        raise ConfigMismatch(
            f"raw encoder needs dim >= feature count ({len(names)}), got {dim}"
        )
    rows = list(part.row_indices)
    X = np.zeros((len(rows), dim))
    for j, name in enumerate(names):
        src = ds.column_index(part.canonical_of[name])
        col = [ds.rows[r][src] for r in rows]
        if all(isinstance(v, float) for v in col):
            vals = np.asarray(col, dtype=np.float64)
        else:
            codes = {v: i for i, v in enumerate(sorted(set(map(str, col))))}
            vals = np.asarray([codes[str(v)] for v in col], dtype=np.float64)
        mean = vals.mean()
        sd = vals.std()
        X[:, j] = (vals - mean) / sd if sd > 0 else 0.0
    return X


def build_client_data(
    ds: TabularDataset,
    partitions: list[ClientPartition],
    encoder_cfg: EncoderConfig,
    fmt: str,
    seed: int,
    train_fraction: float = 0.8,
    templates=None,
    embeddings: dict[str, np.ndarray] | None = None,
) -> list[ClientData]:
    """Serialize, encode, and split every client's rows.

    embeddings: optional precomputed {record_id: vector} map (e.g. loaded
    from a store file) that bypasses the encoder entirely.
    """
    labels = ds.labels()
    encoder = None
    if embeddings is None and encoder_cfg.kind != KIND_RAW:
        encoder = build_encoder(encoder_cfg)
    out = []
    for part in partitions:
        rows = list(part.row_indices)
        if embeddings is not None:
            X = np.stack(
                [
                    np.asarray(embeddings[record_id_for(part.client_id, r)], dtype=np.float64)
                    for r in rows
                ]
            )
        elif encoder_cfg.kind == KIND_RAW:
            X = raw_feature_matrix(ds, part, encoder_cfg.dim)
        else:
            seqs = client_sequences(ds, part, fmt, templates)
            X = np.stack([encoder.encode(s).values for s in seqs])
        y = labels[rows].astype(np.float64)
        pos_of = {r: i for i, r in enumerate(rows)}
        train_idx, test_idx = split(
            part,
            SplitSpec(train_fraction=train_fraction, stratified=True, seed=seed),
            labels,
        )
        tr = [pos_of[r] for r in train_idx]
        te = [pos_of[r] for r in test_idx]
        out.append(
            ClientData(
                client_id=part.client_id,
                X_train=X[tr],
                y_train=y[tr],
                X_test=X[te],
                y_test=y[te],
                train_indices=train_idx,
                test_indices=test_idx,
            )
        )
    return out


# --------------------------------------------------------------------------
# the full loop


def _global_f1(shape, weights, clients, lam, dropout_p) -> float:
    model = unflatten(shape, weights, lam=lam, dropout_p=dropout_p)
    y_true = np.concatenate([c.y_test for c in clients])
    y_pred = np.concatenate(
        [(predict_batch(model, c.X_test) >= 0.5).astype(int) for c in clients]
    )
    return f1(confusion(y_true, y_pred))


def run_rounds(
    clients: list[ClientData],
    model_kind: str,
    dim: int,
    fed_cfg: FedConfig,
    config_snapshot: dict | None = None,
) -> FedRun:
    """Execute Algorithm-style rounds over prebuilt client matrices."""
    if not clients:
        raise ConfigMismatch("need at least one client")
    tc = fed_cfg.train_cfg
    model0 = init_model(model_kind, dim, derive_seed(fed_cfg.seed, "model-init"), tc)
    shape = model0.shape
    weights = flatten(model0)
    by_id = {c.client_id: c for c in clients}
    params, payload = comm_cost(shape, fed_cfg)

    logs = []
    for t in range(1, fed_cfg.rounds + 1):
        started = time.perf_counter()
        participants = sample_clients(
            len(clients), fed_cfg.participation_fraction, t, fed_cfg.seed
        )
        deltas, counts, losses = [], [], []
        for cid in participants:
            c = by_id[cid]
            local_cfg = replace(tc, seed=derive_seed(fed_cfg.seed, f"round{t}-client{cid}"))
            broadcast = unflatten(shape, weights, lam=tc.lam, dropout_p=tc.dropout_p)
            trained, _, _ = train_local(broadcast, (c.X_train, c.y_train), local_cfg)
            deltas.append(
                WeightVector(flatten(trained).values - weights.values, shape)
            )
            counts.append(c.X_train.shape[0])
            losses.append(inference_loss(trained, c.X_train, c.y_train))
        if fed_cfg.weighted_aggregation:
            weights = aggregate_weighted(weights, deltas, counts)
        else:
            weights = aggregate(weights, deltas)
        logs.append(
            RoundLog(
                round=t,
                participant_ids=participants,
                global_train_loss_mean=float(np.mean(losses)),
                global_f1=_global_f1(shape, weights, clients, tc.lam, tc.dropout_p),
                bytes_up=len(participants) * payload,
                bytes_down=len(participants) * payload,
                wall_time=time.perf_counter() - started,
            )
        )

    final_model = unflatten(shape, weights, lam=tc.lam, dropout_p=tc.dropout_p)
    per_client = {}
    for c in clients:
        y_pred = (predict_batch(final_model, c.X_test) >= 0.5).astype(int)
        per_client[c.client_id] = f1(confusion(c.y_test, y_pred))

    snapshot = dict(config_snapshot or {})
    snapshot.setdefault("model_kind", model_kind)
    snapshot.setdefault("dim", dim)
    snapshot.setdefault("rounds", fed_cfg.rounds)
    snapshot.setdefault("seed", fed_cfg.seed)
    snapshot.setdefault("params", params)
    return FedRun(
        config=snapshot,
        final_weights=weights,
        round_logs=logs,
        per_client_f1=per_client,
    )


def run(
    ds: TabularDataset,
    partitions: list[ClientPartition],
    encoder_cfg: EncoderConfig,
    model_kind: str,
    serialization_format: str,
    fed_cfg: FedConfig,
    templates=None,
    embeddings: dict[str, np.ndarray] | None = None,
) -> FedRun:
    """Full pipeline for prebuilt partitions: serialize -> encode -> split ->
    T federated rounds. Deterministic under fed_cfg.seed."""
    encoder_cfg.validate()
    clients = build_client_data(
        ds,
        partitions,
        encoder_cfg,
        serialization_format,
        fed_cfg.seed,
        fed_cfg.train_fraction,
        templates,
        embeddings,
    )
    return run_rounds(clients, model_kind, encoder_cfg.dim, fed_cfg)


# --------------------------------------------------------------------------
# exports


def round_csv(run_result: FedRun) -> str:
    """CSV of per-round telemetry (wall time deliberately omitted so reruns
    of the same config are byte-identical)."""
    lines = ["round,f1,loss,bytes_up,bytes_down"]
    for log in run_result.round_logs:
        lines.append(
            f"{log.round},{log.global_f1!r},{log.global_train_loss_mean!r},"
            f"{log.bytes_up},{log.bytes_down}"
        )
    return "\n".join(lines) + "\n"
