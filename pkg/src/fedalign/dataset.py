"""Tabular ingestion, imputation, client partitioning, and schema renaming.

A dataset is immutable once loaded; every operation here is a pure function
of its inputs and an explicit seed. Missing values are represented as None
until impute() removes them.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    AllMissingColumn,
    DataError,
    InsufficientFeatures,
    InsufficientRows,
    MalformedRow,
    MissingFile,
    NonBinaryLabel,
    TooFewRows,
)
from .hashing import derive_seed
from .util import round_half_up

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"

# Separators used by the text serializers; categorical values containing any
# of these are rejected at ingestion so serialized records stay parseable.
_FORBIDDEN_IN_VALUES = (",", ";", ":")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # numeric | categorical | binary
    description: str = ""


@dataclass(frozen=True)
class TabularDataset:
    columns: tuple[ColumnSpec, ...]
    rows: tuple[tuple, ...]
    label_column: str

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def feature_columns(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.name != self.label_column)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def labels(self) -> np.ndarray:
        j = self.column_index(self.label_column)
        return np.array([int(r[j]) for r in self.rows], dtype=np.int64)


class AliasTable:
    """Canonical feature name -> list of alias spellings.

    The canonical name always counts as an alias of itself; no alias may
    belong to two canonical names.
    """

    def __init__(self, mapping: dict[str, list[str]]):
        self._mapping: dict[str, list[str]] = {}
        owner: dict[str, str] = {}
        for canonical, aliases in mapping.items():
            pool = list(dict.fromkeys([canonical, *aliases]))  # dedupe, keep order
            for alias in pool:
                if alias in owner and owner[alias] != canonical:
                    raise ValueError(
                        f"alias {alias!r} maps to both {owner[alias]!r} and {canonical!r}"
                    )
                owner[alias] = canonical
            self._mapping[canonical] = pool
        self._alias_to_canonical = dict(owner)

    def aliases_of(self, canonical: str) -> list[str]:
        return list(self._mapping.get(canonical, [canonical]))

    @property
    def canonical_names(self) -> list[str]:
        return list(self._mapping)

    @property
    def alias_to_canonical(self) -> dict[str, str]:
        return dict(self._alias_to_canonical)

    def to_dict(self) -> dict[str, list[str]]:
        return {k: list(v) for k, v in self._mapping.items()}

    @classmethod
    def identity(cls, names) -> "AliasTable":
        return cls({n: [n] for n in names})

    @classmethod
    def load(cls, path: str) -> "AliasTable":
        if not os.path.exists(path):
            raise MissingFile(f"alias table not found: {path}")
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise DataError("alias table must be an object of canonical -> alias list")
        return cls({str(k): [str(a) for a in v] for k, v in raw.items()})


def default_alias_table() -> AliasTable:
    """The alias table shipped with the package (data/aliases.json)."""
    from importlib.resources import files

    text = files("fedalign.data").joinpath("aliases.json").read_text(encoding="utf-8")
    return AliasTable({str(k): [str(a) for a in v] for k, v in json.loads(text).items()})


@dataclass(frozen=True)
class ClientPartition:
    client_id: int
    row_indices: tuple[int, ...]
    schema: tuple[ColumnSpec, ...]  # feature columns under renamed labels
    canonical_of: dict[str, str]  # renamed name -> canonical name
    shared_features: frozenset[str]  # canonical names
    unique_features: frozenset[str]  # canonical names


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    stratified: bool = True
    seed: int = 0


# --------------------------------------------------------------------------
# ingestion


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def load_csv(path: str, label_column: str) -> TabularDataset:
    """Read a comma-delimited UTF-8 file with a header row.

    Columns whose observed values all parse as reals become numeric; any
    other column is categorical. Empty cells become missing values. The
    label column must be binary {0,1} with no missing entries.
    """
    if not os.path.exists(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file, header row required") from None
        if label_column not in header:
            raise NonBinaryLabel(f"label column {label_column!r} not in header {header}")
        rows = []
        for line_no, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise MalformedRow(
                    line_no, f"expected {len(header)} cells, found {len(raw)}"
                )
            rows.append([_parse_cell(c) for c in raw])

    label_idx = header.index(label_column)
    columns = []
    for j, name in enumerate(header):
        observed = [r[j] for r in rows if r[j] is not None]
        numeric = bool(observed) and all(isinstance(v, float) for v in observed)
        columns.append(ColumnSpec(name=name, kind=NUMERIC if numeric else CATEGORICAL))

    out_rows = []
    for i, row in enumerate(rows):
        line_no = i + 2
        label = row[label_idx]
        if label is None or not isinstance(label, float) or label not in (0.0, 1.0):
            raise NonBinaryLabel(
                f"line {line_no}: label {row[label_idx]!r} is not 0 or 1"
            )
        cells = []
        for j, v in enumerate(row):
            if j == label_idx:
                cells.append(float(label))
                continue
            if columns[j].kind == NUMERIC and v is not None:
                cells.append(float(v))
            elif v is not None:
                v = str(v)
                if any(s in v for s in _FORBIDDEN_IN_VALUES):
                    raise MalformedRow(
                        line_no,
                        f"value {v!r} in column {columns[j].name!r} contains a "
                        "reserved separator character",
                    )
                cells.append(v)
            else:
                cells.append(None)
        out_rows.append(tuple(cells))

    return TabularDataset(
        columns=tuple(columns), rows=tuple(out_rows), label_column=label_column
    )


# --------------------------------------------------------------------------
# imputation


def impute(ds: TabularDataset) -> TabularDataset:
    """Fill missing feature values: numeric -> median, categorical -> mode.

    Even-count median is the mean of the two middle values. Mode ties break
    toward the smallest value so the result is deterministic. Idempotent.
    """
    fills = {}
    for j, col in enumerate(ds.columns):
        if col.name == ds.label_column:
            continue
        observed = [r[j] for r in ds.rows if r[j] is not None]
        if len(observed) < len(ds.rows):
            if not observed:
                raise AllMissingColumn(f"column {col.name!r} has no observed values")
            if col.kind == NUMERIC:
                fills[j] = float(statistics.median(observed))
            else:
                counts = Counter(observed)
                top = max(counts.values())
                fills[j] = min(v for v, c in counts.items() if c == top)
    if not fills:
        return ds
    rows = tuple(
        tuple(fills[j] if v is None and j in fills else v for j, v in enumerate(row))
        for row in ds.rows
    )
    return replace(ds, rows=rows)


# --------------------------------------------------------------------------
# partitioning


def _stratified_chunks(labels: np.ndarray, n_clients: int, rng) -> list[list[int]]:
    """Split row indices into n near-equal chunks, stratified by label."""
    buckets: list[list[int]] = [[] for _ in range(n_clients)]
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        base, extra = divmod(len(idx), n_clients)
        start = 0
        for c in range(n_clients):
            take = base + (1 if c < extra else 0)
            buckets[c].extend(int(i) for i in idx[start : start + take])
            start += take
    return [sorted(b) for b in buckets]


def _assign_aliases(
    canonicals_per_client: list[list[str]],
    alias_table: AliasTable,
    seed: int,
) -> list[dict[str, str]]:
    """Pick one alias per (client, canonical feature), deterministically.

    For each canonical feature the alias pool is shuffled once; client i
    takes the i-th pool entry (mod pool size), so no two clients share an
    alias for the same feature whenever the pool is large enough.
    """
    all_canonicals = sorted({c for lst in canonicals_per_client for c in lst})
    assignment_order: dict[str, list[str]] = {}
    for canonical in all_canonicals:
        pool = alias_table.aliases_of(canonical)
        rng = np.random.default_rng(derive_seed(seed, f"alias-{canonical}"))
        order = [pool[int(i)] for i in rng.permutation(len(pool))]
        assignment_order[canonical] = order
    out = []
    for client_pos, canonicals in enumerate(canonicals_per_client):
        chosen = {}
        for canonical in canonicals:
            order = assignment_order[canonical]
            chosen[canonical] = order[client_pos % len(order)]
        out.append(chosen)
    return out


def _build_partitions(
    ds: TabularDataset,
    n_clients: int,
    shared: list[str],
    unique_per_client: list[list[str]],
    alias_table: AliasTable,
    seed: int,
) -> list[ClientPartition]:
    labels = ds.labels()
    rng_rows = np.random.default_rng(derive_seed(seed, "partition-rows"))
    chunks = _stratified_chunks(labels, n_clients, rng_rows)
    for c, chunk in enumerate(chunks):
        pos = int(labels[chunk].sum()) if chunk else 0
        neg = len(chunk) - pos
        if pos < 2 or neg < 2:
            raise InsufficientRows(
                f"client {c + 1} would receive {pos} positive / {neg} negative rows; "
                "need at least 2 of each"
            )

    canonicals_per_client = [shared + unique_per_client[c] for c in range(n_clients)]
    alias_choices = _assign_aliases(canonicals_per_client, alias_table, seed)

    col_by_name = {c.name: c for c in ds.columns}
    parts = []
    for c in range(n_clients):
        schema = []
        canonical_of = {}
        for canonical in canonicals_per_client[c]:
            renamed = alias_choices[c][canonical]
            src = col_by_name[canonical]
            schema.append(ColumnSpec(name=renamed, kind=src.kind, description=src.description))
            canonical_of[renamed] = canonical
        parts.append(
            ClientPartition(
                client_id=c + 1,
                row_indices=tuple(chunks[c]),
                schema=tuple(schema),
                canonical_of=canonical_of,
                shared_features=frozenset(shared),
                unique_features=frozenset(unique_per_client[c]),
            )
        )
    return parts


def partition(
    ds: TabularDataset,
    n_clients: int,
    shared_count: int,
    unique_count: int,
    alias_table: AliasTable,
    seed: int,
) -> list[ClientPartition]:
    """Split rows near-equally (stratified) and give every client the shared
    features plus its own unique features, all under per-client aliases.

    Feature choices and alias picks are seeded; leftover features beyond
    shared + n_clients*unique are dropped for the experiment.
    """
    if n_clients < 1:
        raise InsufficientRows("need at least one client")
    feature_names = [c.name for c in ds.feature_columns]
    needed = shared_count + n_clients * unique_count
    if needed > len(feature_names):
        raise InsufficientFeatures(
            f"need {needed} features (shared {shared_count} + {n_clients}x{unique_count}), "
            f"dataset has {len(feature_names)}"
        )
    rng = np.random.default_rng(derive_seed(seed, "partition-features"))
    order = [feature_names[int(i)] for i in rng.permutation(len(feature_names))]
    shared = sorted(order[:shared_count])
    pool = order[shared_count:]
    unique_per_client = [
        sorted(pool[c * unique_count : (c + 1) * unique_count]) for c in range(n_clients)
    ]
    return _build_partitions(ds, n_clients, shared, unique_per_client, alias_table, seed)


def overlap_partition(
    ds: TabularDataset,
    n_clients: int,
    overlap_fraction: float,
    alias_table: AliasTable,
    seed: int,
) -> list[ClientPartition]:
    """Partition with shared_count = round(overlap_fraction * n_features);
    every remaining feature is dealt round-robin to exactly one client."""
    if not (0.0 < overlap_fraction <= 1.0):
        raise InsufficientFeatures(
            f"overlap_fraction must be in (0, 1], got {overlap_fraction}"
        )
    feature_names = [c.name for c in ds.feature_columns]
    total = len(feature_names)
    shared_count = round_half_up(overlap_fraction * total)
    shared_count = max(0, min(total, shared_count))
    rng = np.random.default_rng(derive_seed(seed, "partition-features"))
    order = [feature_names[int(i)] for i in rng.permutation(total)]
    shared = sorted(order[:shared_count])
    pool = order[shared_count:]
    unique_per_client: list[list[str]] = [[] for _ in range(n_clients)]
    for i, name in enumerate(pool):
        unique_per_client[i % n_clients].append(name)
    unique_per_client = [sorted(u) for u in unique_per_client]
    return _build_partitions(ds, n_clients, shared, unique_per_client, alias_table, seed)


# --------------------------------------------------------------------------
# train/test split


def _allocate_stratified(counts: dict[int, int], total_train: int) -> dict[int, int]:
    """Largest-remainder allocation of total_train across classes, clamped so
    no class with >= 2 rows ends up entirely on one side."""
    n = sum(counts.values())
    quotas = {cls: total_train * c / n for cls, c in counts.items()}
    alloc = {cls: int(q) for cls, q in quotas.items()}
    leftover = total_train - sum(alloc.values())
    remainders = sorted(
        counts, key=lambda cls: (quotas[cls] - alloc[cls], cls), reverse=True
    )
    for cls in remainders[:leftover]:
        alloc[cls] += 1
    for cls, c in counts.items():
        if c >= 2:
            alloc[cls] = min(max(alloc[cls], 1), c - 1)
    return alloc


def split(part: ClientPartition, spec: SplitSpec, labels: np.ndarray):
    """Split a partition's rows into (train, test) source-dataset indices.

    labels: the full dataset's label vector (indexed by source row index).
    Raises TooFewRows when either side would be empty.
    """
    rows = list(part.row_indices)
    if not rows:
        raise TooFewRows(f"client {part.client_id} has no rows")
    n = len(rows)
    total_train = round_half_up(spec.train_fraction * n)
    if total_train <= 0 or total_train >= n:
        raise TooFewRows(
            f"train_fraction {spec.train_fraction} leaves an empty side for "
            f"client {part.client_id} ({n} rows)"
        )
    rng = np.random.default_rng(derive_seed(spec.seed, f"split-c{part.client_id}"))
    if spec.stratified:
        by_class: dict[int, list[int]] = {}
        for r in rows:
            by_class.setdefault(int(labels[r]), []).append(r)
        alloc = _allocate_stratified(
            {cls: len(v) for cls, v in by_class.items()}, total_train
        )
        train, test = [], []
        for cls in sorted(by_class):
            idx = by_class[cls]
            shuffled = [idx[int(i)] for i in rng.permutation(len(idx))]
            k = alloc[cls]
            train.extend(shuffled[:k])
            test.extend(shuffled[k:])
    else:
        shuffled = [rows[int(i)] for i in rng.permutation(n)]
        train, test = shuffled[:total_train], shuffled[total_train:]
    if not train or not test:
        raise TooFewRows(
            f"split left an empty side for client {part.client_id}"
        )
    return sorted(train), sorted(test)
