"""Committed synthetic tabular generator for end-to-end property tests.

Two-class Gaussian-noise data with 13 numeric features and a 15% positive
rate. Each feature takes values in four quantized bins around its own base
level, and the class label decides *which pair* of bins a cell may occupy:

* Feature k lives at base 40*(k+1) with bins at offsets {-15, -5, +5, +15}
  (Gaussian noise sd 1.5, values quantized to multiples of 5). One class
  draws from {+15, -5} (the "far" bin with probability 0.7, the opposite
  "near" bin otherwise) and the other class from {-15, +5}; which class
  gets which pair alternates with the feature index.
* Because every feature occupies its own disjoint value range, a serialized
  value token pins down both the feature and its bin, each bin is exclusive
  to one class, and each feature's vocabulary is a handful of tokens seen
  often enough to estimate class association from a few hundred rows.
  Token-level encoders therefore separate the classes regardless of how
  features are renamed or which client holds them.
* The two classes share an identical mix of bin magnitudes (70% far, 30%
  near), so value magnitude alone carries no label signal; only the signed
  direction does, and that direction alternates across features. Models
  that consume features by column position learn sign-opposed weights for
  whatever feature sits in a column, so averaging such models across
  schema-misaligned clients cancels the signal, while the same models on
  schema-aligned columns recover it fully.

The exact constants below are frozen; tests depend on their statistical
consequences, not on individual draws.
"""

from __future__ import annotations

import numpy as np

from .dataset import ColumnSpec, TabularDataset
from .hashing import derive_seed
from .util import round_half_up

FEATURES = (
    "age",
    "sex",
    "is_smoking",
    "cigs_per_day",
    "bp_meds",
    "prevalent_stroke",
    "prevalent_hyp",
    "diabetes",
    "tot_chol",
    "sys_bp",
    "dia_bp",
    "heart_rate",
    "glucose",
)

LABEL_COLUMN = "outcome"

_BASE_STEP = 40.0
_NOISE_SD = 1.5
_QUANTUM = 5.0
_FAR_OFFSET = 3.0 * _QUANTUM
_NEAR_OFFSET = _QUANTUM
_P_FAR = 0.7
_POS_RATE = 0.15


def synth_dataset(n_rows: int = 600, seed: int = 0) -> TabularDataset:
    """Deterministic synthetic dataset; same (n_rows, seed) -> same rows."""
    rng = np.random.default_rng(derive_seed(seed, "synth"))
    n_pos = round_half_up(_POS_RATE * n_rows)
    y = np.zeros(n_rows, dtype=np.int64)
    y[:n_pos] = 1
    y = y[rng.permutation(n_rows)]

    n_feat = len(FEATURES)
    bases = _BASE_STEP * (np.arange(n_feat) + 1)
    directions = np.where(np.arange(n_feat) % 2 == 0, 1.0, -1.0)
    # Per-cell class-oriented direction: positives follow the feature's
    # direction, negatives oppose it.
    oriented = directions[None, :] * np.where(y[:, None] == 1, 1.0, -1.0)
    far = rng.random((n_rows, n_feat)) < _P_FAR
    offsets = np.where(far, oriented * _FAR_OFFSET, -oriented * _NEAR_OFFSET)
    noise = rng.normal(0.0, _NOISE_SD, size=(n_rows, n_feat))
    values = _QUANTUM * np.rint((bases[None, :] + offsets + noise) / _QUANTUM)

    columns = [ColumnSpec(name=f, kind="numeric") for f in FEATURES]
    columns.append(ColumnSpec(name=LABEL_COLUMN, kind="numeric"))
    rows = tuple(
        tuple([*map(float, values[i]), float(y[i])]) for i in range(n_rows)
    )
    return TabularDataset(columns=tuple(columns), rows=rows, label_column=LABEL_COLUMN)
