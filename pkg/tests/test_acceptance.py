"""Release gate: one test per required system property, each with its
pinned tolerance and runtime budget. Run with -v for one pass/fail line per
property.

Covered properties:
  1. analytic gradients match central finite differences (50 random cases)
  2. aggregation identities (fixed point, linearity, order invariance)
  3. embedding-store files round-trip bit-exactly across dims and sizes
  4. canonicalizing encoder is invariant to alias assignment; the invariance
     demonstrably comes from canonicalization (off -> embeddings differ)
  5. schema-heterogeneity robustness: aligned pipeline beats the raw
     baseline at low overlap and degrades gracefully
  6. federated training converges well before the round budget
  7. communication accounting: exact parameter counts and conserved totals
  8. statistics against frozen high-precision references
  9. repeated training runs produce byte-identical summary reports
"""

import json
import os
import time

import numpy as np
import pytest

from fedalign.cli import main as cli_main
from fedalign.dataset import ColumnSpec, default_alias_table
from fedalign.encoders import EncoderConfig, build_encoder
from fedalign.fed import FedConfig, aggregate, comm_cost
from fedalign.models import (
    WeightVector,
    flatten,
    init_model,
    loss_and_grad,
    make_dropout_mask,
    unflatten,
)
from fedalign.pipeline import resolve_alias_table, run_overlap_experiment
from fedalign.serialize import serialize_record
from fedalign.stats import paired_t_test, regularized_incomplete_beta
from fedalign.store import EmbeddingStore, read_store, write_store
from fedalign.synth import FEATURES, synth_dataset

SEEDS = (1, 2, 3, 4, 5)


# --------------------------------------------------------------------------
# 1. gradient oracle


def _max_rel_error(model, X, y, mask, rng, h=1e-5, coords=20):
    shape = model.shape
    flat = flatten(model).values
    _, grad = loss_and_grad(model, X, y, dropout_mask=mask)

    def loss_at(values):
        m = unflatten(shape, values, lam=getattr(model, "lam", 0.01))
        return loss_and_grad(m, X, y, dropout_mask=mask)[0]

    worst = 0.0
    picks = rng.choice(flat.shape[0], size=min(coords, flat.shape[0]), replace=False)
    for j in picks:
        up = flat.copy()
        up[j] += h
        dn = flat.copy()
        dn[j] -= h
        fd = (loss_at(up) - loss_at(dn)) / (2 * h)
        denom = max(abs(fd), abs(grad.values[j]), 1e-8)
        worst = max(worst, abs(fd - grad.values[j]) / denom)
    return worst


def _random_case(rng, kind: str):
    """A (model, batch, mask) triple whose hidden pre-activations stay clear
    of the ReLU kink, so central differences are trustworthy."""
    for _ in range(50):
        dim = int(rng.integers(2, 17))
        n = int(rng.integers(4, 33))
        model = init_model(kind, dim, seed=int(rng.integers(0, 2**31)))
        X = rng.normal(scale=1.5, size=(n, dim))
        y = (rng.random(n) < 0.5).astype(np.float64)
        mask = None
        if kind == "mlp":
            if np.abs(X @ model.W1 + model.b1).min() < 1e-3:
                continue
            if rng.random() < 0.5:
                mask = make_dropout_mask(rng, n, 16, 0.2)
        return model, X, y, mask
    raise AssertionError("could not sample a kink-free case")


def test_gradient_oracle_50_random_cases():
    started = time.perf_counter()
    rng = np.random.default_rng(20240501)
    worst = 0.0
    for i in range(50):
        kind = "lr" if i % 2 == 0 else "mlp"
        model, X, y, mask = _random_case(rng, kind)
        worst = max(worst, _max_rel_error(model, X, y, mask, rng))
    assert worst < 1e-4, f"max relative gradient error {worst}"
    assert time.perf_counter() - started < 10.0


# --------------------------------------------------------------------------
# 2. aggregation identities


def test_aggregation_identities():
    started = time.perf_counter()
    w = flatten(init_model("lr", 16, seed=0))
    rng = np.random.default_rng(7)
    deltas = [WeightVector(rng.normal(size=17), w.shape) for _ in range(6)]

    # zero-delta fixed point, exact
    zeros = [WeightVector(np.zeros(17), w.shape) for _ in range(4)]
    assert np.array_equal(aggregate(w, zeros).values, w.values)

    # linearity: aggregate(w, a*d1 + b*d2) - w == a*mean(d1) + b*mean(d2)
    a, b = 0.7, -1.3
    combos = [
        WeightVector(a * d1.values + b * d2.values, w.shape)
        for d1, d2 in zip(deltas[:3], deltas[3:])
    ]
    lhs = aggregate(w, combos).values - w.values
    rhs = a * np.mean([d.values for d in deltas[:3]], axis=0) + b * np.mean(
        [d.values for d in deltas[3:]], axis=0
    )
    np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)

    # permutation invariance, bitwise
    base = aggregate(w, deltas).values
    for perm in ([5, 3, 1, 0, 2, 4], list(reversed(range(6)))):
        assert np.array_equal(aggregate(w, [deltas[i] for i in perm]).values, base)

    assert time.perf_counter() - started < 1.0


# --------------------------------------------------------------------------
# 3. store round-trip


def test_store_round_trip_bit_exact(tmp_path):
    started = time.perf_counter()
    rng = np.random.default_rng(99)
    cases = [(4, 10_000), (16, 5_000), (64, 2_000), (256, 1_000), (768, 10_000)]
    for dim, n_records in cases:
        store = EmbeddingStore(dim=dim, encoder_id=f"case-d{dim}")
        for i in range(n_records):
            store.add(f"rec-{i:06d}", (rng.normal(size=dim) * 10).astype(np.float32))
        path = tmp_path / f"d{dim}.fedemb"
        write_store(str(path), store)
        loaded = read_store(str(path))
        assert loaded.dim == dim
        assert loaded.encoder_id == store.encoder_id
        assert list(loaded.vectors) == list(store.vectors)
        for rid, vec in store.vectors.items():
            assert loaded.vectors[rid].tobytes() == vec.tobytes()
    assert time.perf_counter() - started < 30.0


# --------------------------------------------------------------------------
# 4. alias-invariance of the canonicalizing encoder


def _alias_assignments():
    """Two alias choices per canonical feature with no spelling in common."""
    table = default_alias_table()
    first, second = {}, {}
    for name in FEATURES:
        pool = [a for a in table.aliases_of(name) if a != name]
        assert len(pool) >= 2
        first[name], second[name] = pool[0], pool[1]
    return table, first, second


def _encode_under(texts_encoder, record, assignment):
    renamed = {assignment[k]: v for k, v in record.items()}
    schema = tuple(ColumnSpec(n, "numeric") for n in renamed)
    seq = serialize_record(renamed, schema, "structured")
    return texts_encoder.encode(seq).values


def test_alias_invariance_500_records(tmp_path):
    started = time.perf_counter()
    table, first, second = _alias_assignments()
    rng = np.random.default_rng(31)
    records = [
        {name: float(rng.integers(0, 200)) for name in FEATURES} for _ in range(500)
    ]

    canonical = build_encoder(
        EncoderConfig(kind="hash", dim=768, canonicalize=True, alias_table=table)
    )
    for record in records:
        va = _encode_under(canonical, record, first)
        vb = _encode_under(canonical, record, second)
        assert np.array_equal(va, vb)

    plain = build_encoder(EncoderConfig(kind="hash", dim=768, canonicalize=False))
    differing = sum(
        not np.array_equal(
            _encode_under(plain, record, first), _encode_under(plain, record, second)
        )
        for record in records
    )
    assert differing >= 475  # >= 95% of 500
    assert time.perf_counter() - started < 10.0


# --------------------------------------------------------------------------
# 5 + 6 + 7. end-to-end runs (shared across the three criteria)


@pytest.fixture(scope="module")
def e2e_runs():
    started = time.perf_counter()
    ds = synth_dataset(n_rows=600, seed=0)
    table = resolve_alias_table(None, ds)

    def cell(overlap, variant):
        return {
            seed: run_overlap_experiment(
                ds, table, overlap=overlap, variant=variant, seed=seed
            )
            for seed in SEEDS
        }

    runs = {
        "aligned08": cell(0.8, "aligned"),
        "aligned02": cell(0.2, "aligned"),
        "raw02": cell(0.2, "raw"),
    }
    runs["elapsed"] = time.perf_counter() - started
    return runs


def _mean(xs):
    return sum(xs) / len(xs)


def test_heterogeneity_gap_and_graceful_degradation(e2e_runs):
    aligned02 = _mean([r.final_f1 for r in e2e_runs["aligned02"].values()])
    raw02 = _mean([r.final_f1 for r in e2e_runs["raw02"].values()])
    aligned08 = _mean([r.final_f1 for r in e2e_runs["aligned08"].values()])
    assert aligned02 - raw02 >= 0.15, f"gap {aligned02 - raw02:.4f}"
    assert aligned02 >= 0.85 * aligned08, f"ratio {aligned02 / aligned08:.4f}"
    assert e2e_runs["elapsed"] < 300.0


def test_convergence_by_round_15(e2e_runs):
    for seed, run_result in e2e_runs["aligned08"].items():
        drift = abs(run_result.f1_at_round(15) - run_result.f1_at_round(25))
        assert drift <= 0.02, f"seed {seed}: round-15 vs round-25 drift {drift:.4f}"
    assert e2e_runs["elapsed"] < 300.0


def test_communication_accounting(e2e_runs):
    started = time.perf_counter()
    fed_cfg = FedConfig()
    mlp_params, mlp_payload = comm_cost(init_model("mlp", 768, seed=0).shape, fed_cfg)
    lr_params, lr_payload = comm_cost(init_model("lr", 768, seed=0).shape, fed_cfg)
    assert mlp_params == 12_321
    assert mlp_payload == 12_321 * 4 + 800
    assert lr_params == 769
    assert lr_payload == 769 * 4 + 800

    # conservation over a 25-round full-participation run (3 clients, MLP)
    run_result = e2e_runs["aligned08"][1]
    assert len(run_result.round_logs) == 25
    for log in run_result.round_logs:
        assert log.participant_ids == [1, 2, 3]
        assert log.bytes_up == 3 * mlp_payload
        assert log.bytes_down == 3 * mlp_payload
    assert sum(l.bytes_up for l in run_result.round_logs) == 25 * 3 * mlp_payload
    assert sum(l.bytes_down for l in run_result.round_logs) == 25 * 3 * mlp_payload
    assert time.perf_counter() - started < 60.0


# --------------------------------------------------------------------------
# 8. statistics oracle


def test_statistics_oracle():
    t, p = paired_t_test([1.0, 2.0, 3.0, 4.0, 5.0], [0.0, 0.0, 0.0, 0.0, 0.0])
    assert t == pytest.approx(4.2426, abs=1e-3)
    assert p == pytest.approx(0.0132, abs=5e-4)

    beta_vectors = [
        (0.5, 0.5, 0.25, 0.33333333333333333),
        (0.5, 0.5, 0.5, 0.5),
        (2.0, 3.0, 0.4, 0.52480000000000004),
        (5.0, 2.0, 0.8, 0.65536000000000011),
        (0.5, 5.0, 0.1, 0.68335708497998776),
        (8.0, 10.0, 0.3, 0.10464009582886828),
        (2.0, 0.5, 4.0 / 22.0, 0.01323559956368269),
        (1.0, 1.0, 0.7, 0.69999999999999996),
        (3.5, 1.5, 0.6, 0.28315386542845672),
        (10.0, 10.0, 0.5, 0.5),
    ]
    for a, b, x, expected in beta_vectors:
        assert regularized_incomplete_beta(a, b, x) == pytest.approx(expected, abs=1e-8)


# --------------------------------------------------------------------------
# 9. determinism of training summaries


def test_training_summaries_byte_identical_on_rerun(tmp_path):
    out = tmp_path / "out"
    config = {
        "dataset": {"synthetic": {"n_rows": 60, "seed": 0}},
        "scenario": {"n_clients": 2, "overlap_fraction": 0.8},
        "encoder": {"kind": "hash", "dim": 16},
        "model": {"kind": "lr"},
        "fed": {"rounds": 2},
        "train": {"epochs": 2, "batch_size": 16},
        "seeds": [1, 2],
        "output_dir": str(out),
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config), encoding="utf-8")
    for command in ("prepare", "serialize", "embed", "train"):
        assert cli_main([command, "--config", str(cfg_path), "--quiet"]) == 0

    reports = ("summary.json", "summary.csv", "stability.csv",
               "rounds_seed1.csv", "rounds_seed2.csv")
    first = {name: (out / name).read_bytes() for name in reports}
    assert cli_main(["train", "--config", str(cfg_path), "--quiet"]) == 0
    for name in reports:
        assert (out / name).read_bytes() == first[name], f"{name} changed on rerun"
