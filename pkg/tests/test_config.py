"""Config loading: defaulting, validation, canonical hashing, and CLI
overrides."""

import json

import pytest

from fedalign.config import apply_overrides, from_dict, load_config
from fedalign.errors import ConfigError


def minimal() -> dict:
    return {}


# --------------------------------------------------------------------------
# defaulting


def test_empty_config_gets_all_defaults():
    cfg = from_dict(minimal())
    assert cfg.n_clients == 3
    assert cfg.overlap_fraction == 0.8
    assert cfg.fmt == "structured"
    assert cfg.model_kind == "mlp"
    assert cfg.seeds == [1, 2, 3, 4, 5]
    assert cfg.master_seed == 0
    assert cfg.stress_overlaps == [0.8, 0.6, 0.4, 0.2]
    assert cfg.stress_variants == ["aligned", "raw"]
    assert cfg.output_dir == "out"
    assert cfg.dataset == {"synthetic": {"n_rows": 600, "seed": 0}}


def test_partial_nested_dict_merges_with_defaults():
    cfg = from_dict({"encoder": {"dim": 64}})
    enc = cfg.encoder_config()
    assert enc.dim == 64
    assert enc.kind == "hash"  # untouched default
    assert enc.canonicalize is True
    assert enc.max_tokens == 128


def test_train_config_carries_field_values_and_seed():
    cfg = from_dict({"train": {"epochs": 3, "lambda": 0.5}})
    tc = cfg.train_config(seed=9)
    assert tc.epochs == 3
    assert tc.lam == 0.5
    assert tc.seed == 9
    assert tc.lr == 0.001  # default untouched


def test_fed_config_composition():
    cfg = from_dict({"fed": {"rounds": 7}, "split": {"train_fraction": 0.7}})
    fc = cfg.fed_config(seed=2)
    assert fc.rounds == 7
    assert fc.seed == 2
    assert fc.train_cfg.seed == 2
    assert fc.train_fraction == 0.7


def test_unknown_field_reports_dotted_path():
    with pytest.raises(ConfigError, match="encoder.dimension"):
        from_dict({"encoder": {"dimension": 64}})
    with pytest.raises(ConfigError, match="typo"):
        from_dict({"typo": 1})


# --------------------------------------------------------------------------
# dataset and scenario shapes


def test_csv_dataset_requires_label_column():
    with pytest.raises(ConfigError, match="label_column"):
        from_dict({"dataset": {"path": "data.csv"}})
    cfg = from_dict({"dataset": {"path": "data.csv", "label_column": "y"}})
    assert cfg.dataset["path"] == "data.csv"


def test_dataset_path_and_synthetic_are_exclusive():
    # supplying both forms: the path form wins the schema, so 'synthetic'
    # is rejected as an unknown field
    with pytest.raises(ConfigError, match="dataset.synthetic"):
        from_dict(
            {
                "dataset": {
                    "path": "data.csv",
                    "label_column": "y",
                    "synthetic": {"n_rows": 10},
                }
            }
        )
    # supplying neither form
    with pytest.raises(ConfigError, match="exactly one"):
        from_dict({"dataset": {"synthetic": None}})


def test_scenario_shared_unique_form():
    cfg = from_dict({"scenario": {"n_clients": 4, "shared": 6, "unique": 2}})
    assert cfg.shared_unique == (6, 2)
    assert cfg.overlap_fraction is None


def test_scenario_forms_are_exclusive():
    with pytest.raises(ConfigError, match="scenario"):
        from_dict({"scenario": {"overlap_fraction": 0.5, "shared": 6}})


def test_scenario_overlap_range_checked():
    with pytest.raises(ConfigError, match="overlap_fraction"):
        from_dict({"scenario": {"overlap_fraction": 0.0}})
    with pytest.raises(ConfigError, match="overlap_fraction"):
        from_dict({"scenario": {"overlap_fraction": 1.5}})


# --------------------------------------------------------------------------
# validation


def test_version_must_match():
    with pytest.raises(ConfigError, match="version"):
        from_dict({"version": 2})


def test_bad_serialization_format():
    with pytest.raises(ConfigError, match="serialization.format"):
        from_dict({"serialization": {"format": "xml"}})


def test_bad_encoder_kind_and_dim():
    with pytest.raises(ConfigError, match="encoder.kind"):
        from_dict({"encoder": {"kind": "bert"}})
    with pytest.raises(ConfigError, match="encoder.dim"):
        from_dict({"encoder": {"dim": 0}})


def test_store_encoder_requires_path():
    with pytest.raises(ConfigError, match="store_path"):
        from_dict({"encoder": {"kind": "store"}})
    cfg = from_dict({"encoder": {"kind": "store", "store_path": "emb.bin"}})
    assert cfg.encoder_config().store_path == "emb.bin"


def test_model_input_dim_must_match_encoder_dim():
    with pytest.raises(ConfigError, match="input_dim"):
        from_dict({"model": {"input_dim": 128}, "encoder": {"dim": 768}})
    cfg = from_dict({"model": {"input_dim": 768}})
    assert cfg.model_kind == "mlp"


def test_model_kind_checked():
    with pytest.raises(ConfigError, match="model.kind"):
        from_dict({"model": {"kind": "transformer"}})


def test_fed_and_train_ranges():
    with pytest.raises(ConfigError, match="fed.rounds"):
        from_dict({"fed": {"rounds": 0}})
    with pytest.raises(ConfigError, match="participation_fraction"):
        from_dict({"fed": {"participation_fraction": 0.0}})
    with pytest.raises(ConfigError, match="val_fraction"):
        from_dict({"train": {"val_fraction": 0.5}})
    with pytest.raises(ConfigError, match="batch_size"):
        from_dict({"train": {"batch_size": 0}})
    with pytest.raises(ConfigError, match="train_fraction"):
        from_dict({"split": {"train_fraction": 1.0}})
    with pytest.raises(ConfigError, match="seeds"):
        from_dict({"seeds": []})
    with pytest.raises(ConfigError, match="stress.overlaps"):
        from_dict({"stress": {"overlaps": [2.0]}})
    with pytest.raises(ConfigError, match="stress.variants"):
        from_dict({"stress": {"variants": ["fancy"]}})


# --------------------------------------------------------------------------
# file loading


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"fed": {"rounds": 3}}), encoding="utf-8")
    assert load_config(str(path)).fed_config(0).rounds == 3


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/cfg.json")


def test_load_config_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(str(path))


def test_config_root_must_be_object():
    with pytest.raises(ConfigError, match="object"):
        from_dict([1, 2, 3])


# --------------------------------------------------------------------------
# canonical hash


def test_hash_stable_across_field_order_and_omitted_defaults():
    a = from_dict({"fed": {"rounds": 25}, "master_seed": 0})
    b = from_dict({"master_seed": 0, "fed": {"rounds": 25}})
    c = from_dict({})  # same values via defaults
    assert a.config_hash() == b.config_hash() == c.config_hash()
    assert len(a.config_hash()) == 64


def test_hash_sensitive_to_values():
    assert from_dict({}).config_hash() != from_dict({"master_seed": 1}).config_hash()
    assert (
        from_dict({}).config_hash()
        != from_dict({"encoder": {"dim": 16}}).config_hash()
    )


# --------------------------------------------------------------------------
# CLI overrides


def test_overrides_rewrite_fields():
    cfg = from_dict({})
    out = apply_overrides(
        cfg, seed_override=9, out="results", fmt="compact", encoder_kind="raw"
    )
    assert out.master_seed == 9
    assert out.output_dir == "results"
    assert out.fmt == "compact"
    assert out.encoder_config().kind == "raw"
    # original untouched
    assert cfg.master_seed == 0
    assert cfg.fmt == "structured"


def test_override_away_from_store_clears_store_path():
    cfg = from_dict({"encoder": {"kind": "store", "store_path": "emb.bin"}})
    out = apply_overrides(cfg, encoder_kind="hash")
    assert out.encoder_config().kind == "hash"
    assert out.encoder_config().store_path is None


def test_override_to_invalid_kind_fails_validation():
    with pytest.raises(ConfigError, match="encoder.kind"):
        apply_overrides(from_dict({}), encoder_kind="bert")


def test_no_overrides_is_identity_hash():
    cfg = from_dict({"fed": {"rounds": 5}})
    assert apply_overrides(cfg).config_hash() == cfg.config_hash()
