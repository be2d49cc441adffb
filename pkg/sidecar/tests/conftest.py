"""Shared fixtures: a tiny randomly initialized DistilBERT checkpoint saved
to disk so every test runs offline, plus a corpus-file factory."""

import json
import os

import pytest

from helpers_sidecar import corpus_rows

os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

TINY_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "age", "bp", "glucose", "heart", "rate", "bmi", "smoker",
    "is", "the", "a", "of", "for", "this", "patient", "reading",
    ":", ",", ";", ".", "=",
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "##0", "##1", "##2", "##3", "##4", "##5", "##6", "##7", "##8", "##9",
]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> str:
    """A 32-wide 2-layer DistilBERT with random weights, saved to disk."""
    import torch
    from transformers import DistilBertConfig, DistilBertModel, DistilBertTokenizerFast
    from transformers.utils import logging as hf_logging

    hf_logging.disable_progress_bar()
    root = tmp_path_factory.mktemp("tiny-distilbert")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(TINY_VOCAB) + "\n", encoding="utf-8")
    tokenizer = DistilBertTokenizerFast(vocab_file=str(vocab_file))
    torch.manual_seed(0)
    config = DistilBertConfig(
        vocab_size=len(TINY_VOCAB),
        dim=32,
        hidden_dim=64,
        n_layers=2,
        n_heads=2,
        max_position_embeddings=128,
    )
    model = DistilBertModel(config)
    tokenizer.save_pretrained(root)
    model.save_pretrained(root)
    return str(root)


@pytest.fixture
def make_corpus(tmp_path):
    """Factory writing a corpus.jsonl from row dicts (defaults to 6 rows)."""

    def _make(rows=None, name="corpus.jsonl"):
        if rows is None:
            rows = corpus_rows(6)
        path = tmp_path / name
        path.write_text(
            "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows),
            encoding="utf-8",
        )
        return path

    return _make
