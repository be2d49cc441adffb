"""Corpus → frozen-transformer embeddings → FEDEMB store."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from embed_sidecar.config import SidecarConfig
from embed_sidecar.corpus import CorpusLine, read_corpus
from embed_sidecar.errors import ConfigError, WriteError
from embed_sidecar.fedemb import write_store
from embed_sidecar.models import load_encoder, resolve_checkpoint, resolve_device

# The downstream consumer is tuned for base-sized encoders; other widths
# must be opted into explicitly so a config typo can't silently produce a
# store the training config then has to be contorted around.
EXPECTED_DIM = 768


@dataclass(frozen=True)
class EmbedSummary:
    """What an embedding run did, also persisted as ``<out>.manifest.json``."""

    model_id: str
    checkpoint: str
    revision: str
    resolved_commit: str | None
    encoder_id: str
    dim: int
    records: int
    truncated: int
    max_tokens: int
    out_path: str


def _batches(lines: list[CorpusLine], size: int):
    for start in range(0, len(lines), size):
        yield lines[start : start + size]


def embed_corpus(cfg: SidecarConfig, corpus_path: str | Path, out_path: str | Path) -> EmbedSummary:
    """Embed every corpus record with the configured frozen encoder.

    Record order in the store matches corpus order. The first-token vector
    of the final hidden layer is taken as the sentence embedding, cast to
    float32. ``encoder_id`` is the configured ``model_id`` verbatim.
    """
    lines = read_corpus(corpus_path)
    checkpoint, revision = resolve_checkpoint(cfg.model_id, cfg.revision)
    device = resolve_device(cfg.device)
    tokenizer, model, resolved_commit = load_encoder(checkpoint, revision, device)
    dim = int(model.config.hidden_size)
    if dim != EXPECTED_DIM and not cfg.allow_dim:
        raise ConfigError(
            f"checkpoint hidden width is {dim}, expected {EXPECTED_DIM}; "
            "pass --allow-dim (or set allow_dim in the config) to accept it"
        )

    records: list[tuple[str, np.ndarray]] = []
    truncated = 0
    with torch.no_grad():
        for batch in _batches(lines, cfg.batch_size):
            texts = [line.text for line in batch]
            # Count how many records lose tokens to the cap before encoding
            # with the cap applied.
            full_ids = tokenizer(texts, add_special_tokens=True, truncation=False)["input_ids"]
            truncated += sum(1 for ids in full_ids if len(ids) > cfg.max_tokens)
            enc = tokenizer(
                texts,
                truncation=True,
                max_length=cfg.max_tokens,
                padding=True,
                return_tensors="pt",
            ).to(device)
            out = model(**enc)
            vectors = out.last_hidden_state[:, 0, :].cpu().numpy().astype(np.float32)
            records.extend((line.record_id, vectors[i]) for i, line in enumerate(batch))

    target = Path(out_path)
    write_store(target, cfg.model_id, dim, records)
    summary = EmbedSummary(
        model_id=cfg.model_id,
        checkpoint=checkpoint,
        revision=revision,
        resolved_commit=resolved_commit,
        encoder_id=cfg.model_id,
        dim=dim,
        records=len(records),
        truncated=truncated,
        max_tokens=cfg.max_tokens,
        out_path=str(target),
    )
    _write_manifest(target, summary)
    return summary


def _write_manifest(store_path: Path, summary: EmbedSummary) -> None:
    manifest_path = store_path.with_name(store_path.name + ".manifest.json")
    try:
        manifest_path.write_text(json.dumps(asdict(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise WriteError(f"could not write manifest {manifest_path}: {exc}") from exc
