"""Checkpoint registry and frozen-encoder loading.

The four friendly model ids map to fixed public checkpoints. Anything else
passed as ``model_id`` is treated as an explicit checkpoint reference (a
local directory or hub repo id), which is what the offline tests use.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from embed_sidecar.errors import CheckpointUnavailable, ConfigError


@dataclass(frozen=True)
class ModelSpec:
    checkpoint: str
    revision: str
    # How the sentence vector is obtained for this family. All four expose
    # the summary vector at position 0 of the final hidden layer; RoBERTa
    # calls that token <s> rather than [CLS] but the extraction is identical.
    first_token: str


REGISTRY: dict[str, ModelSpec] = {
    "distilbert": ModelSpec("distilbert-base-uncased", "main", "[CLS]"),
    "albert": ModelSpec("albert-base-v2", "main", "[CLS]"),
    "roberta": ModelSpec("roberta-base", "main", "<s>"),
    "clinicalbert": ModelSpec("emilyalsentzer/Bio_ClinicalBERT", "main", "[CLS]"),
}


def resolve_checkpoint(model_id: str, revision: str | None) -> tuple[str, str]:
    """Map a model id to ``(checkpoint, revision)``.

    Registry ids use their pinned checkpoint (revision overridable);
    anything else passes through verbatim with revision defaulting to
    ``main``.
    """
    spec = REGISTRY.get(model_id)
    if spec is not None:
        return spec.checkpoint, revision or spec.revision
    return model_id, revision or "main"


def resolve_device(device: str) -> torch.device:
    try:
        dev = torch.device(device)
    except (RuntimeError, ValueError) as exc:
        raise ConfigError(f"invalid device {device!r}: {exc}") from exc
    if dev.type == "cuda" and not torch.cuda.is_available():
        raise ConfigError("device 'cuda' requested but CUDA is not available")
    return dev


def load_encoder(checkpoint: str, revision: str, device: torch.device):
    """Load tokenizer + encoder, frozen and in eval mode.

    Returns ``(tokenizer, model, resolved_commit)`` where
    ``resolved_commit`` is the hub commit hash the checkpoint resolved to
    (``None`` for plain local directories).
    """
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(checkpoint, revision=revision)
        model = AutoModel.from_pretrained(checkpoint, revision=revision)
    except (OSError, ValueError) as exc:
        raise CheckpointUnavailable(f"could not load checkpoint {checkpoint!r} (revision {revision!r}): {exc}") from exc
    model.eval()
    model.requires_grad_(False)
    model.to(device)
    resolved_commit = getattr(model.config, "_commit_hash", None)
    return tokenizer, model, resolved_commit
