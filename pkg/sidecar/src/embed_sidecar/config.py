"""Sidecar configuration: a small JSON file with strict validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from embed_sidecar.errors import ConfigError, MissingFile

KNOWN_MODEL_IDS = ("distilbert", "albert", "roberta", "clinicalbert")


@dataclass(frozen=True)
class SidecarConfig:
    """Validated embedding-run parameters.

    ``model_id`` is either one of :data:`KNOWN_MODEL_IDS` or an explicit
    checkpoint (a local directory or a hub repo id); either way it becomes
    the ``encoder_id`` stamped into the output store.
    """

    model_id: str
    revision: str | None = None
    max_tokens: int = 128
    batch_size: int = 16
    device: str = "cpu"
    output: str | None = None
    allow_dim: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.model_id, str) or not self.model_id:
            raise ConfigError("model_id must be a non-empty string")
        if self.revision is not None and (not isinstance(self.revision, str) or not self.revision):
            raise ConfigError("revision must be a non-empty string when given")
        if isinstance(self.max_tokens, bool) or not isinstance(self.max_tokens, int):
            raise ConfigError("max_tokens must be an integer")
        if self.max_tokens < 8:
            raise ConfigError(f"max_tokens must be >= 8, got {self.max_tokens}")
        if isinstance(self.batch_size, bool) or not isinstance(self.batch_size, int):
            raise ConfigError("batch_size must be an integer")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not isinstance(self.device, str) or not self.device:
            raise ConfigError("device must be a non-empty string")
        if self.output is not None and not isinstance(self.output, str):
            raise ConfigError("output must be a string path when given")
        if not isinstance(self.allow_dim, bool):
            raise ConfigError("allow_dim must be a boolean")


def load_sidecar_config(path: str | Path) -> SidecarConfig:
    """Load and validate a JSON config file, rejecting unknown fields."""
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"config file not found: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(obj).__name__}")
    known = {f.name for f in fields(SidecarConfig)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"unknown configuration field(s): {', '.join(unknown)}")
    if "model_id" not in obj:
        raise ConfigError("model_id is required")
    return SidecarConfig(**obj)
