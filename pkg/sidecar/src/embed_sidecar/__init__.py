"""Frozen-transformer embedding exporter for serialized tabular corpora.

This package reads the JSONL corpus format produced by the fedalign
``serialize`` stage, runs each record's text through a frozen pretrained
transformer encoder, and writes the first-token (``[CLS]``) vector of the
final hidden layer to a FEDEMB v1 binary store that fedalign's ``embed
--encoder store`` stage can validate and train on.

It deliberately shares no code with fedalign: the only coupling is the two
file formats (corpus JSONL in, FEDEMB v1 out), so either side can be swapped
out independently.
"""

from embed_sidecar.config import SidecarConfig, load_sidecar_config
from embed_sidecar.embed import EmbedSummary, embed_corpus
from embed_sidecar.errors import (
    CheckpointUnavailable,
    ConfigError,
    CorpusParseError,
    MissingFile,
    SidecarError,
    StoreFormatError,
    WriteError,
)
from embed_sidecar.verify import VerifyReport, verify_store

__version__ = "0.1.0"

__all__ = [
    "CheckpointUnavailable",
    "ConfigError",
    "CorpusParseError",
    "EmbedSummary",
    "MissingFile",
    "SidecarConfig",
    "SidecarError",
    "StoreFormatError",
    "VerifyReport",
    "WriteError",
    "__version__",
    "embed_corpus",
    "load_sidecar_config",
    "verify_store",
]
