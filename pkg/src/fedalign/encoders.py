"""Text -> fixed-dimension embedding, behind one encoder contract.

Two offline backends:

* HashEncoder — deterministic token hashing. Each (token, position-bucket)
  pair lands in one of `dim` slots with a +/-1 contribution via a seeded
  64-bit FNV-1a hash; the result is L2-normalized. With canonicalization
  enabled, alias tokens are first replaced by their canonical feature name,
  which makes embeddings invariant to feature renaming.
* StoreEncoder — precomputed vectors looked up by record id from a FEDEMB
  file (produced externally, e.g. by a transformer exporter).

Both are frozen: stateless after construction, never trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import AliasTable
from .errors import ConfigError, DimensionMismatch, MissingEmbedding
from .hashing import position_buckets, token_slot, tokenize
from .serialize import TextSequence
from .store import EmbeddingStore, read_store

HASH_ENCODER_ID = "hash-fnv1a64-pos4-v1"

KIND_HASH = "hash"
KIND_STORE = "store"
KIND_RAW = "raw"


@dataclass(frozen=True)
class EmbeddingVector:
    record_id: str
    values: np.ndarray
    encoder_id: str


@dataclass
class EncoderConfig:
    kind: str = KIND_HASH
    dim: int = 768
    canonicalize: bool = False
    alias_table: AliasTable | None = None
    store_path: str | None = None
    max_tokens: int = 128
    normalize_store: bool = False

    def validate(self) -> None:
        if self.kind not in (KIND_HASH, KIND_STORE, KIND_RAW):
            raise ConfigError(f"encoder.kind: unknown kind {self.kind!r}")
        if self.dim <= 0:
            raise ConfigError(f"encoder.dim: must be positive, got {self.dim}")
        if self.kind == KIND_STORE and not self.store_path:
            raise ConfigError("encoder.store_path: required when kind is 'store'")


def hash_encode(
    text: str,
    dim: int,
    canonicalize: bool = False,
    alias_table: AliasTable | None = None,
    max_tokens: int = 128,
) -> np.ndarray:
    """Deterministic dim-vector for a text; unit L2 norm unless empty.

    Tokens beyond max_tokens are ignored. Position buckets are computed on
    the raw token stream; canonicalization only swaps the token fed to the
    hash. Accumulated contributions are exact small integers, so the result
    is independent of token order within equal (token, bucket) multisets.
    """
    if dim <= 0:
        raise ConfigError(f"dim must be positive, got {dim}")
    tokens = tokenize(text)[:max_tokens]
    buckets = position_buckets(tokens)
    alias_of = alias_table.alias_to_canonical if (canonicalize and alias_table) else {}
    acc = np.zeros(dim, dtype=np.float64)
    for tok, bucket in zip(tokens, buckets):
        if canonicalize:
            tok = alias_of.get(tok, tok)
        idx, sign = token_slot(tok, bucket, dim)
        acc[idx] += sign
    norm = np.sqrt(np.sum(acc * acc))
    if norm > 0.0:
        acc /= norm
    return acc


class HashEncoder:
    encoder_id = HASH_ENCODER_ID

    def __init__(self, dim=768, canonicalize=False, alias_table=None, max_tokens=128):
        self.dim = dim
        self.canonicalize = canonicalize
        self.alias_table = alias_table
        self.max_tokens = max_tokens

    def encode(self, seq: TextSequence) -> EmbeddingVector:
        values = hash_encode(
            seq.text, self.dim, self.canonicalize, self.alias_table, self.max_tokens
        )
        return EmbeddingVector(seq.record_id, values, self.encoder_id)


class StoreEncoder:
    def __init__(self, store: EmbeddingStore, normalize: bool = False):
        self.store = store
        self.dim = store.dim
        self.encoder_id = store.encoder_id
        self.normalize = normalize

    @classmethod
    def open(cls, path: str, normalize: bool = False) -> "StoreEncoder":
        return cls(read_store(path), normalize=normalize)

    def encode(self, seq: TextSequence) -> EmbeddingVector:
        vec = self.store.vectors.get(seq.record_id)
        if vec is None:
            raise MissingEmbedding([seq.record_id])
        values = np.asarray(vec, dtype=np.float64)
        if self.normalize:
            norm = np.sqrt(np.sum(values * values))
            if norm > 0.0:
                values = values / norm
        return EmbeddingVector(seq.record_id, values, self.encoder_id)

    def check_coverage(self, record_ids) -> None:
        missing = [rid for rid in record_ids if rid not in self.store.vectors]
        if missing:
            raise MissingEmbedding(missing)


def build_encoder(cfg: EncoderConfig):
    """Construct the encoder backend for a config (raw has no text encoder)."""
    cfg.validate()
    if cfg.kind == KIND_HASH:
        return HashEncoder(cfg.dim, cfg.canonicalize, cfg.alias_table, cfg.max_tokens)
    if cfg.kind == KIND_STORE:
        enc = StoreEncoder.open(cfg.store_path, normalize=cfg.normalize_store)
        if enc.dim != cfg.dim:
            raise DimensionMismatch(
                f"store dim {enc.dim} does not match configured dim {cfg.dim}"
            )
        return enc
    raise ConfigError(f"encoder kind {cfg.kind!r} has no text encoder backend")


def encode(cfg: EncoderConfig, seq: TextSequence) -> EmbeddingVector:
    """One-shot convenience wrapper; reopens stores, so prefer build_encoder
    when encoding many sequences."""
    return build_encoder(cfg).encode(seq)
