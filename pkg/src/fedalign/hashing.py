"""Seeded 64-bit FNV-1a hashing, tokenization, and seed derivation.

The hash function is the single source of randomness-free dispersion used
by the token embedding encoder (`encoders.HashEncoder`) and by
:func:`derive_seed`, which maps (master_seed, stage_label) pairs to
independent RNG streams. Keeping it here, dependency-free, means the
encoding of a corpus line can be reproduced from the documented algorithm
alone.
"""

from __future__ import annotations

import re

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

# Words (\w+) and each punctuation character as its own token; whitespace dropped.
TOKEN_RE = re.compile(r"\w+|[^\w\s]")

# Tokens that end a segment: the position counter restarts after them, so a
# token's position bucket depends only on its own segment, not on how many
# segments precede it.
SEGMENT_BREAKS = frozenset({",", ";", "."})

POSITION_BUCKETS = 4


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """Seeded FNV-1a over ``data``; the seed is XORed into the offset basis.

    With seed 0 this is the published FNV-1a 64 function (e.g.
    fnv1a64(b"foobar") == 0x85944171F73967E8).
    """
    h = (FNV_OFFSET_BASIS ^ (seed & _MASK64)) & _MASK64
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Split into word and punctuation tokens, discarding whitespace."""
    return TOKEN_RE.findall(text)


def position_buckets(tokens: list[str]) -> list[int]:
    """Segment-local position bucket (0..3) for each token.

    The position counter resets to zero after every segment break token, so
    reordering whole segments (e.g. "a: 1, b: 2" vs "b: 2, a: 1") leaves each
    token's bucket unchanged.
    """
    buckets = []
    pos = 0
    for tok in tokens:
        buckets.append(pos % POSITION_BUCKETS)
        if tok in SEGMENT_BREAKS:
            pos = 0
        else:
            pos += 1
    return buckets


def token_slot(token: str, bucket: int, dim: int) -> tuple[int, int]:
    """Map a (token, position bucket) pair to (index, sign) for a dim-vector.

    The bucket is mixed in as the hash seed, so the same token lands in
    different slots depending on where it sits within its segment. Sign
    comes from the hash's top bit: set -> -1.
    """
    h = fnv1a64(token.encode("utf-8"), seed=bucket)
    index = h % dim
    sign = -1 if (h >> 63) & 1 else 1
    return index, sign


def derive_seed(master_seed: int, label: str) -> int:
    """Derive a per-stage RNG seed from a master seed and a stage label.

    Distinct labels give independent streams; the result is masked to 63
    bits so it is always a valid non-negative seed.
    """
    return fnv1a64(label.encode("utf-8"), seed=master_seed) & 0x7FFFFFFFFFFFFFFF
