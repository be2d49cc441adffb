"""FEDEMB binary embedding store: reader, writer, and in-memory form.

Layout (all integers little-endian):

    magic   4 bytes  "FEDM"
    version u32      = 1
    dim     u32
    count   u64
    encoder_id : u16 length + UTF-8 bytes
    count entries of:
        record_id : u16 length + UTF-8 bytes
        dim x f32 vector

Vectors round-trip bit-exactly; the file is the interchange point between
this package and external embedding producers.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateRecordId,
    MissingFile,
    TruncatedFile,
    VersionUnsupported,
)

MAGIC = b"FEDM"
VERSION = 1

_HEAD = struct.Struct("<4sIIQ")  # magic, version, dim, count
_U16 = struct.Struct("<H")


@dataclass
class EmbeddingStore:
    dim: int
    encoder_id: str
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, record_id: str, values: np.ndarray) -> None:
        if record_id in self.vectors:
            raise DuplicateRecordId(f"record id {record_id!r} already present")
        arr = np.asarray(values, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise DimensionMismatch(
                f"vector for {record_id!r} has shape {arr.shape}, expected ({self.dim},)"
            )
        self.vectors[record_id] = arr

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self.vectors


def file_size(dim: int, encoder_id: str, record_ids) -> int:
    """Exact byte size a store will occupy on disk."""
    size = _HEAD.size + _U16.size + len(encoder_id.encode("utf-8"))
    for rid in record_ids:
        size += _U16.size + len(rid.encode("utf-8")) + dim * 4
    return size


def write_store(path: str, store: EmbeddingStore) -> None:
    for rid, vec in store.vectors.items():
        if not np.all(np.isfinite(vec)):
            raise DimensionMismatch(f"vector for {rid!r} contains non-finite entries")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, store.dim, len(store.vectors)))
        ident = store.encoder_id.encode("utf-8")
        fh.write(_U16.pack(len(ident)))
        fh.write(ident)
        for rid, vec in store.vectors.items():
            rb = rid.encode("utf-8")
            fh.write(_U16.pack(len(rb)))
            fh.write(rb)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())
    os.replace(tmp, path)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFile(f"unexpected end of file while reading {what}")
    return data


def read_store(path: str) -> EmbeddingStore:
    if not os.path.exists(path):
        raise MissingFile(f"no such store: {path}")
    with open(path, "rb") as fh:
        head = _read_exact(fh, _HEAD.size, "header")
        magic, version, dim, count = _HEAD.unpack(head)
        if magic != MAGIC:
            raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise VersionUnsupported(f"version {version} unsupported (expected {VERSION})")
        (id_len,) = _U16.unpack(_read_exact(fh, _U16.size, "encoder id length"))
        encoder_id = _read_exact(fh, id_len, "encoder id").decode("utf-8")
        store = EmbeddingStore(dim=dim, encoder_id=encoder_id)
        for i in range(count):
            (rid_len,) = _U16.unpack(_read_exact(fh, _U16.size, f"record {i} id length"))
            rid = _read_exact(fh, rid_len, f"record {i} id").decode("utf-8")
            payload = _read_exact(fh, dim * 4, f"record {rid!r} vector")
            vec = np.frombuffer(payload, dtype="<f4").copy()
            if rid in store.vectors:
                raise DuplicateRecordId(f"record id {rid!r} appears twice")
            store.vectors[rid] = vec
        trailing = fh.read(1)
        if trailing:
            raise TruncatedFile("trailing bytes after last declared record")
    return store
