"""Independent FEDEMB v1 reader/writer.

Implements the published byte layout directly (little-endian: magic
``FEDM``, u32 version=1, u32 dim, u64 count, u16-length-prefixed UTF-8
encoder id, then per record a u16-length-prefixed UTF-8 record id followed
by ``dim`` float32 values). Deliberately shares no code with the consumer
package so format drift on either side shows up as a test failure, not a
silent agreement.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from embed_sidecar.errors import MissingFile, StoreFormatError, WriteError

MAGIC = b"FEDM"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_U16 = struct.Struct("<H")


def _encode_str(value: str, what: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise WriteError(f"{what} too long to encode: {len(raw)} bytes > 65535")
    return _U16.pack(len(raw)) + raw


def write_store(
    path: str | Path,
    encoder_id: str,
    dim: int,
    records: Sequence[tuple[str, np.ndarray]],
) -> None:
    """Write a complete store atomically (temp file + rename).

    Records are written in the order given. Rejects non-finite values,
    wrong-width vectors, and duplicate record ids.
    """
    if dim <= 0:
        raise WriteError(f"dim must be positive, got {dim}")
    if not encoder_id:
        raise WriteError("encoder_id must be non-empty")
    target = Path(path)
    seen: set[str] = set()
    chunks: list[bytes] = [_HEADER.pack(MAGIC, VERSION, dim, len(records)), _encode_str(encoder_id, "encoder_id")]
    for record_id, vector in records:
        if record_id in seen:
            raise WriteError(f"duplicate record_id {record_id!r}")
        seen.add(record_id)
        arr = np.asarray(vector, dtype=np.float32)
        if arr.shape != (dim,):
            raise WriteError(f"record {record_id!r}: expected shape ({dim},), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise WriteError(f"record {record_id!r}: vector contains non-finite values")
        chunks.append(_encode_str(record_id, "record_id"))
        chunks.append(arr.astype("<f4").tobytes())
    tmp = target.with_name(target.name + ".tmp")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tmp.open("wb") as fh:
            fh.write(b"".join(chunks))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, target)
    except OSError as exc:
        raise WriteError(f"could not write store {target}: {exc}") from exc
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


class _Cursor:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise StoreFormatError(f"truncated store: ran out of bytes reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def take_str(self, what: str) -> str:
        (length,) = _U16.unpack(self.take(_U16.size, f"{what} length"))
        raw = self.take(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StoreFormatError(f"{what} is not valid UTF-8") from exc


def read_store(path: str | Path) -> tuple[str, int, list[tuple[str, np.ndarray]]]:
    """Read a store, enforcing every format constraint.

    Returns ``(encoder_id, dim, records)`` with records in file order.
    Unlike the writer, the reader tolerates non-finite vector values: a
    verifier must be able to load a damaged store to report on it.
    """
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"store file not found: {p}")
    cur = _Cursor(p.read_bytes())
    magic, version, dim, count = _HEADER.unpack(cur.take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise StoreFormatError(f"unsupported version {version}, expected {VERSION}")
    if dim <= 0:
        raise StoreFormatError(f"dim must be positive, got {dim}")
    encoder_id = cur.take_str("encoder_id")
    records: list[tuple[str, np.ndarray]] = []
    seen: set[str] = set()
    for i in range(count):
        record_id = cur.take_str(f"record_id #{i}")
        if record_id in seen:
            raise StoreFormatError(f"duplicate record_id {record_id!r}")
        seen.add(record_id)
        raw = cur.take(4 * dim, f"vector for {record_id!r}")
        records.append((record_id, np.frombuffer(raw, dtype="<f4").copy()))
    if cur.pos != len(cur.data):
        raise StoreFormatError(f"{len(cur.data) - cur.pos} trailing bytes after last entry")
    return encoder_id, dim, records
