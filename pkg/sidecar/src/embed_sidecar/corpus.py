"""Reader for the serialized-record corpus format (JSONL).

One JSON object per line with exactly the keys ``record_id`` (str),
``client_id`` (int), ``format`` (str), ``text`` (str), ``label`` (int 0/1).
Blank lines are skipped; anything else non-conforming raises
:class:`CorpusParseError` with the 1-based line number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from embed_sidecar.errors import CorpusParseError, MissingFile

REQUIRED_KEYS = frozenset({"record_id", "client_id", "format", "text", "label"})
FORMATS = frozenset({"structured", "natural", "compact"})


@dataclass(frozen=True)
class CorpusLine:
    """One serialized record as read from the corpus file."""

    record_id: str
    client_id: int
    format: str
    text: str
    label: int


def _require_str(obj: dict, key: str, lineno: int) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise CorpusParseError(lineno, f"{key} must be a string, got {type(value).__name__}")
    return value


def _require_int(obj: dict, key: str, lineno: int) -> int:
    value = obj[key]
    # bool is a subclass of int but `true` is not a valid client id or label.
    if isinstance(value, bool) or not isinstance(value, int):
        raise CorpusParseError(lineno, f"{key} must be an integer, got {type(value).__name__}")
    return value


def parse_corpus_line(raw: str, lineno: int) -> CorpusLine:
    """Parse one non-blank corpus line, validating every field."""
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusParseError(lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise CorpusParseError(lineno, f"expected a JSON object, got {type(obj).__name__}")
    keys = set(obj)
    if keys != REQUIRED_KEYS:
        missing = sorted(REQUIRED_KEYS - keys)
        extra = sorted(keys - REQUIRED_KEYS)
        parts = []
        if missing:
            parts.append(f"missing keys: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected keys: {', '.join(extra)}")
        raise CorpusParseError(lineno, "; ".join(parts))
    record_id = _require_str(obj, "record_id", lineno)
    fmt = _require_str(obj, "format", lineno)
    text = _require_str(obj, "text", lineno)
    client_id = _require_int(obj, "client_id", lineno)
    label = _require_int(obj, "label", lineno)
    if not record_id:
        raise CorpusParseError(lineno, "record_id must be non-empty")
    if fmt not in FORMATS:
        raise CorpusParseError(lineno, f"format must be one of {sorted(FORMATS)}, got {fmt!r}")
    if label not in (0, 1):
        raise CorpusParseError(lineno, f"label must be 0 or 1, got {label}")
    return CorpusLine(record_id=record_id, client_id=client_id, format=fmt, text=text, label=label)


def read_corpus(path: str | Path) -> list[CorpusLine]:
    """Read a corpus file, preserving record order.

    Duplicate record ids are rejected here rather than at store-write time
    so the error points at the offending line.
    """
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"corpus file not found: {p}")
    lines: list[CorpusLine] = []
    seen: dict[str, int] = {}
    with p.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            line = parse_corpus_line(raw, lineno)
            if line.record_id in seen:
                raise CorpusParseError(
                    lineno,
                    f"duplicate record_id {line.record_id!r} (first seen on line {seen[line.record_id]})",
                )
            seen[line.record_id] = lineno
            lines.append(line)
    return lines
