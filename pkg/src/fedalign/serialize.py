"""Record-to-text serialization in three formats, plus the corpus file.

Formats:
  structured  "name: v, name: v"
  compact     "name=v; name=v"
  natural     one template sentence per feature, joined by single spaces

Features are always emitted in sorted order of their (renamed) labels, so
the text is independent of schema column order. The label is never part of
the text. structured/compact are exactly invertible; natural is one-way.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRecord, MissingFile, ParseError, UnserializableValue

STRUCTURED = "structured"
NATURAL = "natural"
COMPACT = "compact"
FORMATS = (STRUCTURED, NATURAL, COMPACT)

DEFAULT_TEMPLATE = "The {name} is {value}."


@dataclass(frozen=True)
class TextSequence:
    record_id: str
    client_id: int
    format: str
    text: str
    label: int


def render_value(value) -> str:
    """Render one cell: shortest decimal for reals (trailing zeros trimmed,
    integral values without a decimal point), strings verbatim."""
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v) or math.isinf(v):
        raise UnserializableValue(f"non-finite numeric value {value!r}")
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return np.format_float_positional(v, unique=True, trim="-")


def _sorted_items(record: dict, schema) -> list[tuple[str, str]]:
    if not schema:
        raise EmptyRecord("record has no features to serialize")
    items = []
    for col in sorted(schema, key=lambda c: c.name):
        items.append((col.name, render_value(record[col.name])))
    return items


def serialize_structured(
    record: dict, schema, *, record_id: str = "r0", client_id: int = 0, label: int = 0
) -> TextSequence:
    text = ", ".join(f"{k}: {v}" for k, v in _sorted_items(record, schema))
    return TextSequence(record_id, client_id, STRUCTURED, text, int(label))


def serialize_compact(
    record: dict, schema, *, record_id: str = "r0", client_id: int = 0, label: int = 0
) -> TextSequence:
    text = "; ".join(f"{k}={v}" for k, v in _sorted_items(record, schema))
    return TextSequence(record_id, client_id, COMPACT, text, int(label))


def serialize_natural(
    record: dict,
    schema,
    templates: dict[str, str] | None = None,
    canonical_of: dict[str, str] | None = None,
    *,
    record_id: str = "r0",
    client_id: int = 0,
    label: int = 0,
) -> TextSequence:
    """Template sentences in sorted renamed-name order.

    Templates are keyed by canonical feature name; canonical_of translates a
    client's renamed labels (identity when omitted). Features without a
    template fall back to "The <name> is <value>."
    """
    templates = templates or {}
    canonical_of = canonical_of or {}
    sentences = []
    for name, rendered in _sorted_items(record, schema):
        canonical = canonical_of.get(name, name)
        tpl = templates.get(canonical)
        if tpl is None:
            sentences.append(DEFAULT_TEMPLATE.format(name=name, value=rendered))
        else:
            sentences.append(tpl.replace("{}", rendered, 1))
    return TextSequence(record_id, client_id, NATURAL, " ".join(sentences), int(label))


def serialize_record(record, schema, fmt, templates=None, canonical_of=None, **kw) -> TextSequence:
    if fmt == STRUCTURED:
        return serialize_structured(record, schema, **kw)
    if fmt == COMPACT:
        return serialize_compact(record, schema, **kw)
    if fmt == NATURAL:
        return serialize_natural(record, schema, templates, canonical_of, **kw)
    raise ValueError(f"unknown serialization format {fmt!r}")


# --------------------------------------------------------------------------
# parsers (exact inverses of structured/compact on the rendered map)


def _parse_pairs(text: str, pair_sep: str, kv_sep: str) -> dict[str, str]:
    out: dict[str, str] = {}
    offset = 0
    if text == "":
        raise ParseError("empty text", 0)
    for segment in text.split(pair_sep):
        if kv_sep not in segment:
            raise ParseError(f"segment {segment!r} lacks {kv_sep!r}", offset)
        name, value = segment.split(kv_sep, 1)
        if not name or name != name.strip() or value != value.strip():
            raise ParseError(f"malformed segment {segment!r}", offset)
        if name in out:
            raise ParseError(f"duplicate feature {name!r}", offset)
        out[name] = value
        offset += len(segment) + len(pair_sep)
    return out


def parse_structured(text: str) -> dict[str, str]:
    return _parse_pairs(text, ", ", ": ")


def parse_compact(text: str) -> dict[str, str]:
    return _parse_pairs(text, "; ", "=")


# --------------------------------------------------------------------------
# natural-language templates


def load_templates(path: str) -> dict[str, str]:
    if not os.path.exists(path):
        raise MissingFile(f"template table not found: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return validate_templates(raw)


def validate_templates(raw: dict) -> dict[str, str]:
    out = {}
    for name, tpl in raw.items():
        tpl = str(tpl)
        if tpl.count("{}") != 1:
            raise ValueError(
                f"template for {name!r} must contain exactly one '{{}}' placeholder"
            )
        out[str(name)] = tpl
    return out


def default_templates() -> dict[str, str]:
    from importlib.resources import files

    text = files("fedalign.data").joinpath("templates.json").read_text(encoding="utf-8")
    return validate_templates(json.loads(text))


# --------------------------------------------------------------------------
# corpus file: one JSON object per line, keys sorted, UTF-8


def corpus_line(seq: TextSequence) -> str:
    return json.dumps(
        {
            "record_id": seq.record_id,
            "client_id": seq.client_id,
            "format": seq.format,
            "text": seq.text,
            "label": seq.label,
        },
        sort_keys=True,
        ensure_ascii=False,
    )


def write_corpus(path: str, sequences) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seq in sequences:
            fh.write(corpus_line(seq) + "\n")
            n += 1
    return n


def read_corpus(path: str) -> list[TextSequence]:
    if not os.path.exists(path):
        raise MissingFile(f"corpus not found: {path}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(
                    TextSequence(
                        record_id=str(obj["record_id"]),
                        client_id=int(obj["client_id"]),
                        format=str(obj["format"]),
                        text=str(obj["text"]),
                        label=int(obj["label"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ParseError(f"corpus line {i}: {exc}", i) from None
    return out
