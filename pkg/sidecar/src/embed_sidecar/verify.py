"""Post-hoc store verification against the corpus it claims to cover."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from embed_sidecar.corpus import read_corpus
from embed_sidecar.fedemb import read_store


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of checking a store against a corpus.

    ``ok`` is true iff every corpus record has a vector and every vector is
    finite. Extra store records (beyond the corpus) are reported but are
    not an error: a store may legitimately cover a superset.
    """

    store_path: str
    encoder_id: str
    dim: int
    store_records: int
    corpus_records: int
    missing_ids: tuple[str, ...] = field(default_factory=tuple)
    nonfinite_ids: tuple[str, ...] = field(default_factory=tuple)
    extra_records: int = 0

    @property
    def ok(self) -> bool:
        return not self.missing_ids and not self.nonfinite_ids

    def lines(self) -> list[str]:
        out = [
            f"store: {self.store_path}",
            f"encoder_id: {self.encoder_id}",
            f"dim: {self.dim}",
            f"records: {self.store_records} in store, {self.corpus_records} in corpus",
        ]
        if self.extra_records:
            out.append(f"note: store has {self.extra_records} record(s) not in the corpus")
        if self.missing_ids:
            out.append(f"MISSING: {len(self.missing_ids)} corpus record(s) have no vector:")
            out.extend(f"  {record_id}" for record_id in self.missing_ids)
        if self.nonfinite_ids:
            out.append(f"NON-FINITE: {len(self.nonfinite_ids)} vector(s) contain NaN or infinity:")
            out.extend(f"  {record_id}" for record_id in self.nonfinite_ids)
        out.append("result: ok" if self.ok else "result: FAILED")
        return out


def verify_store(store_path: str | Path, corpus_path: str | Path) -> VerifyReport:
    """Check id coverage, report the dim, and flag non-finite vectors."""
    encoder_id, dim, records = read_store(store_path)
    corpus = read_corpus(corpus_path)
    store_ids = {record_id for record_id, _ in records}
    corpus_ids = [line.record_id for line in corpus]
    missing = tuple(record_id for record_id in corpus_ids if record_id not in store_ids)
    nonfinite = tuple(record_id for record_id, vec in records if not bool(np.all(np.isfinite(vec))))
    extra = len(store_ids - set(corpus_ids))
    return VerifyReport(
        store_path=str(store_path),
        encoder_id=encoder_id,
        dim=dim,
        store_records=len(records),
        corpus_records=len(corpus),
        missing_ids=missing,
        nonfinite_ids=nonfinite,
        extra_records=extra,
    )
