"""Evaluation: F1/confusion counts, multi-seed aggregation, paired t-tests,
and the schema-overlap stress sweep.

F1 uses the 2tp/(2tp+fp+fn) form and returns 0.0 when that denominator is
zero (no positives anywhere); std is the sample (n-1) flavor with the n=1
case pinned to 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .stats import paired_t_test, sample_mean_std  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> Confusion:
    tp = fp = tn = fn = 0
    for t, p in zip(y_true, y_pred, strict=True):
        t, p = int(t), int(p)
        if p == 1:
            if t == 1:
                tp += 1
            else:
                fp += 1
        else:
            if t == 1:
                fn += 1
            else:
                tn += 1
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def f1(conf: Confusion) -> float:
    denom = 2 * conf.tp + conf.fp + conf.fn
    if denom == 0:
        return 0.0
    return 2.0 * conf.tp / denom


@dataclass
class RunSummary:
    f1s: list[float]
    mean: float
    std: float
    min: float
    max: float
    per_client: dict[int, list[float]] = field(default_factory=dict)

    @classmethod
    def from_scores(
        cls, f1s: list[float], per_client: dict[int, list[float]] | None = None
    ) -> "RunSummary":
        mean, std = sample_mean_std(f1s)
        return cls(
            f1s=list(f1s),
            mean=mean,
            std=std,
            min=min(f1s),
            max=max(f1s),
            per_client=per_client or {},
        )

    def per_client_mean(self) -> dict[int, float]:
        return {cid: sample_mean_std(scores)[0] for cid, scores in self.per_client.items()}


def multi_seed(run_fn: Callable[[int], tuple[float, dict[int, float]]], seeds) -> RunSummary:
    """Run `run_fn(seed) -> (global_f1, per_client_f1)` per seed and pool."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    f1s = []
    per_client: dict[int, list[float]] = {}
    for seed in seeds:
        score, by_client = run_fn(seed)
        f1s.append(float(score))
        for cid, val in by_client.items():
            per_client.setdefault(int(cid), []).append(float(val))
    return RunSummary.from_scores(f1s, per_client)


DEFAULT_OVERLAPS = (0.8, 0.6, 0.4, 0.2)


@dataclass
class StressReport:
    overlaps: list[float]  # sorted descending
    variants: list[str]
    cells: dict[tuple[float, str], RunSummary]

    def summary(self, overlap: float, variant: str) -> RunSummary:
        return self.cells[(overlap, variant)]


def stress_sweep(
    run_fn: Callable[[float, str, int], tuple[float, dict[int, float]]],
    overlaps=DEFAULT_OVERLAPS,
    variants=("aligned", "raw"),
    seeds=(1, 2, 3, 4, 5),
) -> StressReport:
    """Evaluate every overlap x variant cell with multi_seed."""
    overlaps = sorted({float(o) for o in overlaps}, reverse=True)
    for o in overlaps:
        if not (0.0 < o <= 1.0):
            raise ValueError(f"overlap {o} outside (0, 1]")
    cells = {}
    for overlap in overlaps:
        for variant in variants:
            cells[(overlap, variant)] = multi_seed(
                lambda seed, o=overlap, v=variant: run_fn(o, v, seed), seeds
            )
    return StressReport(overlaps=list(overlaps), variants=list(variants), cells=cells)


# --------------------------------------------------------------------------
# table emitters


def summary_csv(summaries: dict[str, RunSummary]) -> str:
    lines = ["name,mean_f1,std_f1,min_f1,max_f1,seeds"]
    for name in sorted(summaries):
        s = summaries[name]
        lines.append(f"{name},{s.mean!r},{s.std!r},{s.min!r},{s.max!r},{len(s.f1s)}")
    return "\n".join(lines) + "\n"


def stability_csv(summary: RunSummary) -> str:
    """Per-client mean/std/min/max across seeds."""
    lines = ["client_id,mean_f1,std_f1,min_f1,max_f1"]
    for cid in sorted(summary.per_client):
        scores = summary.per_client[cid]
        mean, std = sample_mean_std(scores)
        lines.append(f"{cid},{mean!r},{std!r},{min(scores)!r},{max(scores)!r}")
    return "\n".join(lines) + "\n"


def stress_csv(report: StressReport) -> str:
    lines = ["overlap,variant,mean_f1,std_f1,min_f1,max_f1"]
    for overlap in report.overlaps:
        for variant in report.variants:
            s = report.cells[(overlap, variant)]
            lines.append(
                f"{overlap!r},{variant},{s.mean!r},{s.std!r},{s.min!r},{s.max!r}"
            )
    return "\n".join(lines) + "\n"
