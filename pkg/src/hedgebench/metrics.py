"""Calibration metrics: accuracy, ECE over equal-width bins with abstentions
excluded, AUROC with abstentions scored as confidence 0, and grouped report
construction.
"""

from __future__ import annotations

import dataclasses
import json
from bisect import bisect_left
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import InputError, MetricUndefinedError


@dataclass(frozen=True)
class ScoredOutcome:
    """One graded answer: its stated confidence, whether the grade was
    CORRECT, and whether the model abstained (grade NOT_ATTEMPTED)."""

    confidence: float
    correct: bool
    abstained: bool = False

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class BinStatistics:
    bin_count: int
    counts: list[int]
    accuracies: list[float]  # 0.0 placeholder for empty bins
    confidences: list[float]

    @property
    def edges(self) -> list[float]:
        return [m / self.bin_count for m in range(self.bin_count + 1)]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _bin_index(confidence: float, bin_count: int) -> int:
    # bin m covers ((m-1)/M, m/M]; 0 falls into bin 1. bisect_left over the
    # upper edges applies exactly that comparison, float-for-float.
    edges = [m / bin_count for m in range(1, bin_count)]
    return bisect_left(edges, confidence)


def compute_ece(
    outcomes: Sequence[ScoredOutcome], bin_count: int = 10
) -> tuple[float, BinStatistics]:
    """Bin-weighted mean |accuracy - mean confidence|, abstentions excluded."""
    kept = [o for o in outcomes if not o.abstained]
    if not kept:
        raise MetricUndefinedError("every outcome abstained; ECE undefined")
    if bin_count < 1:
        raise InputError("bin_count must be >= 1")
    counts = [0] * bin_count
    hits = [0] * bin_count
    conf_sums = [0.0] * bin_count
    for o in kept:
        b = _bin_index(o.confidence, bin_count)
        counts[b] += 1
        hits[b] += int(o.correct)
        conf_sums[b] += o.confidence
    n = len(kept)
    ece = 0.0
    accs, confs = [], []
    for c, h, s in zip(counts, hits, conf_sums):
        if c == 0:
            accs.append(0.0)
            confs.append(0.0)
            continue
        acc = h / c
        conf = s / c
        accs.append(acc)
        confs.append(conf)
        ece += (c / n) * abs(acc - conf)
    return ece, BinStatistics(bin_count, counts, accs, confs)


def compute_auroc(outcomes: Sequence[ScoredOutcome]) -> float:
    """Rank-based Mann-Whitney AUROC with half credit for ties.

    Abstained outcomes participate at confidence 0 and count as not correct.
    """
    if not outcomes:
        raise MetricUndefinedError("no outcomes")
    conf = np.array(
        [0.0 if o.abstained else o.confidence for o in outcomes], dtype=float
    )
    pos = np.array([o.correct and not o.abstained for o in outcomes], dtype=bool)
    n_pos = int(pos.sum())
    n_neg = len(outcomes) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError(
            f"need both classes, got {n_pos} correct / {n_neg} incorrect"
        )
    ranks = rankdata(conf)  # average ranks implement the tie half-credit
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def compute_accuracy(outcomes: Sequence[ScoredOutcome]) -> float:
    """Fraction of outcomes graded CORRECT; abstentions are not correct."""
    if not outcomes:
        raise InputError("no outcomes")
    return sum(1 for o in outcomes if o.correct and not o.abstained) / len(outcomes)


@dataclass
class ReportRow:
    model_id: str
    dataset: str
    method: str
    n: int
    accuracy: float
    abstention_rate: float
    ece: float | None
    auroc: float | None
    undefined: dict[str, str] = field(default_factory=dict)
    bins: BinStatistics | None = None

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if self.bins is not None:
            d["bins"] = self.bins.as_dict()
        return d


@dataclass
class EvalReport:
    rows: list[ReportRow]
    bin_count: int = 10

    def as_dict(self) -> dict:
        return {
            "bin_count": self.bin_count,
            "rows": [r.as_dict() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def render_table(self) -> str:
        header = f"{'model':28} {'dataset':10} {'method':10} {'n':>6} {'acc':>7} {'ece':>7} {'auroc':>7} {'abst':>6}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            ece = f"{r.ece:.4f}" if r.ece is not None else "--"
            auroc = f"{r.auroc:.4f}" if r.auroc is not None else "--"
            lines.append(
                f"{r.model_id:28} {r.dataset:10} {r.method:10} {r.n:>6} "
                f"{r.accuracy:>7.4f} {ece:>7} {auroc:>7} {r.abstention_rate:>6.3f}"
            )
        return "\n".join(lines)


def outcome_from_record(record) -> ScoredOutcome:
    """Project a graded answer record onto the metric input type."""
    abstained = bool(record.abstained or record.grade == "NOT_ATTEMPTED")
    return ScoredOutcome(
        confidence=record.confidence,
        correct=(record.grade == "CORRECT") and not abstained,
        abstained=abstained,
    )


def build_report(records: Iterable, bin_count: int = 10) -> EvalReport:
    """Group graded records by (model, dataset, method) and compute metrics.

    Records missing a grade are rejected: reporting is only meaningful after
    grading. Undefined metrics are reported as None with a reason instead of
    failing the whole report.
    """
    groups: dict[tuple[str, str, str], list] = {}
    for rec in records:
        if rec.grade is None:
            raise InputError(f"record {rec.question_id!r} has no grade")
        key = (rec.model_id, rec.dataset, rec.method)
        groups.setdefault(key, []).append(rec)
    rows = []
    for (model_id, dataset, method), recs in sorted(groups.items()):
        outcomes = [outcome_from_record(r) for r in recs]
        abst = sum(1 for o in outcomes if o.abstained) / len(outcomes)
        undefined: dict[str, str] = {}
        try:
            ece, bins = compute_ece(outcomes, bin_count)
        except MetricUndefinedError as exc:
            ece, bins = None, None
            undefined["ece"] = str(exc)
        try:
            auroc = compute_auroc(outcomes)
        except MetricUndefinedError as exc:
            auroc = None
            undefined["auroc"] = str(exc)
        rows.append(
            ReportRow(
                model_id=model_id,
                dataset=dataset,
                method=method,
                n=len(recs),
                accuracy=compute_accuracy(outcomes),
                abstention_rate=abst,
                ece=ece,
                auroc=auroc,
                undefined=undefined,
                bins=bins,
            )
        )
    return EvalReport(rows=rows, bin_count=bin_count)
