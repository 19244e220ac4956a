"""Hedged-expression corpus construction and crowd-annotation distillation.

Five stages: generate level-tagged expressions with LLMs, screen survey
workers against expert-annotated validation items, identify responsible
workers via refusal items, derive per-level score bounds from their
annotations, then aggregate surviving scores into benchmark entries.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import statistics
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .datasets import QAItem
from .errors import GenerationParseError, HedgebenchError, InputError
from .gateway import CompletionRequest, Gateway
from .levels import LEVELS_ASCENDING, ConfidenceLevel
from .prompts import render_generate_expressions

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UncertainExpression:
    id: str
    text: str
    level_hint: ConfidenceLevel
    question_id: str
    source_model: str
    is_refusal: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise InputError(f"expression {self.id} has empty text")

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "level_hint": self.level_hint.value,
            "question_id": self.question_id,
            "source_model": self.source_model,
            "is_refusal": self.is_refusal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UncertainExpression":
        return cls(
            id=d["id"],
            text=d["text"],
            level_hint=ConfidenceLevel(d["level_hint"]),
            question_id=d["question_id"],
            source_model=d["source_model"],
            is_refusal=bool(d["is_refusal"]),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    expression_id: str
    worker_id: str
    survey_id: str
    score: int

    def __post_init__(self):
        if not 0 <= self.score <= 100:
            raise InputError(
                f"score {self.score} for {self.expression_id} outside [0, 100]"
            )


@dataclass(frozen=True)
class ValidationItem:
    expression_id: str
    expert_mean: float
    expert_std: float


@dataclass
class Survey:
    survey_id: str
    worker_id: str
    real_item_ids: list[str]
    validation_items: list[ValidationItem]

    def __post_init__(self):
        if len(self.real_item_ids) != 100:
            raise InputError(
                f"survey {self.survey_id}: {len(self.real_item_ids)} real items, need 100"
            )
        if len(self.validation_items) != 5:
            raise InputError(
                f"survey {self.survey_id}: {len(self.validation_items)} validation items, need 5"
            )

    @property
    def size(self) -> int:
        return len(self.real_item_ids) + len(self.validation_items)


@dataclass(frozen=True)
class LevelBounds:
    level: ConfidenceLevel
    mean: float
    std: float

    @property
    def lower(self) -> float:
        return self.mean - self.std

    @property
    def upper(self) -> float:
        return self.mean + self.std

    def contains(self, score: float) -> bool:
        return self.lower <= score <= self.upper


@dataclass(frozen=True)
class BenchmarkEntry:
    expression_id: str
    text: str
    level_hint: ConfidenceLevel
    valid_scores: tuple[int, ...]
    mean_score: float

    def as_dict(self) -> dict:
        return {
            "expression_id": self.expression_id,
            "text": self.text,
            "level_hint": self.level_hint.value,
            "valid_scores": list(self.valid_scores),
            "mean_score": self.mean_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkEntry":
        return cls(
            expression_id=d["expression_id"],
            text=d["text"],
            level_hint=ConfidenceLevel(d["level_hint"]),
            valid_scores=tuple(d["valid_scores"]),
            mean_score=float(d["mean_score"]),
        )


# --- Stage 1: generation ---------------------------------------------------

_HEADER_RE = re.compile(
    r"^\s*\*{0,2}\s*(high|moderate|low(?!est)|lowest|complete)[^:]*:\s*\*{0,2}\s*$",
    re.IGNORECASE,
)
_ITEM_RE = re.compile(r"^\s*(\d+)[.)]\s+(.*\S)\s*$")

_HEADER_LEVEL = {
    "high": ConfidenceLevel.HIGH,
    "moderate": ConfidenceLevel.MODERATE,
    "low": ConfidenceLevel.LOW,
    "lowest": ConfidenceLevel.LOWEST,
    "complete": ConfidenceLevel.COMPLETELY_UNCERTAIN,
}

# generation prompt asks for levels strongest first
_GENERATION_ORDER = tuple(reversed(LEVELS_ASCENDING))


def parse_expression_response(text: str, per_level: int = 10) -> dict[ConfidenceLevel, list[str]]:
    """Parse a numbered five-level expression listing.

    Accepts the headed format (one section per level, strongest first) or a
    bare continuous numbered list of exactly 5 * per_level items, assigned to
    levels in generation order. Anything else raises with the raw text kept.
    """
    by_level: dict[ConfidenceLevel, list[str]] = {lv: [] for lv in LEVELS_ASCENDING}
    orphans: list[str] = []
    saw_header = False
    current: ConfidenceLevel | None = None
    for line in text.splitlines():
        header = _HEADER_RE.match(line)
        if header:
            saw_header = True
            current = _HEADER_LEVEL[header.group(1).lower()]
            continue
        item = _ITEM_RE.match(line)
        if item:
            sentence = item.group(2).strip()
            if current is None:
                orphans.append(sentence)
            else:
                by_level[current].append(sentence)
    if saw_header and not orphans:
        bad = {lv.value: len(xs) for lv, xs in by_level.items() if len(xs) != per_level}
        if bad:
            raise GenerationParseError(
                f"headed listing has wrong per-level counts {bad}, want {per_level}",
                raw_text=text,
            )
        return by_level
    if not saw_header and len(orphans) == 5 * per_level:
        return {
            level: orphans[i * per_level : (i + 1) * per_level]
            for i, level in enumerate(_GENERATION_ORDER)
        }
    raise GenerationParseError(
        f"cannot split response into 5 levels x {per_level} items "
        f"(headers={saw_header}, orphans={len(orphans)})",
        raw_text=text,
    )


@dataclass
class CorpusResult:
    expressions: list[UncertainExpression]
    skipped: list[dict] = field(default_factory=list)  # question/model/reason

    def __len__(self) -> int:
        return len(self.expressions)


def generate_expression_corpus(
    questions: Sequence[QAItem],
    gateway: Gateway,
    generators: Sequence[str],
    per_level: int = 10,
    temperature: float = 1.0,
) -> CorpusResult:
    """Ask each generator model for 5 x per_level hedged restatements of each
    question's gold answer. Failed question/generator pairs are skipped and
    logged, never silently dropped."""
    result = CorpusResult(expressions=[])
    for item in questions:
        prompt = render_generate_expressions(
            item.question, item.gold_targets[0], per_level=per_level
        )
        for model_id in generators:
            try:
                completion = gateway.complete(
                    CompletionRequest(
                        model_id=model_id, prompt=prompt, temperature=temperature
                    )
                )
                parsed = parse_expression_response(completion.text, per_level=per_level)
            except HedgebenchError as exc:
                log.warning(
                    "skipping question %s on %s: %s", item.question_id, model_id, exc
                )
                result.skipped.append(
                    {
                        "question_id": item.question_id,
                        "model_id": model_id,
                        "error_class": exc.error_class,
                        "reason": str(exc),
                    }
                )
                continue
            for level, sentences in parsed.items():
                for i, sentence in enumerate(sentences, start=1):
                    result.expressions.append(
                        UncertainExpression(
                            id=f"{item.question_id}/{model_id}/{level.value}/{i}",
                            text=sentence,
                            level_hint=level,
                            question_id=item.question_id,
                            source_model=model_id,
                            is_refusal=level is ConfidenceLevel.COMPLETELY_UNCERTAIN,
                        )
                    )
    return result


# --- Stage 2: validation-item screening -------------------------------------

@dataclass
class ScreeningResult:
    accepted_workers: set[str]
    rejected_workers: set[str]
    accepted_survey_ids: set[str]
    rejected_survey_ids: set[str]
    flagged_survey_ids: set[str]

    @property
    def acceptance_rate(self) -> float:
        total = len(self.accepted_survey_ids) + len(self.rejected_survey_ids)
        return len(self.accepted_survey_ids) / total if total else 0.0


def screen_survey_workers(
    surveys: Sequence[Survey], annotations: Sequence[AnnotationRecord]
) -> ScreeningResult:
    """Reject a survey iff >= 3 of its 5 validation scores fall outside the
    expert mean +/- 2 sigma band. Rejection is per-survey and all-or-nothing;
    surveys with missing validation scores are rejected conservatively and
    flagged."""
    scores: dict[tuple[str, str, str], int] = {}
    for a in annotations:
        scores[(a.survey_id, a.worker_id, a.expression_id)] = a.score
    result = ScreeningResult(set(), set(), set(), set(), set())
    for survey in surveys:
        deviations = 0
        missing = False
        for item in survey.validation_items:
            key = (survey.survey_id, survey.worker_id, item.expression_id)
            if key not in scores:
                missing = True
                break
            score = scores[key]
            lo = item.expert_mean - 2 * item.expert_std
            hi = item.expert_mean + 2 * item.expert_std
            if score < lo or score > hi:
                deviations += 1
        if missing:
            result.rejected_survey_ids.add(survey.survey_id)
            result.flagged_survey_ids.add(survey.survey_id)
            result.rejected_workers.add(survey.worker_id)
        elif deviations >= 3:
            result.rejected_survey_ids.add(survey.survey_id)
            result.rejected_workers.add(survey.worker_id)
        else:
            result.accepted_survey_ids.add(survey.survey_id)
            result.accepted_workers.add(survey.worker_id)
    return result


def apply_screening(
    annotations: Sequence[AnnotationRecord], screening: ScreeningResult
) -> list[AnnotationRecord]:
    """Drop every response belonging to a rejected survey."""
    return [a for a in annotations if a.survey_id in screening.accepted_survey_ids]


# --- Stage 3: responsible workers -------------------------------------------

def identify_responsible_workers(
    annotations: Sequence[AnnotationRecord], refusal_expression_ids: set[str]
) -> set[str]:
    """Workers who scored every refusal expression they saw at exactly 0.

    Workers who saw none are excluded: their compliance is unobserved.
    """
    seen: dict[str, list[int]] = {}
    for a in annotations:
        if a.expression_id in refusal_expression_ids:
            seen.setdefault(a.worker_id, []).append(a.score)
    return {w for w, ss in seen.items() if all(s == 0 for s in ss)}


# --- Stage 4: level bounds and filtering ------------------------------------

def collect_scores_by_level(
    annotations: Sequence[AnnotationRecord],
    expressions_by_id: Mapping[str, UncertainExpression],
    workers: set[str] | None = None,
) -> dict[ConfidenceLevel, list[int]]:
    out: dict[ConfidenceLevel, list[int]] = {lv: [] for lv in LEVELS_ASCENDING}
    for a in annotations:
        expr = expressions_by_id.get(a.expression_id)
        if expr is None:
            continue  # validation items are not corpus expressions
        if workers is not None and a.worker_id not in workers:
            continue
        out[expr.level_hint].append(a.score)
    return out


def compute_level_bounds(
    scores_by_level: Mapping[ConfidenceLevel, Sequence[float]],
) -> dict[ConfidenceLevel, LevelBounds]:
    """Per level: mean and population standard deviation, bounds mean +/- 1 sigma."""
    bounds = {}
    for level in LEVELS_ASCENDING:
        scores = list(scores_by_level.get(level, ()))
        if len(scores) < 2:
            raise InputError(
                f"level {level.value!r} has {len(scores)} responsible annotations, need >= 2"
            )
        bounds[level] = LevelBounds(
            level=level,
            mean=statistics.fmean(scores),
            std=statistics.pstdev(scores),
        )
    return bounds


def filter_annotations(
    annotations: Sequence[AnnotationRecord],
    bounds: Mapping[ConfidenceLevel, LevelBounds],
    expressions_by_id: Mapping[str, UncertainExpression],
) -> list[AnnotationRecord]:
    """Keep annotations inside their level's inclusive 1-sigma band."""
    missing = [lv for lv in LEVELS_ASCENDING if lv not in bounds]
    if missing:
        raise InputError(f"bounds missing for levels {[lv.value for lv in missing]}")
    kept = []
    for a in annotations:
        expr = expressions_by_id.get(a.expression_id)
        if expr is None:
            continue
        if bounds[expr.level_hint].contains(a.score):
            kept.append(a)
    return kept


# --- Stage 5: aggregation ----------------------------------------------------

@dataclass
class AggregationResult:
    entries: list[BenchmarkEntry]
    sub_threshold: list[BenchmarkEntry]  # 1..min_valid-1 scores; mapper training pool
    counts_by_level: dict[ConfidenceLevel, int]

    @property
    def retained_annotations(self) -> int:
        return sum(len(e.valid_scores) for e in self.entries)

    @property
    def sub_threshold_annotations(self) -> int:
        return sum(len(e.valid_scores) for e in self.sub_threshold)


def aggregate_benchmark(
    valid_annotations: Sequence[AnnotationRecord],
    expressions_by_id: Mapping[str, UncertainExpression],
    min_valid: int = 3,
) -> AggregationResult:
    """One benchmark entry per expression holding >= min_valid surviving
    scores; mean_score is their arithmetic mean. Expressions under the
    threshold are emitted separately (they still carry human signal)."""
    grouped: dict[str, list[int]] = {}
    for a in valid_annotations:
        if a.expression_id in expressions_by_id:
            grouped.setdefault(a.expression_id, []).append(a.score)
    entries, sub = [], []
    counts = {lv: 0 for lv in LEVELS_ASCENDING}
    for expr_id in sorted(grouped):
        expr = expressions_by_id[expr_id]
        scores = tuple(grouped[expr_id])
        entry = BenchmarkEntry(
            expression_id=expr_id,
            text=expr.text,
            level_hint=expr.level_hint,
            valid_scores=scores,
            mean_score=statistics.fmean(scores),
        )
        if len(scores) >= min_valid:
            entries.append(entry)
            counts[expr.level_hint] += 1
        else:
            sub.append(entry)
    return AggregationResult(entries=entries, sub_threshold=sub, counts_by_level=counts)


# --- Persistence --------------------------------------------------------------

ANNOTATION_FIELDS = ("expression_id", "worker_id", "survey_id", "score")


def read_annotations_csv(path: str | Path) -> list[AnnotationRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ANNOTATION_FIELDS:
            raise InputError(
                f"{path}: header {reader.fieldnames} != {list(ANNOTATION_FIELDS)}"
            )
        return [
            AnnotationRecord(
                expression_id=row["expression_id"],
                worker_id=row["worker_id"],
                survey_id=row["survey_id"],
                score=int(row["score"]),
            )
            for row in reader
        ]


def write_annotations_csv(path: str | Path, annotations: Iterable[AnnotationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANNOTATION_FIELDS)
        for a in annotations:
            writer.writerow([a.expression_id, a.worker_id, a.survey_id, a.score])


def write_expressions_jsonl(path: str | Path, expressions: Iterable[UncertainExpression]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in expressions:
            fh.write(json.dumps(e.as_dict(), ensure_ascii=False) + "\n")


def _iter_jsonl_rows(path: str | Path) -> Iterable[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if isinstance(row, dict) and row.get("_header"):
                continue  # run-dir provenance line
            yield row


def read_expressions_jsonl(path: str | Path) -> list[UncertainExpression]:
    return [UncertainExpression.from_dict(row) for row in _iter_jsonl_rows(path)]


def write_benchmark_jsonl(path: str | Path, entries: Iterable[BenchmarkEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.as_dict(), ensure_ascii=False) + "\n")


def read_benchmark_jsonl(path: str | Path) -> list[BenchmarkEntry]:
    return [BenchmarkEntry.from_dict(row) for row in _iter_jsonl_rows(path)]


def write_surveys_jsonl(path: str | Path, surveys: Iterable[Survey]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in surveys:
            row = {
                "survey_id": s.survey_id,
                "worker_id": s.worker_id,
                "real_item_ids": list(s.real_item_ids),
                "validation_items": [
                    {
                        "expression_id": v.expression_id,
                        "expert_mean": v.expert_mean,
                        "expert_std": v.expert_std,
                    }
                    for v in s.validation_items
                ],
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_surveys_jsonl(path: str | Path) -> list[Survey]:
    out = []
    for d in _iter_jsonl_rows(path):
        out.append(
            Survey(
                survey_id=d["survey_id"],
                worker_id=d["worker_id"],
                real_item_ids=list(d["real_item_ids"]),
                validation_items=[
                    ValidationItem(
                        expression_id=v["expression_id"],
                        expert_mean=float(v["expert_mean"]),
                        expert_std=float(v["expert_std"]),
                    )
                    for v in d["validation_items"]
                ],
            )
        )
    return out
