"""Hedging fine-tune dataset construction.

Three steps: label held-out questions with a semantic confidence from
repeated base-model sampling, pre-build a sentence database of hedged
answers per confidence level, then pair each question with sentences at
exactly its labeled level. Also emits the adapter training config; the
gradient loop itself is delegated to an external trainer.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib
import random
import warnings
from typing import Callable, Iterable, Sequence

from .corpus import UncertainExpression, generate_expression_corpus
from .datasets import QAItem
from .errors import (
    HedgebenchError,
    InputError,
    InsufficientSentencesError,
    LeakageError,
)
from .estimators import (
    cluster_by_entailment,
    normalized_match_oracle,
    su_to_confidence,
)
from .gateway import CompletionRequest, Gateway
from .levels import ConfidenceLevel, discretize_level
from .prompts import render_vanilla


@dataclasses.dataclass(frozen=True)
class QuestionLabel:
    question_id: str
    question: str
    semantic_confidence: float
    level: ConfidenceLevel

    def __post_init__(self) -> None:
        if discretize_level(self.semantic_confidence) is not self.level:
            raise InputError(
                f"label level {self.level.value} inconsistent with "
                f"confidence {self.semantic_confidence}"
            )

    def as_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "semantic_confidence": self.semantic_confidence,
            "level": self.level.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuestionLabel":
        return cls(
            question_id=d["question_id"],
            question=d["question"],
            semantic_confidence=d["semantic_confidence"],
            level=ConfidenceLevel(d["level"]),
        )


@dataclasses.dataclass(frozen=True)
class SftPair:
    question_id: str
    question: str
    target: str
    level: ConfidenceLevel
    source_model: str

    def as_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "target": self.target,
            "level": self.level.value,
            "source_model": self.source_model,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SftPair":
        return cls(
            question_id=d["question_id"],
            question=d["question"],
            target=d["target"],
            level=ConfidenceLevel(d["level"]),
            source_model=d["source_model"],
        )


@dataclasses.dataclass(frozen=True)
class LabelingResult:
    labels: tuple[QuestionLabel, ...]
    dropped: tuple[dict, ...]


def label_questions(
    questions: Sequence[QAItem],
    gateway: Gateway,
    base_model: str,
    n: int = 10,
    temperature: float = 1.0,
    entailment_oracle: Callable[[str, str, str], bool] = normalized_match_oracle,
) -> LabelingResult:
    """Sample n answers per question from the base model, cluster them by
    bidirectional entailment, and discretize 1 - H/ln n into a level.
    Questions whose generation fails are dropped and logged, not fatal."""
    if temperature <= 0.0:
        raise InputError("labeling needs sampling; temperature must be > 0")
    labels: list[QuestionLabel] = []
    dropped: list[dict] = []
    for item in questions:
        request = CompletionRequest(
            model_id=base_model,
            prompt=render_vanilla(item.question),
            temperature=temperature,
            n=n,
        )
        try:
            results = gateway.sample_n(request)
            texts = [r.text.strip() for r in results]
            clustering = cluster_by_entailment(
                texts, item.question, entailment_oracle
            )
            confidence = su_to_confidence(clustering.entropy, len(texts))
        except HedgebenchError as exc:
            dropped.append(
                {
                    "question_id": item.question_id,
                    "error_class": exc.error_class,
                    "error": str(exc),
                }
            )
            continue
        labels.append(
            QuestionLabel(
                question_id=item.question_id,
                question=item.question,
                semantic_confidence=confidence,
                level=discretize_level(confidence),
            )
        )
    return LabelingResult(tuple(labels), tuple(dropped))


@dataclasses.dataclass
class SentenceDb:
    """Hedged sentences bucketed by (question_id, level)."""

    buckets: dict[tuple[str, ConfidenceLevel], list[UncertainExpression]]
    questions: dict[str, str]  # question_id -> question text
    skipped: list[dict]

    def sentences(self, question_id: str, level: ConfidenceLevel):
        return self.buckets.get((question_id, level), [])

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for (qid, level), sentences in sorted(
            self.buckets.items(), key=lambda kv: (kv[0][0], kv[0][1].rank)
        ):
            out.setdefault(qid, {})[level.value] = len(sentences)
        return out


def build_sentence_db(
    questions: Sequence[QAItem],
    gateway: Gateway,
    generators: Sequence[str],
    per_level: int = 10,
    temperature: float = 1.0,
) -> SentenceDb:
    if not generators:
        warnings.warn(
            "building a sentence database with zero generator models; "
            "the result is empty",
            stacklevel=2,
        )
        return SentenceDb({}, {q.question_id: q.question for q in questions}, [])
    result = generate_expression_corpus(
        questions, gateway, generators, per_level=per_level, temperature=temperature
    )
    buckets: dict[tuple[str, ConfidenceLevel], list[UncertainExpression]] = {}
    for expr in result.expressions:
        buckets.setdefault((expr.question_id, expr.level_hint), []).append(expr)
    return SentenceDb(
        buckets,
        {q.question_id: q.question for q in questions},
        list(result.skipped),
    )


def assemble_sft_dataset(
    labels: Sequence[QuestionLabel],
    sentence_db: SentenceDb,
    pairs_per_question: int = 40,
    seed: int = 0,
) -> tuple[list[SftPair], list[str]]:
    """Pair every labeled question with sentences at exactly its level.

    Returns (pairs, excluded_question_ids); the exclusion list is what keeps
    these questions out of any later evaluation set. Buckets larger than
    pairs_per_question are sampled without replacement, seeded.
    """
    pairs: list[SftPair] = []
    excluded: list[str] = []
    for label in labels:
        bucket = sentence_db.sentences(label.question_id, label.level)
        if len(bucket) < pairs_per_question:
            raise InsufficientSentencesError(
                question_id=label.question_id,
                level=label.level.value,
                have=len(bucket),
                need=pairs_per_question,
            )
        if len(bucket) > pairs_per_question:
            rng = random.Random((seed, label.question_id).__repr__())
            chosen = rng.sample(bucket, pairs_per_question)
        else:
            chosen = list(bucket)
        question = sentence_db.questions.get(label.question_id, label.question)
        for expr in chosen:
            pairs.append(
                SftPair(
                    question_id=label.question_id,
                    question=question,
                    target=expr.text,
                    level=label.level,
                    source_model=expr.source_model,
                )
            )
        excluded.append(label.question_id)
    return pairs, excluded


def check_no_leakage(
    sft_question_ids: Iterable[str], eval_question_ids: Iterable[str]
) -> None:
    """Hard guard: fine-tune questions must never appear in evaluation."""
    overlap = sorted(set(sft_question_ids) & set(eval_question_ids))
    if overlap:
        raise LeakageError(overlap)


_CONFIG_DEFAULTS = {
    "adapter_rank": 32,
    "scaling_factor": 32,
    "dropout": 0.05,
    "epochs": 3,
    "precision_note": "base model loaded in 8-bit",
}


@dataclasses.dataclass(frozen=True)
class TrainingConfigRecord:
    adapter_rank: int = 32
    scaling_factor: int = 32
    dropout: float = 0.05
    epochs: int = 3
    precision_note: str = "base model loaded in 8-bit"
    deviations: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "adapter_rank": self.adapter_rank,
            "scaling_factor": self.scaling_factor,
            "dropout": self.dropout,
            "epochs": self.epochs,
            "precision_note": self.precision_note,
            "deviations": list(self.deviations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfigRecord":
        d = dict(d)
        d["deviations"] = tuple(d.get("deviations", ()))
        return cls(**d)


def emit_training_config(**overrides) -> TrainingConfigRecord:
    """Adapter recipe with fixed defaults; overrides are flagged, not silent."""
    unknown = set(overrides) - set(_CONFIG_DEFAULTS)
    if unknown:
        raise InputError(f"unknown training-config fields: {sorted(unknown)}")
    deviations = tuple(
        f"{key}: {_CONFIG_DEFAULTS[key]!r} -> {value!r}"
        for key, value in sorted(overrides.items())
        if value != _CONFIG_DEFAULTS[key]
    )
    merged = {**_CONFIG_DEFAULTS, **overrides}
    return TrainingConfigRecord(deviations=deviations, **merged)


def to_conversational(pair: SftPair) -> dict:
    """Instruction-format record: the plain QA prompt as the user turn, the
    hedged sentence as the target turn."""
    return {
        "messages": [
            {"role": "user", "content": render_vanilla(pair.question)},
            {"role": "assistant", "content": pair.target},
        ],
        "level": pair.level.value,
        "question_id": pair.question_id,
    }


def write_sft_jsonl(path: str | pathlib.Path, pairs: Sequence[SftPair]) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.as_dict(), ensure_ascii=False) + "\n")


def read_sft_jsonl(path: str | pathlib.Path) -> list[SftPair]:
    out = []
    with pathlib.Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if isinstance(row, dict) and row.get("_header"):
                continue  # run-dir provenance line
            out.append(SftPair.from_dict(row))
    return out


def write_exclusion_list(path: str | pathlib.Path, question_ids: Sequence[str]) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{qid}\n" for qid in question_ids), encoding="utf-8")


def read_exclusion_list(path: str | pathlib.Path) -> list[str]:
    return [
        line.strip()
        for line in pathlib.Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
