"""Judge-based answer grading.

A judge model sees the question, the gold target(s), and the predicted
answer, and replies with a single letter: A (CORRECT), B (INCORRECT) or
C (NOT_ATTEMPTED). Anything else, including transport failure, falls back
to NOT_ATTEMPTED with a flag, never to a guess.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from typing import Iterable, Sequence

from .datasets import QAItem
from .errors import HedgebenchError, InputError, TransportError
from .estimators import QARecord
from .gateway import CompletionRequest, Gateway
from .prompts import render_grader, render_grader_multi

CORRECT = "CORRECT"
INCORRECT = "INCORRECT"
NOT_ATTEMPTED = "NOT_ATTEMPTED"
GRADE_VALUES = (CORRECT, INCORRECT, NOT_ATTEMPTED)

_LETTER_TO_GRADE = {"A": CORRECT, "B": INCORRECT, "C": NOT_ATTEMPTED}


@dataclasses.dataclass(frozen=True)
class Grade:
    value: str
    judge_raw: str
    fallback_used: bool = False
    note: str | None = None

    def __post_init__(self) -> None:
        if self.value not in GRADE_VALUES:
            raise InputError(f"unknown grade value {self.value!r}")
        if self.fallback_used and self.value != NOT_ATTEMPTED:
            raise InputError("fallback grades must be NOT_ATTEMPTED")


def render_judge_prompt(item: QAItem, predicted_answer: str) -> str:
    """Single-target template for simpleqa/nq_open, list template for popqa.

    nq_open items carry only the best answer as their single gold target.
    """
    if item.dataset_family == "popqa":
        return render_grader_multi(
            item.question, list(item.gold_targets), predicted_answer
        )
    return render_grader(item.question, item.gold_targets[0], predicted_answer)


def parse_judge_output(raw: str) -> Grade:
    letter = raw.strip()
    if letter in _LETTER_TO_GRADE:
        return Grade(value=_LETTER_TO_GRADE[letter], judge_raw=raw)
    return Grade(
        value=NOT_ATTEMPTED,
        judge_raw=raw,
        fallback_used=True,
        note="judge output was not a bare A/B/C",
    )


def grade(
    item: QAItem,
    predicted_answer: str,
    judge_gateway: Gateway,
    judge_model: str,
    temperature: float = 0.0,
) -> Grade:
    prompt = render_judge_prompt(item, predicted_answer)
    request = CompletionRequest(
        model_id=judge_model, prompt=prompt, temperature=temperature
    )
    try:
        result = judge_gateway.complete(request)
    except (TransportError, HedgebenchError) as exc:
        return Grade(
            value=NOT_ATTEMPTED,
            judge_raw="",
            fallback_used=True,
            note=f"judge unavailable: {exc}",
        )
    return parse_judge_output(result.text)


def grade_record(
    record: QARecord,
    judge_gateway: Gateway,
    judge_model: str,
    temperature: float = 0.0,
) -> QARecord:
    """Attach a grade to an answer record; the judged answer is the record's
    response text."""
    item = QAItem(
        question_id=record.question_id,
        question=record.question,
        gold_targets=record.gold_targets,
        dataset_family=record.dataset,
    )
    g = grade(item, record.response, judge_gateway, judge_model, temperature)
    aux = {"judge_model": judge_model}
    if g.fallback_used:
        aux["grade_fallback"] = True
    if g.note:
        aux["grade_note"] = g.note
    return record.with_grade(g.value, **aux)


def grading_summary(records: Iterable[QARecord]) -> dict:
    """Counts per grade plus the fallback rate, for run manifests."""
    records = list(records)
    counts = Counter(r.grade for r in records)
    fallbacks = sum(1 for r in records if r.auxiliary.get("grade_fallback"))
    total = len(records)
    return {
        "total": total,
        "counts": {v: counts.get(v, 0) for v in GRADE_VALUES},
        "fallback_rate": fallbacks / total if total else 0.0,
    }


def check_grade_conservation(records: Sequence[QARecord]) -> None:
    summary = grading_summary(records)
    if sum(summary["counts"].values()) != summary["total"]:
        raise InputError("some records carry grades outside the three values")
