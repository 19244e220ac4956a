"""QA dataset loading and seeded subsampling.

Three factoid families are supported: single-gold CSV (problem/answer
columns), NQ-Open style JSONL with an answer list, and the TSV family whose
gold target is a JSON list of accepted answers.
"""

from __future__ import annotations

import csv
import json
import random
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError

DATASET_FAMILIES = ("simpleqa", "nq_open", "popqa")


@dataclass(frozen=True)
class QAItem:
    question_id: str
    question: str
    gold_targets: tuple[str, ...]
    dataset_family: str

    def __post_init__(self):
        if not self.gold_targets:
            raise InputError(f"question {self.question_id} has no gold target")
        if self.dataset_family not in DATASET_FAMILIES:
            raise InputError(
                f"dataset_family {self.dataset_family!r} not in {DATASET_FAMILIES}"
            )

    def as_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "gold_targets": list(self.gold_targets),
            "dataset_family": self.dataset_family,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAItem":
        return cls(
            question_id=str(d["question_id"]),
            question=d["question"],
            gold_targets=tuple(d["gold_targets"]),
            dataset_family=d["dataset_family"],
        )


def load_simpleqa_csv(path: str | Path) -> list[QAItem]:
    """CSV with `problem` and `answer` columns; one gold string per item."""
    items = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"problem", "answer"} <= set(reader.fieldnames):
            raise InputError(f"{path}: need columns problem,answer, got {reader.fieldnames}")
        for i, row in enumerate(reader):
            items.append(
                QAItem(
                    question_id=f"simpleqa-{i}",
                    question=row["problem"],
                    gold_targets=(row["answer"],),
                    dataset_family="simpleqa",
                )
            )
    return items


def load_nq_open_jsonl(path: str | Path) -> list[QAItem]:
    """JSONL with `question` plus either `best_answer` or an `answer` list;
    only the best answer is kept as the gold target."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            row = json.loads(line)
            if "best_answer" in row:
                gold = row["best_answer"]
            else:
                answers = row.get("answer") or []
                if not answers:
                    raise InputError(f"{path}:{i + 1}: no answer field")
                gold = answers[0]
            items.append(
                QAItem(
                    question_id=f"nq-{i}",
                    question=row["question"],
                    gold_targets=(gold,),
                    dataset_family="nq_open",
                )
            )
    return items


def load_popqa_tsv(path: str | Path) -> list[QAItem]:
    """TSV with `question` and `possible_answers` (JSON list) columns."""
    items = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        need = {"question", "possible_answers"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InputError(f"{path}: need columns {sorted(need)}, got {reader.fieldnames}")
        for i, row in enumerate(reader):
            answers = json.loads(row["possible_answers"])
            items.append(
                QAItem(
                    question_id=row.get("id") or f"popqa-{i}",
                    question=row["question"],
                    gold_targets=tuple(str(a) for a in answers),
                    dataset_family="popqa",
                )
            )
    return items


def load_qa_jsonl(path: str | Path) -> list[QAItem]:
    """Generic fixture format: one QAItem dict per line."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if isinstance(row, dict) and row.get("_header"):
                continue  # run-dir provenance line
            items.append(QAItem.from_dict(row))
    return items


def write_qa_jsonl(path: str | Path, items: Sequence[QAItem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.as_dict(), ensure_ascii=False) + "\n")


def load_dataset(path: str | Path, family: str) -> list[QAItem]:
    path = Path(path)
    if family == "simpleqa" and path.suffix == ".csv":
        return load_simpleqa_csv(path)
    if family == "nq_open" and path.suffix in (".jsonl", ".json"):
        return load_nq_open_jsonl(path)
    if family == "popqa" and path.suffix in (".tsv", ".txt"):
        return load_popqa_tsv(path)
    if path.suffix == ".jsonl":
        items = load_qa_jsonl(path)
        wrong = [it.question_id for it in items if it.dataset_family != family]
        if wrong:
            raise InputError(f"{path}: items {wrong[:3]} are not family {family!r}")
        return items
    raise InputError(f"no loader for family {family!r} with file {path.name!r}")


def subsample(items: Sequence[QAItem], k: int, seed: int) -> list[QAItem]:
    """Seeded uniform subsample, stable under input order."""
    if k > len(items):
        raise InputError(f"cannot sample {k} of {len(items)} items")
    ordered = sorted(items, key=lambda it: it.question_id)
    return random.Random(seed).sample(ordered, k)
