#!/usr/bin/env python3
"""Two-phase benchmark construction around an external annotation pass.

``prepare`` asks the generator models for hedged restatements and lays out
annotation surveys (100 real items + 5 validation items each). The surveys
go to annotators out of band; their scores come back as a CSV with columns
expression_id,worker_id,survey_id,score.

``finalize`` screens surveys on the validation items, keeps responsible
workers' scores to fit per-level bounds, filters, and aggregates surviving
scores into benchmark entries.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from hedgebench.corpus import (
    Survey,
    ValidationItem,
    aggregate_benchmark,
    apply_screening,
    collect_scores_by_level,
    compute_level_bounds,
    filter_annotations,
    generate_expression_corpus,
    identify_responsible_workers,
    read_annotations_csv,
    read_expressions_jsonl,
    read_surveys_jsonl,
    screen_survey_workers,
    write_benchmark_jsonl,
    write_expressions_jsonl,
    write_surveys_jsonl,
)
from hedgebench.datasets import load_qa_jsonl
from hedgebench.errors import HedgebenchError
from hedgebench.gateway import Gateway, ModelRegistry


def cmd_prepare(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    registry = (
        ModelRegistry.from_file(args.registry) if args.registry
        else ModelRegistry.bundled()
    )
    gateway = Gateway(registry, out / "cache")
    questions = load_qa_jsonl(args.questions)
    generators = [g for g in args.generators.split(",") if g]
    result = generate_expression_corpus(
        questions, gateway, generators,
        per_level=args.per_level, temperature=args.temperature,
    )
    write_expressions_jsonl(out / "expressions.jsonl", result.expressions)
    (out / "skipped.jsonl").write_text(
        "".join(json.dumps(row) + "\n" for row in result.skipped)
    )

    validation = [
        ValidationItem(v["expression_id"], v["expert_mean"], v["expert_std"])
        for v in json.loads(Path(args.validation).read_text())
    ]
    ids = [e.id for e in result.expressions]
    random.Random(args.seed).shuffle(ids)
    surveys = []
    n_blocks = len(ids) // 100
    for b in range(n_blocks):
        block = ids[b * 100 : (b + 1) * 100]
        for k in range(args.annotators):
            surveys.append(
                Survey(
                    survey_id=f"s{b:04d}-{k}",
                    worker_id=f"unassigned-{b:04d}-{k}",
                    real_item_ids=block,
                    validation_items=validation,
                )
            )
    write_surveys_jsonl(out / "surveys.jsonl", surveys)
    leftover = len(ids) - n_blocks * 100
    print(
        f"{len(result.expressions)} expressions, {len(surveys)} surveys "
        f"({leftover} expressions below one block, not surveyed)"
    )


def cmd_finalize(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    expressions = read_expressions_jsonl(args.expressions)
    by_id = {e.id: e for e in expressions}
    annotations = read_annotations_csv(args.annotations)
    surveys = read_surveys_jsonl(args.surveys)

    screening = screen_survey_workers(surveys, annotations)
    surviving = apply_screening(annotations, screening)
    refusals = {e.id for e in expressions if e.is_refusal}
    responsible = identify_responsible_workers(surviving, refusals)
    bounds = compute_level_bounds(
        collect_scores_by_level(surviving, by_id, responsible)
    )
    kept = filter_annotations(surviving, bounds, by_id)
    result = aggregate_benchmark(kept, by_id, min_valid=args.min_valid)

    write_benchmark_jsonl(out / "benchmark.jsonl", result.entries)
    write_benchmark_jsonl(out / "sub_threshold.jsonl", result.sub_threshold)
    summary = {
        "acceptance_rate": screening.acceptance_rate,
        "responsible_workers": len(responsible),
        "retained_annotations": result.retained_annotations,
        "entries": len(result.entries),
        "sub_threshold": len(result.sub_threshold),
        "counts_by_level": {
            lv.value: n for lv, n in result.counts_by_level.items()
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    prep = sub.add_parser("prepare", help="generate expressions and surveys")
    prep.add_argument("--questions", required=True)
    prep.add_argument("--generators", required=True,
                      help="comma-separated model ids")
    prep.add_argument("--validation", required=True,
                      help="JSON list of validation items with expert stats")
    prep.add_argument("--per-level", type=int, default=10)
    prep.add_argument("--temperature", type=float, default=1.0)
    prep.add_argument("--annotators", type=int, default=5)
    prep.add_argument("--seed", type=int, default=0)
    prep.add_argument("--registry", default=None)
    prep.add_argument("--out-dir", required=True)
    prep.set_defaults(func=cmd_prepare)

    fin = sub.add_parser("finalize", help="screen, filter, aggregate")
    fin.add_argument("--expressions", required=True)
    fin.add_argument("--annotations", required=True)
    fin.add_argument("--surveys", required=True)
    fin.add_argument("--min-valid", type=int, default=3)
    fin.add_argument("--out-dir", required=True)
    fin.set_defaults(func=cmd_finalize)

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except HedgebenchError as exc:
        print(exc.cli_line(), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
