#!/usr/bin/env python3
"""Train the hedge-to-confidence regressor from either label source.

Generated expressions carry their level as the target; scored entries carry
mean crowd scores. Training refuses to proceed if any training sentence also
appears in the held-out benchmark given via --benchmark.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from hedgebench.corpus import read_benchmark_jsonl, read_expressions_jsonl
from hedgebench.errors import HedgebenchError
from hedgebench.mapper import (
    MapperHyperparams,
    evaluate_mapper,
    examples_from_entries,
    examples_from_levels,
    save_mapper,
    train_mapper,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--expressions", help="level-labeled sentences (JSONL)")
    source.add_argument("--entries", help="crowd-scored entries (JSONL)")
    parser.add_argument("--benchmark", default=None,
                        help="held-out entries: leakage guard plus final MSE")
    parser.add_argument("--out", required=True, help="weights file (.pt)")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    args = parser.parse_args(argv)

    overrides = {
        k: v
        for k, v in {
            "epochs": args.epochs, "seed": args.seed,
            "lr": args.lr, "batch_size": args.batch_size,
        }.items()
        if v is not None
    }
    hp = MapperHyperparams(**overrides)

    try:
        if args.expressions:
            examples = examples_from_levels(read_expressions_jsonl(args.expressions))
            provenance = "llm_labeled"
        else:
            examples = examples_from_entries(read_benchmark_jsonl(args.entries))
            provenance = "human_labeled"
        held_out = read_benchmark_jsonl(args.benchmark) if args.benchmark else []
        model = train_mapper(
            examples, hp,
            benchmark_texts=[e.text for e in held_out],
            provenance=provenance,
        )
        save_mapper(model, args.out)
        summary = {
            "out": args.out,
            "version_hash": model.version_hash,
            "hyperparams": dataclasses.asdict(hp),
            **model.manifest,
        }
        if held_out:
            summary["benchmark_mse"] = evaluate_mapper(model, held_out)
        print(json.dumps(summary, indent=2))
    except HedgebenchError as exc:
        print(exc.cli_line(), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
