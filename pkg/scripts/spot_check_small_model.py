#!/usr/bin/env python3
"""Directional spot check: does asking a model to hedge improve ranking?

For each seed, draws a seeded question subset, collects answers under the
plain prompt and the hedging-instructed prompt, maps the hedging in each
answer to a confidence, grades with a judge model, and compares the AUROC of
the two variants. The claim under test is directional: the hedging-instructed
variant should rank correctness at least as well in most seeds.

Needs live provider credentials (or --mock fixtures), a trained mapper, and
a question CSV. The acceptance suite calls run_spot_check() when the
HEDGEBENCH_SPOT_MODEL / HEDGEBENCH_SIMPLEQA_CSV environment variables are
set.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from hedgebench.datasets import load_simpleqa_csv, subsample
from hedgebench.errors import HedgebenchError
from hedgebench.estimators import estimate_lc
from hedgebench.gateway import Gateway, MockProvider, ModelRegistry
from hedgebench.grading import grade_record
from hedgebench.mapper import load_mapper
from hedgebench.metrics import build_report


def run_spot_check(
    model_id: str,
    csv_path: str | Path,
    mapper_path: str | Path,
    judge_model: str,
    seeds=(0, 1, 2),
    n: int = 200,
    cache_dir: str | Path = "spot_cache",
    registry_path: str | Path | None = None,
    mock_dir: str | Path | None = None,
) -> dict:
    registry = (
        ModelRegistry.from_file(registry_path) if registry_path
        else ModelRegistry.bundled()
    )
    providers = None
    if mock_dir is not None:
        shared = MockProvider(mock_dir)
        providers = {
            registry.lookup(mid).platform: shared for mid in registry.ids()
        }
    gateway = Gateway(registry, cache_dir, providers=providers)
    mapper = load_mapper(mapper_path)
    items = load_simpleqa_csv(csv_path)

    per_seed = []
    wins = 0
    for seed in seeds:
        subset = subsample(items, min(n, len(items)), seed)
        records = []
        for variant in ("vanilla", "plus"):
            for item in subset:
                rec = estimate_lc(item, gateway, mapper, model_id, variant=variant)
                records.append(grade_record(rec, gateway, judge_model))
        report = build_report(records)
        rows = {row.method: row for row in report.rows}
        lc, lc_plus = rows["lc"], rows["lc_plus"]
        undefined = [
            (m, metric)
            for m, row in rows.items()
            for metric in ("ece", "auroc")
            if getattr(row, metric) is None
        ]
        improved = (
            lc.auroc is not None
            and lc_plus.auroc is not None
            and lc_plus.auroc >= lc.auroc
        )
        wins += int(improved)
        per_seed.append(
            {
                "seed": seed,
                "n": len(subset),
                "lc_auroc": lc.auroc,
                "lc_plus_auroc": lc_plus.auroc,
                "lc_ece": lc.ece,
                "lc_plus_ece": lc_plus.ece,
                "undefined_metrics": [f"{m}:{x}" for m, x in undefined],
                "improved": improved,
            }
        )
    return {
        "model": model_id,
        "judge": judge_model,
        "seeds": list(seeds),
        "wins": wins,
        "passed": wins >= 2 and len(seeds) >= 3,
        "per_seed": per_seed,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", required=True)
    parser.add_argument("--csv", required=True, help="question CSV")
    parser.add_argument("--mapper", required=True, help="trained weights (.pt)")
    parser.add_argument("--judge-model", default="gpt-5-mini")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--cache-dir", default="spot_cache")
    parser.add_argument("--registry", default=None)
    parser.add_argument("--mock", default=None)
    args = parser.parse_args(argv)

    try:
        result = run_spot_check(
            args.model,
            args.csv,
            args.mapper,
            args.judge_model,
            seeds=tuple(int(s) for s in args.seeds.split(",")),
            n=args.n,
            cache_dir=args.cache_dir,
            registry_path=args.registry,
            mock_dir=args.mock,
        )
    except HedgebenchError as exc:
        print(exc.cli_line(), file=sys.stderr)
        return 2
    print(json.dumps(result, indent=2))
    return 0 if result["passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
