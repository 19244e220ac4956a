"""Command-line front end.

Four command families mirror the pipeline stages:

    corpus {generate,screen,aggregate}   hedged-sentence corpus and crowd filtering
    mapper {train,eval,score}            sentence -> confidence regressor
    bench  {run,grade,report}            answer collection, judging, calibration tables
    sft    {label,build,export-config}   fine-tuning pairs at the model's own level

Every command writes its artifacts plus a manifest under
``<runs-root>/<run-id>/``. The run id derives from the resolved config, so a
rerun with identical inputs lands in the same directory and reuses its warm
response cache; stages that only read artifacts (``bench report``) never
touch a gateway at all. Failures exit nonzero with a single
``error.class: message`` line on stderr.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import sft as sft_mod
from .datasets import load_dataset, load_qa_jsonl, subsample
from .errors import ConfigError, HedgebenchError, InputError, UnknownMethodError
from .estimators import (
    METHODS,
    estimate_lc,
    estimate_su,
    estimate_vnc,
    estimate_ptrue,
    perplexity_record,
)
from .gateway import CompletionRequest, Gateway, MockProvider, ModelRegistry
from .grading import grade_record, grading_summary
from .mapper import (
    MapperHyperparams,
    evaluate_mapper,
    examples_from_entries,
    examples_from_levels,
    load_mapper,
    map_confidence,
    save_mapper,
    train_mapper,
)
from .metrics import build_report
from .prompts import render_vanilla
from .runio import (
    RunDir,
    RunManifest,
    file_digest,
    iter_jsonl,
    read_qa_records,
    write_qa_records,
)

METHOD_ALIASES = {"lc+": "lc_plus"}

POPQA_DEFAULT_SUBSAMPLE = 1000


def parse_methods(spec) -> list[str]:
    """Comma-separated method names; ``lc+`` is accepted for ``lc_plus``."""
    names = [s.strip() for s in spec.split(",")] if isinstance(spec, str) else list(spec)
    out: list[str] = []
    for name in names:
        if not name:
            continue
        canon = METHOD_ALIASES.get(name, name)
        if canon not in METHODS:
            raise UnknownMethodError(
                f"unknown method {name!r}; known: {', '.join(METHODS)} (alias: lc+)"
            )
        if canon not in out:
            out.append(canon)
    return out


def cli_errors(fn):
    """Turn package errors into one machine-parseable stderr line."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HedgebenchError as exc:
            click.echo(exc.cli_line(), err=True)
            sys.exit(2)

    return wrapper


def run_options(fn):
    fn = click.option(
        "--run-id", default=None, help="Override the config-derived run id."
    )(fn)
    fn = click.option(
        "--runs-root",
        type=click.Path(file_okay=False),
        default="runs",
        show_default=True,
        help="Directory that holds one subdirectory per run.",
    )(fn)
    return fn


def gateway_options(fn):
    fn = click.option(
        "--max-parallel", type=int, default=4, show_default=True,
        help="In-flight request bound per platform.",
    )(fn)
    fn = click.option(
        "--cache-dir",
        type=click.Path(file_okay=False),
        default=None,
        help="Response cache location; defaults to <run>/cache.",
    )(fn)
    fn = click.option(
        "--mock",
        "mock_dir",
        type=click.Path(exists=True, file_okay=False),
        default=None,
        help="Serve every platform from scripted fixtures in this directory.",
    )(fn)
    fn = click.option(
        "--registry",
        "registry_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Model registry JSON; the bundled table when omitted.",
    )(fn)
    return fn


def _registry(registry_path) -> ModelRegistry:
    if registry_path:
        return ModelRegistry.from_file(registry_path)
    return ModelRegistry.bundled()


def _registry_version(registry_path) -> str:
    path = registry_path or Path(__file__).parent / "configs" / "models.json"
    return file_digest(path)


def _gateway(
    registry_path, mock_dir, cache_dir, max_parallel, rundir: RunDir
) -> Gateway:
    registry = _registry(registry_path)
    providers = None
    if mock_dir is not None:
        shared = MockProvider(mock_dir)
        platforms = {registry.lookup(mid).platform for mid in registry.ids()}
        providers = {platform: shared for platform in platforms}
    cache = Path(cache_dir) if cache_dir else rundir.cache_dir
    return Gateway(
        registry, cache, providers=providers, max_parallel=max_parallel
    )


def _start(command: str, config: dict, run_id, runs_root, **manifest_kwargs):
    manifest = RunManifest.start(command, config, run_id=run_id, **manifest_kwargs)
    rundir = RunDir(runs_root, manifest.run_id).ensure()
    return manifest, rundir


def _finalize(rundir: RunDir, manifest: RunManifest, gateway: Gateway | None = None):
    manifest.finish(gateway.cache.stats() if gateway else None)
    rundir.write_manifest(manifest)
    click.echo(f"run {manifest.run_id}: artifacts in {rundir.root}")


@click.group()
def main():
    """Calibration benchmark tooling for hedged-language confidence."""


# --- corpus ------------------------------------------------------------------

@main.group()
def corpus():
    """Hedged-expression corpus: generation, screening, aggregation."""


@corpus.command("generate")
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="QA items, one JSON object per line.")
@click.option("--generators", required=True,
              help="Comma-separated generator model ids.")
@click.option("--per-level", type=int, default=10, show_default=True)
@click.option("--temperature", type=float, default=1.0, show_default=True)
@gateway_options
@run_options
@cli_errors
def corpus_generate(questions_path, generators, per_level, temperature,
                    registry_path, mock_dir, cache_dir, max_parallel,
                    runs_root, run_id):
    """Ask generator models for hedged restatements at every level."""
    generator_ids = [g.strip() for g in generators.split(",") if g.strip()]
    if not generator_ids:
        raise ConfigError("no generator models given")
    config = {
        "questions": str(questions_path),
        "generators": generator_ids,
        "per_level": per_level,
        "temperature": temperature,
    }
    manifest, rundir = _start(
        "corpus.generate", config, run_id, runs_root,
        versions={
            "registry": _registry_version(registry_path),
            "questions": file_digest(questions_path),
        },
    )
    gateway = _gateway(registry_path, mock_dir, cache_dir, max_parallel, rundir)
    questions = load_qa_jsonl(questions_path)
    result = corpus_mod.generate_expression_corpus(
        questions, gateway, generator_ids,
        per_level=per_level, temperature=temperature,
    )
    rundir.write_jsonl(
        "expressions.jsonl", (e.as_dict() for e in result.expressions), manifest
    )
    rundir.write_jsonl("skipped.jsonl", result.skipped, manifest)
    manifest.counts = {
        "questions": len(questions),
        "expressions": len(result.expressions),
        "skipped": len(result.skipped),
    }
    click.echo(
        f"{len(result.expressions)} expressions from {len(questions)} questions "
        f"({len(result.skipped)} question/model pairs skipped)"
    )
    _finalize(rundir, manifest, gateway)


@corpus.command("screen")
@click.option("--surveys", "surveys_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@run_options
@cli_errors
def corpus_screen(surveys_path, annotations_path, runs_root, run_id):
    """Drop whole surveys whose validation-item scores disagree with experts."""
    config = {"surveys": str(surveys_path), "annotations": str(annotations_path)}
    manifest, rundir = _start(
        "corpus.screen", config, run_id, runs_root,
        versions={
            "surveys": file_digest(surveys_path),
            "annotations": file_digest(annotations_path),
        },
    )
    surveys = corpus_mod.read_surveys_jsonl(surveys_path)
    annotations = corpus_mod.read_annotations_csv(annotations_path)
    screening = corpus_mod.screen_survey_workers(surveys, annotations)
    surviving = corpus_mod.apply_screening(annotations, screening)
    rundir.write_json(
        "screening.json",
        {
            "accepted_workers": sorted(screening.accepted_workers),
            "rejected_workers": sorted(screening.rejected_workers),
            "accepted_survey_ids": sorted(screening.accepted_survey_ids),
            "rejected_survey_ids": sorted(screening.rejected_survey_ids),
            "flagged_survey_ids": sorted(screening.flagged_survey_ids),
            "acceptance_rate": screening.acceptance_rate,
        },
        manifest,
    )
    corpus_mod.write_annotations_csv(rundir.path("surviving.csv"), surviving)
    manifest.artifacts.append("surviving.csv")
    manifest.counts = {
        "surveys": len(surveys),
        "accepted_surveys": len(screening.accepted_survey_ids),
        "rejected_surveys": len(screening.rejected_survey_ids),
        "annotations_in": len(annotations),
        "annotations_out": len(surviving),
    }
    click.echo(
        f"accepted {len(screening.accepted_survey_ids)}/{len(surveys)} surveys "
        f"(acceptance rate {screening.acceptance_rate:.3f})"
    )
    _finalize(rundir, manifest)


@corpus.command("aggregate")
@click.option("--expressions", "expressions_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--surveys", "surveys_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--min-valid", type=int, default=3, show_default=True,
              help="Surviving scores needed for a benchmark entry.")
@run_options
@cli_errors
def corpus_aggregate(expressions_path, annotations_path, surveys_path,
                     min_valid, runs_root, run_id):
    """Screen, filter, and average crowd scores into benchmark entries."""
    config = {
        "expressions": str(expressions_path),
        "annotations": str(annotations_path),
        "surveys": str(surveys_path),
        "min_valid": min_valid,
    }
    manifest, rundir = _start(
        "corpus.aggregate", config, run_id, runs_root,
        versions={
            "expressions": file_digest(expressions_path),
            "annotations": file_digest(annotations_path),
            "surveys": file_digest(surveys_path),
        },
    )
    expressions = corpus_mod.read_expressions_jsonl(expressions_path)
    by_id = {e.id: e for e in expressions}
    annotations = corpus_mod.read_annotations_csv(annotations_path)
    surveys = corpus_mod.read_surveys_jsonl(surveys_path)

    screening = corpus_mod.screen_survey_workers(surveys, annotations)
    surviving = corpus_mod.apply_screening(annotations, screening)
    refusal_ids = {e.id for e in expressions if e.is_refusal}
    responsible = corpus_mod.identify_responsible_workers(surviving, refusal_ids)
    by_level = corpus_mod.collect_scores_by_level(surviving, by_id, responsible)
    bounds = corpus_mod.compute_level_bounds(by_level)
    kept = corpus_mod.filter_annotations(surviving, bounds, by_id)
    result = corpus_mod.aggregate_benchmark(kept, by_id, min_valid=min_valid)

    corpus_mod.write_benchmark_jsonl(rundir.path("benchmark.jsonl"), result.entries)
    corpus_mod.write_benchmark_jsonl(
        rundir.path("sub_threshold.jsonl"), result.sub_threshold
    )
    manifest.artifacts.extend(["benchmark.jsonl", "sub_threshold.jsonl"])
    rundir.write_json(
        "summary.json",
        {
            "acceptance_rate": screening.acceptance_rate,
            "responsible_workers": len(responsible),
            "bounds": {
                lv.value: {"mean": b.mean, "std": b.std,
                           "lower": b.lower, "upper": b.upper}
                for lv, b in bounds.items()
            },
            "counts_by_level": {
                lv.value: n for lv, n in result.counts_by_level.items()
            },
            "retained_annotations": result.retained_annotations,
            "sub_threshold_annotations": result.sub_threshold_annotations,
        },
        manifest,
    )
    manifest.counts = {
        "annotations_in": len(annotations),
        "after_screening": len(surviving),
        "after_filtering": len(kept),
        "benchmark_entries": len(result.entries),
        "sub_threshold_entries": len(result.sub_threshold),
    }
    click.echo(
        f"{len(result.entries)} benchmark entries, "
        f"{len(result.sub_threshold)} sub-threshold"
    )
    _finalize(rundir, manifest)


# --- mapper --------------------------------------------------------------------

@main.group()
def mapper():
    """Train and apply the hedge-to-confidence regressor."""


@mapper.command("train")
@click.option("--expressions", "expressions_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Generated expressions; targets come from level hints.")
@click.option("--entries", "entries_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scored entries; targets come from mean crowd scores.")
@click.option("--benchmark", "benchmark_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Evaluation entries the training texts must not overlap.")
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Weights file; defaults to <run>/mapper.pt.")
@run_options
@cli_errors
def mapper_train(expressions_path, entries_path, benchmark_path,
                 epochs, seed, lr, batch_size, out_path, runs_root, run_id):
    """Fit the regressor on hedged sentences with scalar targets."""
    if (expressions_path is None) == (entries_path is None):
        raise ConfigError("give exactly one of --expressions or --entries")
    overrides = {
        k: v
        for k, v in {"epochs": epochs, "seed": seed, "lr": lr,
                     "batch_size": batch_size}.items()
        if v is not None
    }
    hp = MapperHyperparams(**overrides)
    source = expressions_path or entries_path
    config = {
        "source": str(source),
        "labels": "levels" if expressions_path else "crowd",
        "benchmark": str(benchmark_path) if benchmark_path else None,
        "hyperparams": {k: getattr(hp, k) for k in
                        ("epochs", "seed", "lr", "batch_size")},
    }
    manifest, rundir = _start(
        "mapper.train", config, run_id, runs_root,
        seeds={"mapper": hp.seed},
        versions={"source": file_digest(source)},
    )
    if expressions_path:
        examples = examples_from_levels(
            corpus_mod.read_expressions_jsonl(expressions_path)
        )
        provenance = "llm_labeled"
    else:
        examples = examples_from_entries(
            corpus_mod.read_benchmark_jsonl(entries_path)
        )
        provenance = "human_labeled"
    benchmark_texts = ()
    if benchmark_path:
        benchmark_texts = [
            e.text for e in corpus_mod.read_benchmark_jsonl(benchmark_path)
        ]
    model = train_mapper(examples, hp, benchmark_texts, provenance=provenance)
    out = Path(out_path) if out_path else rundir.path("mapper.pt")
    save_mapper(model, out)
    if out.parent == rundir.root:
        manifest.artifacts.append(out.name)
    rundir.write_json(
        "mapper_manifest.json",
        {**model.manifest, "version_hash": model.version_hash,
         "weights": str(out)},
        manifest,
    )
    manifest.counts = {"examples": len(examples)}
    click.echo(
        f"trained on {len(examples)} examples; version {model.version_hash[:12]}; "
        f"val mse {model.manifest['best_val_mse']:.6f}"
    )
    _finalize(rundir, manifest)


@mapper.command("eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--benchmark", "benchmark_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@run_options
@cli_errors
def mapper_eval(model_path, benchmark_path, runs_root, run_id):
    """Mean squared error against crowd means, on the 0-100 scale."""
    config = {"model": str(model_path), "benchmark": str(benchmark_path)}
    manifest, rundir = _start(
        "mapper.eval", config, run_id, runs_root,
        versions={"model": file_digest(model_path),
                  "benchmark": file_digest(benchmark_path)},
    )
    model = load_mapper(model_path)
    entries = corpus_mod.read_benchmark_jsonl(benchmark_path)
    mse = evaluate_mapper(model, entries)
    rundir.write_json(
        "eval.json",
        {"mse": mse, "entries": len(entries),
         "model_version": model.version_hash, "provenance": model.provenance},
        manifest,
    )
    manifest.counts = {"entries": len(entries)}
    click.echo(f"mse {mse:.6f} over {len(entries)} entries")
    _finalize(rundir, manifest)


@mapper.command("score")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--text", required=True, help="Sentence to score.")
@cli_errors
def mapper_score(model_path, text):
    """Print the mapped confidence for one sentence."""
    model = load_mapper(model_path)
    click.echo(f"{map_confidence(model, text):.6f}")


# --- bench ---------------------------------------------------------------------

def _bench_rundir(runs_root, run: str) -> RunDir:
    rundir = RunDir(runs_root, run)
    if not rundir.root.exists():
        raise InputError(f"no run directory {rundir.root}")
    return rundir


def collect_record(item, method, gateway, model_id, mapper_model,
                   temperature, su_samples, su_temperature):
    """One answer record for one question under one elicitation method."""
    if method == "lc":
        return estimate_lc(item, gateway, mapper_model, model_id,
                           variant="vanilla", temperature=temperature)
    if method == "lc_plus":
        return estimate_lc(item, gateway, mapper_model, model_id,
                           variant="plus", temperature=temperature)
    if method == "vnc":
        return estimate_vnc(item, gateway, model_id, temperature=temperature)
    if method == "ptrue":
        vanilla = gateway.complete(
            CompletionRequest(
                model_id=model_id,
                prompt=render_vanilla(item.question),
                temperature=temperature,
            )
        )
        return estimate_ptrue(item, vanilla.text.strip(), gateway, model_id,
                              temperature=temperature)
    if method == "perplexity":
        return perplexity_record(item, gateway, model_id, temperature=temperature)
    if method == "su":
        return estimate_su(item, gateway, model_id, n=su_samples,
                           temperature=su_temperature)
    raise UnknownMethodError(f"unknown method {method!r}")


@main.group()
def bench():
    """Collect answers, judge them, and report calibration metrics."""


@bench.command("run")
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON config; command-line flags override its keys.")
@click.option("--dataset", "dataset_family", default=None,
              type=click.Choice(["simpleqa", "nq_open", "popqa"]))
@click.option("--dataset-file", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--methods", default=None,
              help="Comma-separated subset of: " + ", ".join(METHODS) + " (alias lc+).")
@click.option("--model", "models", multiple=True,
              help="Model id to evaluate; repeatable.")
@click.option("--mapper", "mapper_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Trained mapper weights; required for lc and lc_plus.")
@click.option("--exclude", "exclude_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Question ids to drop (fine-tuning leakage guard).")
@click.option("--limit", type=int, default=None,
              help="Seeded subsample size; popqa defaults to 1000.")
@click.option("--seed", type=int, default=None, help="Subsample seed.")
@click.option("--temperature", type=float, default=None)
@click.option("--su-samples", type=int, default=None)
@click.option("--su-temperature", type=float, default=None)
@gateway_options
@run_options
@cli_errors
def bench_run(config_path, dataset_family, dataset_file, methods, models,
              mapper_path, exclude_path, limit, seed, temperature,
              su_samples, su_temperature, registry_path, mock_dir, cache_dir,
              max_parallel, runs_root, run_id):
    """Collect one answer record per question, method, and model."""
    base = {}
    if config_path:
        base = json.loads(Path(config_path).read_text(encoding="utf-8"))
    flags = {
        "dataset": dataset_family,
        "dataset_file": dataset_file,
        "methods": methods,
        "models": list(models) or None,
        "mapper": mapper_path,
        "exclude": exclude_path,
        "limit": limit,
        "seed": seed,
        "temperature": temperature,
        "su_samples": su_samples,
        "su_temperature": su_temperature,
    }
    defaults = {
        "seed": 0, "temperature": 0.0, "su_samples": 10, "su_temperature": 1.0,
        "limit": None, "mapper": None, "exclude": None,
    }
    cfg = {**defaults, **base,
           **{k: v for k, v in flags.items() if v is not None}}

    for key in ("dataset", "dataset_file", "methods", "models"):
        if not cfg.get(key):
            raise ConfigError(f"missing config key {key!r}")
    method_list = parse_methods(cfg["methods"])
    cfg["methods"] = method_list
    model_ids = list(cfg["models"])
    if cfg["limit"] is None and cfg["dataset"] == "popqa":
        cfg["limit"] = POPQA_DEFAULT_SUBSAMPLE

    needs_mapper = {"lc", "lc_plus"} & set(method_list)
    if needs_mapper and not cfg["mapper"]:
        raise ConfigError(
            f"methods {sorted(needs_mapper)} need --mapper weights"
        )

    manifest, rundir = _start(
        "bench.run", cfg, run_id, runs_root,
        seeds={"subsample": cfg["seed"]},
        versions={
            "registry": _registry_version(registry_path),
            "dataset": file_digest(cfg["dataset_file"]),
        },
    )
    gateway = _gateway(registry_path, mock_dir, cache_dir, max_parallel, rundir)
    for model_id in model_ids:
        gateway.registry.lookup(model_id)  # fail before any requests
    mapper_model = load_mapper(cfg["mapper"]) if needs_mapper else None

    items = load_dataset(cfg["dataset_file"], cfg["dataset"])
    n_loaded = len(items)
    banned: set[str] = set()
    if cfg["exclude"]:
        banned = set(sft_mod.read_exclusion_list(cfg["exclude"]))
        items = [it for it in items if it.question_id not in banned]
    if cfg["limit"] is not None and cfg["limit"] < len(items):
        items = subsample(items, cfg["limit"], cfg["seed"])
    sft_mod.check_no_leakage(banned, (it.question_id for it in items))

    records = []
    for model_id in model_ids:
        for method in method_list:
            for item in items:
                records.append(
                    collect_record(
                        item, method, gateway, model_id, mapper_model,
                        cfg["temperature"], cfg["su_samples"],
                        cfg["su_temperature"],
                    )
                )
    write_qa_records(rundir, "records.jsonl", records, manifest)
    manifest.counts = {
        "questions_loaded": n_loaded,
        "questions_used": len(items),
        "models": len(model_ids),
        "methods": len(method_list),
        "records": len(records),
    }
    click.echo(
        f"{len(records)} records: {len(items)} questions x "
        f"{len(method_list)} methods x {len(model_ids)} models"
    )
    _finalize(rundir, manifest, gateway)


@bench.command("grade")
@click.option("--run", required=True, help="Run id produced by bench run.")
@click.option("--judge-model", default="gpt-5-mini", show_default=True)
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--runs-root", type=click.Path(file_okay=False), default="runs",
              show_default=True)
@gateway_options
@cli_errors
def bench_grade(run, judge_model, temperature, runs_root, registry_path,
                mock_dir, cache_dir, max_parallel):
    """Judge each record's answer against its gold targets."""
    rundir = _bench_rundir(runs_root, run)
    records_path = rundir.path("records.jsonl")
    if not records_path.exists():
        raise InputError(f"run {run!r} has no records.jsonl; run bench run first")
    config = {"run": run, "judge_model": judge_model, "temperature": temperature}
    manifest = RunManifest.start(
        "bench.grade", config, run_id=run,
        versions={"registry": _registry_version(registry_path)},
    )
    gateway = _gateway(registry_path, mock_dir, cache_dir, max_parallel, rundir)
    records = read_qa_records(records_path)
    graded = [
        grade_record(rec, gateway, judge_model, temperature=temperature)
        for rec in records
    ]
    write_qa_records(rundir, "graded.jsonl", graded, manifest)
    summary = grading_summary(graded)
    manifest.counts = summary
    click.echo(
        "graded {total}: {CORRECT} correct, {INCORRECT} incorrect, "
        "{NOT_ATTEMPTED} not attempted".format(
            total=summary["total"], **summary["counts"]
        )
    )
    _finalize(rundir, manifest, gateway)


@bench.command("report")
@click.option("--run", required=True, help="Run id produced by bench run.")
@click.option("--bins", type=int, default=10, show_default=True,
              help="Calibration bin count.")
@click.option("--runs-root", type=click.Path(file_okay=False), default="runs",
              show_default=True)
@cli_errors
def bench_report(run, bins, runs_root):
    """Per model x dataset x method calibration table. Reads artifacts only."""
    rundir = _bench_rundir(runs_root, run)
    graded_path = rundir.path("graded.jsonl")
    if not graded_path.exists():
        raise InputError(f"run {run!r} has no graded.jsonl; run bench grade first")
    config = {"run": run, "bins": bins}
    manifest = RunManifest.start("bench.report", config, run_id=run)
    records = read_qa_records(graded_path)
    report = build_report(records, bin_count=bins)
    rundir.write_json("report.json", report.as_dict(), manifest)
    table = report.render_table()
    rundir.write_text("report.txt", table + "\n", manifest)
    manifest.counts = {"records": len(records), "rows": len(report.rows)}
    click.echo(table)
    _finalize(rundir, manifest)


# --- sft -----------------------------------------------------------------------

@main.group()
def sft():
    """Fine-tuning data faithful to the model's own uncertainty."""


@sft.command("label")
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--base-model", required=True,
              help="Model whose uncertainty the labels describe.")
@click.option("--n", "n_samples", type=int, default=10, show_default=True)
@click.option("--temperature", type=float, default=1.0, show_default=True)
@click.option("--sample", "sample_k", type=int, default=None,
              help="Seeded question subsample drawn before labeling.")
@click.option("--seed", type=int, default=13, show_default=True)
@gateway_options
@run_options
@cli_errors
def sft_label(questions_path, base_model, n_samples, temperature, sample_k,
              seed, registry_path, mock_dir, cache_dir, max_parallel,
              runs_root, run_id):
    """Label each question with the base model's semantic confidence level."""
    config = {
        "questions": str(questions_path), "base_model": base_model,
        "n": n_samples, "temperature": temperature,
        "sample": sample_k, "seed": seed,
    }
    manifest, rundir = _start(
        "sft.label", config, run_id, runs_root,
        seeds={"subsample": seed},
        versions={
            "registry": _registry_version(registry_path),
            "questions": file_digest(questions_path),
        },
    )
    gateway = _gateway(registry_path, mock_dir, cache_dir, max_parallel, rundir)
    questions = load_qa_jsonl(questions_path)
    if sample_k is not None and sample_k < len(questions):
        questions = subsample(questions, sample_k, seed)
    result = sft_mod.label_questions(
        questions, gateway, base_model, n=n_samples, temperature=temperature
    )
    rundir.write_jsonl(
        "labels.jsonl", (lab.as_dict() for lab in result.labels), manifest
    )
    rundir.write_jsonl("dropped.jsonl", result.dropped, manifest)
    manifest.counts = {
        "questions": len(questions),
        "labeled": len(result.labels),
        "dropped": len(result.dropped),
    }
    click.echo(f"labeled {len(result.labels)}/{len(questions)} questions")
    _finalize(rundir, manifest, gateway)


@sft.command("build")
@click.option("--labels", "labels_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--generators", required=True,
              help="Comma-separated sentence-generator model ids.")
@click.option("--pairs-per-question", type=int, default=40, show_default=True)
@click.option("--per-level", type=int, default=10, show_default=True)
@click.option("--temperature", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@gateway_options
@run_options
@cli_errors
def sft_build(labels_path, questions_path, generators, pairs_per_question,
              per_level, temperature, seed, registry_path, mock_dir,
              cache_dir, max_parallel, runs_root, run_id):
    """Assemble question/sentence pairs at each question's labeled level."""
    generator_ids = [g.strip() for g in generators.split(",") if g.strip()]
    config = {
        "labels": str(labels_path), "questions": str(questions_path),
        "generators": generator_ids,
        "pairs_per_question": pairs_per_question,
        "per_level": per_level, "temperature": temperature, "seed": seed,
    }
    manifest, rundir = _start(
        "sft.build", config, run_id, runs_root,
        seeds={"bucket_sample": seed},
        versions={
            "registry": _registry_version(registry_path),
            "labels": file_digest(labels_path),
            "questions": file_digest(questions_path),
        },
    )
    gateway = _gateway(registry_path, mock_dir, cache_dir, max_parallel, rundir)
    labels = [
        sft_mod.QuestionLabel.from_dict(row) for row in iter_jsonl(labels_path)
    ]
    questions = load_qa_jsonl(questions_path)
    db = sft_mod.build_sentence_db(
        questions, gateway, generator_ids,
        per_level=per_level, temperature=temperature,
    )
    pairs, excluded = sft_mod.assemble_sft_dataset(
        labels, db, pairs_per_question=pairs_per_question, seed=seed
    )
    rundir.write_jsonl("sft.jsonl", (p.as_dict() for p in pairs), manifest)
    rundir.write_jsonl(
        "conversational.jsonl",
        (sft_mod.to_conversational(p) for p in pairs),
        manifest,
    )
    exclusion_path = rundir.path("excluded.txt")
    header = f"# run {rundir.run_id} manifest {manifest.filename}\n"
    exclusion_path.write_text(
        header + "".join(f"{qid}\n" for qid in excluded), encoding="utf-8"
    )
    manifest.artifacts.append("excluded.txt")
    rundir.write_jsonl("db_skipped.jsonl", db.skipped, manifest)
    manifest.counts = {
        "labels": len(labels),
        "pairs": len(pairs),
        "excluded_questions": len(excluded),
        "db_skipped": len(db.skipped),
    }
    click.echo(
        f"{len(pairs)} pairs for {len(excluded)} questions "
        f"({pairs_per_question} each)"
    )
    _finalize(rundir, manifest, gateway)


@sft.command("export-config")
@click.option("--adapter-rank", type=int, default=None)
@click.option("--scaling-factor", type=int, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--precision-note", default=None)
@run_options
@cli_errors
def sft_export_config(adapter_rank, scaling_factor, dropout, epochs,
                      precision_note, runs_root, run_id):
    """Write the adapter training recipe; overrides are flagged, not silent."""
    overrides = {
        k: v
        for k, v in {
            "adapter_rank": adapter_rank,
            "scaling_factor": scaling_factor,
            "dropout": dropout,
            "epochs": epochs,
            "precision_note": precision_note,
        }.items()
        if v is not None
    }
    record = sft_mod.emit_training_config(**overrides)
    manifest, rundir = _start("sft.export-config", {"overrides": overrides},
                              run_id, runs_root)
    rundir.write_json("training_config.json", record.as_dict(), manifest)
    for line in record.deviations:
        click.echo(f"deviation: {line}")
    _finalize(rundir, manifest)


if __name__ == "__main__":
    main()
