"""End-to-end command-line tests on scripted providers.

Everything runs against fixture scripts: no network, no credentials. The
bench flow is checked for exact table values, byte-level determinism, and
the ability to finish from a warm cache with no live provider at all.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import pytest
from click.testing import CliRunner

from hedgebench import synth
from hedgebench.cli import main, parse_methods
from hedgebench.corpus import (
    aggregate_benchmark,
    apply_screening,
    collect_scores_by_level,
    compute_level_bounds,
    filter_annotations,
    identify_responsible_workers,
    read_benchmark_jsonl,
    read_expressions_jsonl,
    screen_survey_workers,
    write_annotations_csv,
    write_benchmark_jsonl,
    write_expressions_jsonl,
    write_surveys_jsonl,
)
from hedgebench.corpus import BenchmarkEntry
from hedgebench.datasets import QAItem, write_qa_jsonl
from hedgebench.errors import UnknownMethodError
from hedgebench.levels import ConfidenceLevel
from hedgebench.mapper import save_mapper
from hedgebench.runio import (
    RunManifest,
    config_hash,
    derive_run_id,
    file_digest,
    iter_jsonl,
    read_jsonl_header,
    read_qa_records,
)
from hedgebench.sft import read_exclusion_list, read_sft_jsonl

QUESTIONS = [
    QAItem("cq1", "What is the capital of France?", ("Paris",), "simpleqa"),
    QAItem("cq2", "Who wrote the play Hamlet?", ("William Shakespeare",), "simpleqa"),
    QAItem("cq3", "In which year did the metro in Arles open?", ("1927",), "simpleqa"),
    QAItem("cq4", "How many moons does Mars have?", ("2",), "simpleqa"),
]

VANILLA = {
    "cq1": "I'm positive the capital of France is Paris.",
    "cq2": "I think it may have been Christopher Marlowe.",
    "cq3": "The metro in Arles probably opened in 1927.",
    "cq4": "I don't know how many moons Mars has.",
}

VNC = {
    "cq1": '{"answer": "Paris", "confidence_score": 95}',
    "cq2": '{"answer": "Christopher Marlowe", "confidence_score": 60}',
    "cq3": "It opened sometime in the 1920s.",  # no extractable score
    "cq4": '{"answer": "2", "confidence_score": 20}',
}

JUDGE = {
    VANILLA["cq1"]: "A",
    VANILLA["cq2"]: "B",
    VANILLA["cq3"]: "A",
    VANILLA["cq4"]: "C",
    VNC["cq1"]: "A",
    VNC["cq2"]: "B",
    VNC["cq3"]: "B",
    VNC["cq4"]: "A",
    "Paris.": "A",
}

LN_09 = math.log(0.9)


def _stderr(result) -> str:
    try:
        return result.stderr
    except ValueError:  # stderr not captured separately on this click
        return result.output


@pytest.fixture(scope="module")
def qa_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "qa4.jsonl"
    write_qa_jsonl(path, QUESTIONS)
    return path


@pytest.fixture(scope="module")
def qa1_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "qa1.jsonl"
    write_qa_jsonl(path, QUESTIONS[:1])
    return path


@pytest.fixture(scope="module")
def fixtures_dir(tmp_path_factory):
    """One script file; entry order puts the most specific prompts first."""
    entries = []
    for predicted, letter in JUDGE.items():
        entries.append(
            {"contains": f"Predicted answer: {predicted}",
             "responses": [{"text": letter}]}
        )
    entries.append(
        {"contains": f"Proposed Answer: {VANILLA['cq1']}",
         "responses": [{"text": "A", "token_logprobs": [["A", LN_09]]}]}
    )
    for item in QUESTIONS:
        entries.append(
            {"contains": f"here is the question:\n{item.question}",
             "responses": [{"text": VNC[item.question_id]}]}
        )
    # index 0 serves greedy answering; 1..9 are the sampling tail
    su_tail = ["Paris."] * 5 + ["Lyon."] * 4
    for item in QUESTIONS:
        first = {
            "text": VANILLA[item.question_id],
            "token_logprobs": [["tok1", -0.2], ["tok2", -0.1], ["tok3", -0.3]],
        }
        responses = [first] + [{"text": t} for t in su_tail]
        entries.append(
            {"contains": f"Question: {item.question}\nAnswer:",
             "responses": responses}
        )
    root = tmp_path_factory.mktemp("fixtures")
    synth.write_mock_script(root / "script.json", entries)
    return root


@pytest.fixture(scope="module")
def empty_fixtures_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("no_scripts")


@pytest.fixture(scope="module")
def mapper_path(tmp_path_factory, trained_mapper):
    path = tmp_path_factory.mktemp("mapper") / "mapper.pt"
    save_mapper(trained_mapper, path)
    return path


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _run_args(qa_path, mapper_path, fixtures, root, **extra):
    args = [
        "bench", "run",
        "--dataset", "simpleqa",
        "--dataset-file", str(qa_path),
        "--methods", "lc,lc+,vnc",
        "--model", "mock-model",
        "--mapper", str(mapper_path),
        "--mock", str(fixtures),
        "--runs-root", str(root),
    ]
    for key, value in extra.items():
        args.extend([f"--{key.replace('_', '-')}", str(value)])
    return args


def _run_id(output: str) -> str:
    match = re.search(r"run (\S+): artifacts", output)
    assert match, output
    return match.group(1)


@pytest.fixture(scope="module")
def completed_run(runner, qa_path, mapper_path, fixtures_dir, tmp_path_factory):
    """bench run + grade + report, shared by the inspection tests below."""
    root = tmp_path_factory.mktemp("runsA")
    result = runner.invoke(main, _run_args(qa_path, mapper_path, fixtures_dir, root))
    assert result.exit_code == 0, result.output + _stderr(result)
    run_id = _run_id(result.output)

    graded = runner.invoke(main, [
        "bench", "grade", "--run", run_id, "--judge-model", "mock-model",
        "--mock", str(fixtures_dir), "--runs-root", str(root),
    ])
    assert graded.exit_code == 0, graded.output + _stderr(graded)

    report = runner.invoke(main, [
        "bench", "report", "--run", run_id, "--runs-root", str(root),
    ])
    assert report.exit_code == 0, report.output + _stderr(report)
    return root, run_id, report.output


class TestBenchFlow:
    def test_run_record_counts(self, completed_run):
        root, run_id, _ = completed_run
        records = read_qa_records(root / run_id / "records.jsonl")
        assert len(records) == 12
        by_method = {m: [r for r in records if r.method == m]
                     for m in ("lc", "lc_plus", "vnc")}
        assert all(len(v) == 4 for v in by_method.values())

    def test_vanilla_and_hedged_variants_recorded(self, completed_run):
        root, run_id, _ = completed_run
        records = read_qa_records(root / run_id / "records.jsonl")
        variants = {(r.method, r.prompt_variant) for r in records}
        assert ("lc", "vanilla") in variants
        assert ("lc_plus", "hedged") in variants

    def test_vnc_extraction_and_abstention(self, completed_run):
        root, run_id, _ = completed_run
        records = read_qa_records(root / run_id / "records.jsonl")
        vnc = {r.question_id: r for r in records if r.method == "vnc"}
        assert vnc["cq1"].confidence == pytest.approx(0.95)
        assert vnc["cq2"].confidence == pytest.approx(0.60)
        assert vnc["cq3"].abstained and vnc["cq3"].confidence == 0.0
        assert vnc["cq4"].confidence == pytest.approx(0.20)

    def test_grades_attached(self, completed_run):
        root, run_id, _ = completed_run
        graded = read_qa_records(root / run_id / "graded.jsonl")
        assert all(r.grade is not None for r in graded)
        lc = {r.question_id: r for r in graded if r.method == "lc"}
        assert lc["cq1"].grade == "CORRECT"
        assert lc["cq2"].grade == "INCORRECT"
        assert lc["cq4"].grade == "NOT_ATTEMPTED"

    def test_report_matches_hand_computation(self, completed_run):
        root, run_id, output = completed_run
        report = json.loads((root / run_id / "report.json").read_text())
        rows = {row["method"]: row for row in report["rows"]}
        vnc = rows["vnc"]
        # correct: cq1 (.95), cq4 (.20); wrong: cq2 (.60); abstained: cq3.
        assert vnc["n"] == 4
        assert vnc["accuracy"] == pytest.approx(0.5)
        assert vnc["abstention_rate"] == pytest.approx(0.25)
        assert vnc["auroc"] == pytest.approx(0.75, abs=1e-9)
        expected_ece = (abs(1 - 0.95) + abs(0 - 0.60) + abs(1 - 0.20)) / 3
        assert vnc["ece"] == pytest.approx(expected_ece, abs=1e-9)
        assert "vnc" in output and "lc_plus" in output

    def test_artifacts_reference_their_manifest(self, completed_run):
        root, run_id, _ = completed_run
        header = read_jsonl_header(root / run_id / "records.jsonl")
        assert header["run_id"] == run_id
        assert header["command"] == "bench.run"
        manifest_path = root / run_id / header["manifest"]
        manifest = RunManifest.from_dict(json.loads(manifest_path.read_text()))
        assert "records.jsonl" in manifest.artifacts
        assert manifest.counts["records"] == 12
        assert manifest.counts["questions_used"] == 4
        assert manifest.seeds == {"subsample": 0}
        assert manifest.versions["dataset"] == file_digest(
            manifest.config["dataset_file"]
        )
        assert manifest.started_at and manifest.finished_at

    def test_second_root_is_byte_identical(self, completed_run, runner, qa_path,
                                           mapper_path, fixtures_dir, tmp_path):
        root_a, run_id, _ = completed_run
        root_b = tmp_path / "runsB"
        result = runner.invoke(
            main, _run_args(qa_path, mapper_path, fixtures_dir, root_b)
        )
        assert result.exit_code == 0, _stderr(result)
        assert _run_id(result.output) == run_id  # config-derived, so equal
        original = (root_a / run_id / "records.jsonl").read_bytes()
        replayed = (root_b / run_id / "records.jsonl").read_bytes()
        assert original == replayed

    def test_rerun_completes_from_cache_without_any_provider(
            self, completed_run, runner, qa_path, mapper_path,
            empty_fixtures_dir):
        """A warm cache answers everything: reruns succeed even when the
        provider has no scripts at all (so any real request would fail)."""
        root, run_id, _ = completed_run
        before = (root / run_id / "records.jsonl").read_bytes()
        rerun = runner.invoke(
            main, _run_args(qa_path, mapper_path, empty_fixtures_dir, root)
        )
        assert rerun.exit_code == 0, _stderr(rerun)
        assert (root / run_id / "records.jsonl").read_bytes() == before

        regrade = runner.invoke(main, [
            "bench", "grade", "--run", run_id, "--judge-model", "mock-model",
            "--mock", str(empty_fixtures_dir), "--runs-root", str(root),
        ])
        assert regrade.exit_code == 0, _stderr(regrade)

        manifest = RunManifest.from_dict(json.loads(
            (root / run_id / "manifest-bench-run.json").read_text()
        ))
        assert manifest.cache["hits"] > 0 and manifest.cache["misses"] == 0

    def test_report_needs_no_gateway_flags(self, completed_run, runner):
        root, run_id, _ = completed_run
        result = runner.invoke(main, [
            "bench", "report", "--run", run_id, "--runs-root", str(root),
        ])
        assert result.exit_code == 0
        assert (root / run_id / "report.txt").exists()


@pytest.fixture(scope="class")
def sampled_run(runner, qa1_path, fixtures_dir, tmp_path_factory):
    root = tmp_path_factory.mktemp("runsS")
    result = runner.invoke(main, [
        "bench", "run",
        "--dataset", "simpleqa", "--dataset-file", str(qa1_path),
        "--methods", "ptrue,perplexity,su",
        "--model", "mock-model",
        "--mock", str(fixtures_dir), "--runs-root", str(root),
    ])
    assert result.exit_code == 0, result.output + _stderr(result)
    run_id = _run_id(result.output)
    return {
        r.method: r
        for r in read_qa_records(root / run_id / "records.jsonl")
    }


class TestBenchSamplingMethods:
    def test_ptrue_confidence(self, sampled_run):
        rec = sampled_run["ptrue"]
        assert rec.confidence == pytest.approx(0.9, abs=1e-12)
        assert rec.response == VANILLA["cq1"]  # the judged claim

    def test_perplexity_confidence(self, sampled_run):
        rec = sampled_run["perplexity"]
        assert rec.confidence == pytest.approx(math.exp(-0.2), abs=1e-12)
        assert rec.auxiliary["perplexity"] == pytest.approx(math.exp(0.2), abs=1e-12)

    def test_su_confidence_and_answer(self, sampled_run):
        rec = sampled_run["su"]
        entropy = -(0.1 * math.log(0.1) + 0.5 * math.log(0.5)
                    + 0.4 * math.log(0.4))
        assert rec.confidence == pytest.approx(1 - entropy / math.log(10))
        assert rec.response == "Paris."  # largest cluster speaks
        assert rec.auxiliary["cluster_sizes"] == [1, 5, 4]


class TestCliErrors:
    def test_unknown_method_exit_and_error_line(self, runner, qa_path,
                                                mapper_path, fixtures_dir,
                                                tmp_path):
        result = runner.invoke(main, [
            "bench", "run", "--dataset", "simpleqa",
            "--dataset-file", str(qa_path),
            "--methods", "lc,telepathy", "--model", "mock-model",
            "--mapper", str(mapper_path),
            "--mock", str(fixtures_dir), "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 2
        line = _stderr(result).strip().splitlines()[-1]
        assert line.startswith("config.unknown_method:")
        assert "telepathy" in line

    def test_lc_without_mapper(self, runner, qa_path, fixtures_dir, tmp_path):
        result = runner.invoke(main, [
            "bench", "run", "--dataset", "simpleqa",
            "--dataset-file", str(qa_path),
            "--methods", "lc", "--model", "mock-model",
            "--mock", str(fixtures_dir), "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 2
        assert _stderr(result).strip().startswith("config.invalid:")

    def test_unknown_model(self, runner, qa_path, fixtures_dir, tmp_path):
        result = runner.invoke(main, [
            "bench", "run", "--dataset", "simpleqa",
            "--dataset-file", str(qa_path),
            "--methods", "vnc", "--model", "ghost-model",
            "--mock", str(fixtures_dir), "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 2
        assert _stderr(result).strip().startswith("config.unknown_model:")

    def test_report_on_missing_run(self, runner, tmp_path):
        result = runner.invoke(main, [
            "bench", "report", "--run", "nope", "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 2
        assert _stderr(result).strip().startswith("input.invalid:")

    def test_grade_before_run(self, runner, tmp_path):
        (tmp_path / "bare").mkdir()
        result = runner.invoke(main, [
            "bench", "grade", "--run", "bare", "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 2
        assert "records.jsonl" in _stderr(result)


class TestMethodParsing:
    def test_alias_and_order(self):
        assert parse_methods("lc,lc+,vnc") == ["lc", "lc_plus", "vnc"]

    def test_alias_collapses_with_canonical(self):
        assert parse_methods("lc+,lc_plus") == ["lc_plus"]

    def test_unknown_method_raises(self):
        with pytest.raises(UnknownMethodError):
            parse_methods("lc,telepathy")

    def test_list_input(self):
        assert parse_methods(["su", "ptrue"]) == ["su", "ptrue"]


@pytest.fixture(scope="class")
def generated(runner, tmp_path_factory):
    questions = synth.make_questions(2, seed=11)
    data = tmp_path_factory.mktemp("corpusdata")
    qa = data / "questions.jsonl"
    write_qa_jsonl(qa, [q.item for q in questions])
    fixtures = tmp_path_factory.mktemp("corpusfix")
    synth.write_mock_script(
        fixtures / "gen.json", synth.generation_script_entries(questions)
    )
    root = tmp_path_factory.mktemp("corpusruns")
    result = runner.invoke(main, [
        "corpus", "generate", "--questions", str(qa),
        "--generators", "mock-model", "--mock", str(fixtures),
        "--runs-root", str(root),
    ])
    assert result.exit_code == 0, result.output + _stderr(result)
    run_dir = root / _run_id(result.output)
    return data, run_dir


class TestCorpusCli:
    def test_generate_counts(self, generated):
        _, run_dir = generated
        expressions = read_expressions_jsonl(run_dir / "expressions.jsonl")
        assert len(expressions) == 2 * 5 * 10
        manifest = json.loads((run_dir / "manifest-corpus-generate.json").read_text())
        assert manifest["counts"]["expressions"] == 100

    def test_screen_and_aggregate_match_library_pipeline(
            self, generated, runner, tmp_path):
        data, run_dir = generated
        expressions = read_expressions_jsonl(run_dir / "expressions.jsonl")
        crowd = synth.synthesize_crowd(expressions, seed=4)
        surveys_path = data / "surveys.jsonl"
        annotations_path = data / "annotations.csv"
        write_surveys_jsonl(surveys_path, crowd.surveys)
        write_annotations_csv(annotations_path, crowd.annotations)

        screen = runner.invoke(main, [
            "corpus", "screen", "--surveys", str(surveys_path),
            "--annotations", str(annotations_path),
            "--runs-root", str(tmp_path),
        ])
        assert screen.exit_code == 0, _stderr(screen)
        screen_dir = tmp_path / _run_id(screen.output)
        screening_json = json.loads((screen_dir / "screening.json").read_text())

        agg = runner.invoke(main, [
            "corpus", "aggregate",
            "--expressions", str(run_dir / "expressions.jsonl"),
            "--annotations", str(annotations_path),
            "--surveys", str(surveys_path),
            "--runs-root", str(tmp_path),
        ])
        assert agg.exit_code == 0, _stderr(agg)
        agg_dir = tmp_path / _run_id(agg.output)
        cli_entries = read_benchmark_jsonl(agg_dir / "benchmark.jsonl")

        # independent pass through the library, stage by stage
        by_id = {e.id: e for e in expressions}
        screening = screen_survey_workers(crowd.surveys, crowd.annotations)
        assert screening_json["acceptance_rate"] == pytest.approx(
            screening.acceptance_rate
        )
        surviving = apply_screening(crowd.annotations, screening)
        refusals = {e.id for e in expressions if e.is_refusal}
        responsible = identify_responsible_workers(surviving, refusals)
        bounds = compute_level_bounds(
            collect_scores_by_level(surviving, by_id, responsible)
        )
        kept = filter_annotations(surviving, bounds, by_id)
        expected = aggregate_benchmark(kept, by_id)
        assert [e.as_dict() for e in cli_entries] == [
            e.as_dict() for e in expected.entries
        ]
        sub = read_benchmark_jsonl(agg_dir / "sub_threshold.jsonl")
        assert len(sub) == len(expected.sub_threshold)


@pytest.fixture(scope="class")
def trained_artifacts(runner, tmp_path_factory):
    data = tmp_path_factory.mktemp("mapperdata")
    questions = synth.make_questions(2, seed=5)
    expressions = synth.synthesize_corpus(questions, ["gen-a"], seed=5)
    expr_path = data / "expressions.jsonl"
    write_expressions_jsonl(expr_path, expressions)
    root = tmp_path_factory.mktemp("mapperruns")
    out = data / "mapper-cli.pt"
    result = runner.invoke(main, [
        "mapper", "train", "--expressions", str(expr_path),
        "--epochs", "1", "--seed", "3", "--out", str(out),
        "--runs-root", str(root),
    ])
    assert result.exit_code == 0, result.output + _stderr(result)
    return data, root / _run_id(result.output), out


class TestMapperCli:
    def test_train_writes_weights_and_manifest(self, trained_artifacts):
        data, run_dir, out = trained_artifacts
        assert out.exists()
        manifest = json.loads((run_dir / "mapper_manifest.json").read_text())
        assert manifest["n_examples"] == 100
        assert manifest["provenance"] == "llm_labeled"
        assert re.fullmatch(r"[0-9a-f]+", manifest["version_hash"])

    def test_eval_reports_mse(self, trained_artifacts, runner, tmp_path):
        data, _, out = trained_artifacts
        bench_path = data / "bench.jsonl"
        write_benchmark_jsonl(bench_path, [
            BenchmarkEntry("e1", "I'm positive it is 1853.",
                           ConfidenceLevel.HIGH, (90, 95), 92.5),
            BenchmarkEntry("e2", "I am not sure at all, sorry.",
                           ConfidenceLevel.COMPLETELY_UNCERTAIN, (0, 5), 2.5),
        ])
        result = runner.invoke(main, [
            "mapper", "eval", "--model", str(out),
            "--benchmark", str(bench_path), "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 0, _stderr(result)
        assert result.output.startswith("mse ")
        eval_json = json.loads(
            (tmp_path / _run_id(result.output) / "eval.json").read_text()
        )
        assert eval_json["mse"] >= 0.0
        assert eval_json["entries"] == 2

    def test_score_prints_confidence(self, trained_artifacts, runner):
        _, _, out = trained_artifacts
        result = runner.invoke(main, [
            "mapper", "score", "--model", str(out),
            "--text", "I am absolutely certain the answer is 1853.",
        ])
        assert result.exit_code == 0, _stderr(result)
        value = float(result.output.strip())
        assert 0.0 <= value <= 1.0

    def test_train_requires_exactly_one_source(self, runner, trained_artifacts,
                                               tmp_path):
        data, _, _ = trained_artifacts
        result = runner.invoke(main, [
            "mapper", "train", "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 2
        assert _stderr(result).strip().startswith("config.invalid:")


@pytest.fixture(scope="class")
def sft_world(runner, tmp_path_factory):
    questions = synth.make_questions(3, seed=9)
    data = tmp_path_factory.mktemp("sftdata")
    qa = data / "questions.jsonl"
    write_qa_jsonl(qa, [q.item for q in questions])

    entries = []
    gold0 = questions[0].item.gold_targets[0]
    answers = {
        questions[0].item.question: [f"It is {gold0}."] * 5,
        questions[1].item.question: [
            "One.", "Two.", "Three.", "Four.", "Five."
        ],
        questions[2].item.question: ["A.", "A.", "A.", "B.", "B."],
    }
    for question, texts in answers.items():
        entries.append({
            "contains": f"Question: {question}\nAnswer:",
            "responses": [{"text": t} for t in texts],
        })
    # generation prompts carry the gold answer right after "Answer:",
    # so these keys are strictly more specific; they must come first
    entries = synth.generation_script_entries(questions) + entries
    fixtures = tmp_path_factory.mktemp("sftfix")
    synth.write_mock_script(fixtures / "script.json", entries)
    root = tmp_path_factory.mktemp("sftruns")
    return questions, qa, fixtures, root


@pytest.fixture(scope="class")
def labeled(sft_world, runner):
    questions, qa, fixtures, root = sft_world
    result = runner.invoke(main, [
        "sft", "label", "--questions", str(qa),
        "--base-model", "mock-model", "--n", "5",
        "--mock", str(fixtures), "--runs-root", str(root),
    ])
    assert result.exit_code == 0, result.output + _stderr(result)
    return root / _run_id(result.output)


@pytest.fixture(scope="class")
def built(sft_world, labeled, runner):
    questions, qa, fixtures, root = sft_world
    result = runner.invoke(main, [
        "sft", "build", "--labels", str(labeled / "labels.jsonl"),
        "--questions", str(qa), "--generators", "mock-model",
        "--pairs-per-question", "8",
        "--mock", str(fixtures), "--runs-root", str(root),
    ])
    assert result.exit_code == 0, result.output + _stderr(result)
    return root / _run_id(result.output)


class TestSftCli:
    def test_labels_match_sampled_agreement(self, labeled):
        rows = {row["question_id"]: row for row in
                iter_jsonl(labeled / "labels.jsonl")}
        assert len(rows) == 3
        assert rows["syn-0000"]["level"] == "high"  # unanimous
        assert rows["syn-0001"]["level"] == "completely_uncertain"
        assert rows["syn-0002"]["semantic_confidence"] == pytest.approx(
            1 + (0.6 * math.log(0.6) + 0.4 * math.log(0.4)) / math.log(5)
        )

    def test_build_pair_counts_and_levels(self, built, labeled):
        pairs = read_sft_jsonl(built / "sft.jsonl")
        assert len(pairs) == 3 * 8
        levels = {row["question_id"]: row["level"] for row in
                  iter_jsonl(labeled / "labels.jsonl")}
        assert all(p.level.value == levels[p.question_id] for p in pairs)

    def test_exclusion_list_round_trips_through_comment_header(self, built):
        text = (built / "excluded.txt").read_text()
        assert text.startswith("#")
        assert read_exclusion_list(built / "excluded.txt") == [
            "syn-0000", "syn-0001", "syn-0002"
        ]

    def test_conversational_export_shape(self, built):
        rows = list(iter_jsonl(built / "conversational.jsonl"))
        assert len(rows) == 24
        first = rows[0]
        assert [m["role"] for m in first["messages"]] == ["user", "assistant"]
        assert "Answer the following question" in first["messages"][0]["content"]

    def test_bench_run_consumes_exclusion_list(self, sft_world, built, runner,
                                               tmp_path):
        questions, qa, fixtures, _ = sft_world
        result = runner.invoke(main, [
            "bench", "run", "--dataset", "simpleqa",
            "--dataset-file", str(qa), "--methods", "vnc",
            "--model", "mock-model",
            "--exclude", str(built / "excluded.txt"),
            "--mock", str(fixtures), "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output + _stderr(result)
        run_dir = tmp_path / _run_id(result.output)
        assert read_qa_records(run_dir / "records.jsonl") == []
        manifest = json.loads(
            (run_dir / "manifest-bench-run.json").read_text()
        )
        assert manifest["counts"]["questions_loaded"] == 3
        assert manifest["counts"]["questions_used"] == 0

    def test_export_config_flags_deviations(self, runner, tmp_path):
        result = runner.invoke(main, [
            "sft", "export-config", "--epochs", "1",
            "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 0, _stderr(result)
        assert "deviation: epochs: 3 -> 1" in result.output
        run_dir = tmp_path / _run_id(result.output)
        config = json.loads((run_dir / "training_config.json").read_text())
        assert config["adapter_rank"] == 32
        assert config["scaling_factor"] == 32
        assert config["dropout"] == 0.05
        assert config["epochs"] == 1
        assert config["deviations"] == ["epochs: 3 -> 1"]

    def test_export_config_defaults_have_no_deviations(self, runner, tmp_path):
        result = runner.invoke(main, [
            "sft", "export-config", "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 0
        run_dir = tmp_path / _run_id(result.output)
        config = json.loads((run_dir / "training_config.json").read_text())
        assert config["deviations"] == []
        assert config["precision_note"] == "base model loaded in 8-bit"


class TestRunIdentity:
    def test_config_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": [2, 3]}) == config_hash({"b": [2, 3], "a": 1})

    def test_config_hash_sensitive_to_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_derive_run_id_shape(self):
        run_id = derive_run_id("bench.run", {"x": 1})
        assert run_id.startswith("bench-")
        assert run_id == derive_run_id("bench.run", {"x": 1})
        assert run_id != derive_run_id("bench.run", {"x": 2})

    def test_manifest_round_trip(self):
        manifest = RunManifest.start("bench.run", {"k": 1}, seeds={"s": 7})
        manifest.counts = {"records": 3}
        manifest.finish({"hits": 1, "misses": 2})
        clone = RunManifest.from_dict(json.loads(json.dumps(manifest.as_dict())))
        assert clone == manifest

    def test_run_id_override(self, runner, qa1_path, fixtures_dir, tmp_path):
        result = runner.invoke(main, [
            "bench", "run", "--dataset", "simpleqa",
            "--dataset-file", str(qa1_path), "--methods", "vnc",
            "--model", "mock-model", "--run-id", "custom-name",
            "--mock", str(fixtures_dir), "--runs-root", str(tmp_path),
        ])
        assert result.exit_code == 0, _stderr(result)
        assert (tmp_path / "custom-name" / "records.jsonl").exists()
