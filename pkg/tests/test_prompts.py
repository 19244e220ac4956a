"""Byte-identity of rendered prompts against frozen golden files."""

import pathlib

import pytest

from hedgebench import prompts

GOLDENS = pathlib.Path(__file__).parent / "goldens"

QUESTION = (
    "Which one of the 1990 Fly Girls from the series In Living Color "
    "stayed for five seasons?"
)
TARGET = "Deidre Lang"
PREDICTED = "I believe Deidre Lang stayed for all five seasons."
SENTENCE = "If I recall correctly, it might have been 26 October 2021."


def golden(name: str) -> str:
    return (GOLDENS / f"{name}.golden.txt").read_text(encoding="utf-8")


CASES = [
    ("vanilla", lambda: prompts.render_vanilla(QUESTION)),
    ("lc_plus", lambda: prompts.render_hedged(QUESTION)),
    ("vnc", lambda: prompts.render_numeric_confidence(QUESTION)),
    ("ptrue", lambda: prompts.render_self_eval(QUESTION, TARGET)),
    ("direct_mapping", lambda: prompts.render_direct_confidence(SENTENCE)),
    ("decisiveness", lambda: prompts.render_decisiveness(QUESTION, PREDICTED)),
    (
        "grader_simpleqa",
        lambda: prompts.render_grader(QUESTION, TARGET, PREDICTED),
    ),
    (
        "grader_popqa",
        lambda: prompts.render_grader_multi(
            QUESTION, ["Deidre Lang", "Deidre"], PREDICTED
        ),
    ),
    (
        "generate_expressions",
        lambda: prompts.render_generate_expressions(
            "At what age was Ken Noda invited by President Ronald Reagan and "
            "First Lady Nancy Reagan to perform at the White House?",
            "20",
            per_level=10,
        ),
    ),
]


@pytest.mark.parametrize("name,render", CASES, ids=[c[0] for c in CASES])
def test_rendered_prompt_matches_golden(name, render):
    assert render() == golden(name)


def test_no_unfilled_slots_outside_json_skeleton():
    # the numeric-confidence prompt legitimately keeps literal JSON braces
    rendered = prompts.render_numeric_confidence(QUESTION)
    assert "{question}" not in rendered
    assert '"confidence_score": number' in rendered
    for name, render in CASES:
        if name in ("vnc",):
            continue
        text = render()
        assert "{question}" not in text
        assert "{target}" not in text
        assert "{predicted_answer}" not in text


def test_multi_target_renders_json_list():
    text = prompts.render_grader_multi(QUESTION, ("A1", "A2"), PREDICTED)
    assert 'Gold target: ["A1", "A2"]' in text
