"""Seeded synthetic fixtures: templated factoid questions, hedged phrasing
banks, scripted generator responses, and a simulated annotation crowd with
known screening structure.

Everything here is deterministic given a seed. The crowd generator builds
surveys whose acceptance rate, responsible-worker set, and sub-threshold
expression pool are controlled by construction, so pipeline outputs can be
checked against independent brute-force oracles.
"""

from __future__ import annotations

import json
import random
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import AnnotationRecord, Survey, UncertainExpression, ValidationItem
from .datasets import QAItem
from .levels import LEVELS_ASCENDING, ConfidenceLevel

# Mean crowd score each hedging level is engineered to earn (0-100). Refusal
# expressions are special-cased: compliant annotators give them exactly 0.
LEVEL_ANCHOR = {
    ConfidenceLevel.COMPLETELY_UNCERTAIN: 2.0,
    ConfidenceLevel.LOWEST: 32.0,
    ConfidenceLevel.LOW: 52.0,
    ConfidenceLevel.MODERATE: 72.0,
    ConfidenceLevel.HIGH: 91.0,
}

_PLACES = (
    "Brenvale", "Ostermoor", "Caldona", "Virelles", "Tamarind Bay", "Ketzingen",
    "Port Alcott", "Sangrial", "Mirefield", "Duskan", "Ravelo", "Quintas",
    "Hollowmere", "Ferntide", "Ashgrove", "Lunden Cross", "Marblewick", "Torvane",
)
_PERSONS = (
    "Mira Kessler", "Jonas Ferrant", "Adaeze Okafor", "Tomas Hille", "Priya Raman",
    "Yusuf Demir", "Clara Voss", "Henrik Dahl", "Noor Haddad", "Elio Marchetti",
    "Sana Whitlock", "Rafael Quon", "Ingrid Solberg", "Dmitri Valen", "Aiko Maruyama",
    "Owen Pritchard", "Lucia Ferreira", "Kofi Mensah",
)
_EVENTS = (
    "charity concert", "chess tournament", "harvest festival", "bridge opening",
    "film premiere", "regatta", "poetry reading", "science fair", "marathon",
    "observatory dedication",
)
_THINGS = (
    "lighthouse", "railway station", "observatory", "printing press", "botanical garden",
    "clock tower", "suspension bridge", "opera house", "weather station", "public library",
)
_DETAILS = (
    "day",
    "month and year",
    "day, month, and year",
    "exact date",
    "precise year",
    "specific time",
)
_NOUNS = ("performance", "event", "ceremony", "match", "broadcast")


@dataclass(frozen=True)
class SynthQuestion:
    """A templated factoid with its assertive claim form and subject phrase."""

    item: QAItem
    claim: str  # "Brenvale was founded in 1853" (no trailing period)
    subject: str  # "the founding year of Brenvale"
    wrong_claim: str  # same shape, different value


def make_questions(
    n: int, seed: int = 0, family: str = "simpleqa", prefix: str = "syn"
) -> list[SynthQuestion]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        kind = i % 4
        if kind == 0:
            place = rng.choice(_PLACES)
            year, wrong = rng.randint(1500, 1980), None
            wrong = year + rng.choice((-7, -3, 4, 11))
            q = f"In what year was the town of {place} founded?"
            claim = f"the founding year of {place} is {year}"
            wrong_claim = f"the founding year of {place} is {wrong}"
            subject = f"the founding year of {place}"
            answer = str(year)
        elif kind == 1:
            person = rng.choice(_PERSONS)
            event = rng.choice(_EVENTS)
            age, wrong = rng.randint(17, 78), None
            wrong = age + rng.choice((-5, -2, 3, 6))
            q = f"How old was {person} at the time of the {event}?"
            claim = f"{person} was {age} years old at the time of the {event}"
            wrong_claim = f"{person} was {wrong} years old at the time of the {event}"
            subject = f"{person}'s exact age at the time"
            answer = str(age)
        elif kind == 2:
            thing = rng.choice(_THINGS)
            place = rng.choice(_PLACES)
            year = rng.randint(1820, 2005)
            wrong = year + rng.choice((-9, -4, 5, 8))
            q = f"In which year did the {thing} in {place} open?"
            claim = f"the {thing} in {place} opened in {year}"
            wrong_claim = f"the {thing} in {place} opened in {wrong}"
            subject = f"the opening year of the {thing} in {place}"
            answer = str(year)
        else:
            person = rng.choice(_PERSONS)
            seasons = rng.randint(2, 9)
            wrong = seasons + rng.choice((-1, 1, 2))
            q = f"For how many seasons did {person} stay on the programme?"
            claim = f"{person} stayed for {seasons} seasons"
            wrong_claim = f"{person} stayed for {wrong} seasons"
            subject = f"the number of seasons {person} stayed"
            answer = str(seasons)
        out.append(
            SynthQuestion(
                item=QAItem(
                    question_id=f"{prefix}-{i:04d}",
                    question=q,
                    gold_targets=(answer,),
                    dataset_family=family,
                ),
                claim=claim,
                subject=subject,
                wrong_claim=wrong_claim,
            )
        )
    return out


def _cap(s: str) -> str:
    return s[0].upper() + s[1:]


# Hedge templates per level. {claim} is the lowercase assertive clause,
# {Claim} its capitalized form, {subject} a noun phrase, {detail}/{noun}
# colorless fillers. Chosen so common hedging surface forms all appear.
_TEMPLATES = {
    ConfidenceLevel.HIGH: (
        "{Claim}.",
        "I'm positive that {claim}.",
        "It is certain that {claim}.",
        "Without a doubt, {claim}.",
        "I'm absolutely sure that {claim}.",
        "It is a fact that {claim}.",
        "I am fully confident that {claim}.",
        "Certainly, {claim}.",
        "There is no question that {claim}.",
        "{Claim}, definitely.",
        "It is beyond dispute that {claim}.",
        "I can say with complete confidence that {claim}.",
    ),
    ConfidenceLevel.MODERATE: (
        "{Claim}, most likely.",
        "I believe {claim}.",
        "It is likely that {claim}.",
        "{Claim}, as far as I know.",
        "My understanding is that {claim}.",
        "I'm pretty sure that {claim}.",
        "It seems that {claim}.",
        "From what I gather, {claim}.",
        "If I recall correctly, {claim}.",
        "The general consensus is that {claim}.",
        "Reportedly, {claim}.",
        "It appears that {claim}.",
        "{Claim}, apparently.",
        "Most accounts agree that {claim}.",
    ),
    ConfidenceLevel.LOW: (
        "I think {claim}.",
        "I'd guess that {claim}.",
        "Perhaps {claim}.",
        "I think {claim}, but I'm not sure.",
        "It might be that {claim}.",
        "{Claim}, I suppose.",
        "My best guess is that {claim}.",
        "It's possible that {claim}.",
        "I have the impression that {claim}.",
        "If memory serves, {claim}.",
        "I would say {claim}.",
        "{Claim}, or so I think.",
        "I seem to remember that {claim}.",
    ),
    ConfidenceLevel.LOWEST: (
        "I'm not sure, but it could be that {claim}.",
        "There's a chance that {claim}.",
        "Maybe {claim}, but I can't say for sure.",
        "I'm quite uncertain, but possibly {claim}.",
        "I cannot confirm the specific {detail} for that {noun}.",
        "I have a vague notion that {claim}.",
        "My recollection is unclear, but {claim} might be the case.",
        "It's a long shot, but {claim}.",
        "I can't verify it, but {claim} is possible.",
        "I'm not certain, but it might be that {claim}.",
        "Possibly {claim}, though I could easily be wrong.",
        "I really can't say for sure, but maybe {claim}.",
    ),
    ConfidenceLevel.COMPLETELY_UNCERTAIN: (
        "I'm sorry, but I don't know {subject}.",
        "I don't know {subject}.",
        "I'm unable to provide {subject}.",
        "I don't have sufficient information to answer that question.",
        "Unfortunately, I don't know the answer to that.",
        "Sorry, I'm not sure about {subject}.",
        "I don't have that information, so I'm unable to respond accurately.",
        "I'm afraid I don't know {subject}.",
        "I cannot answer this question.",
        "I don't have access to information confirming {subject}.",
    ),
}


def phrase(level: ConfidenceLevel, question: SynthQuestion, rng: random.Random) -> str:
    template = rng.choice(_TEMPLATES[level])
    return template.format(
        claim=question.claim,
        Claim=_cap(question.claim),
        subject=question.subject,
        detail=rng.choice(_DETAILS),
        noun=rng.choice(_NOUNS),
    )


def generation_response_text(
    question: SynthQuestion, per_level: int, rng: random.Random
) -> str:
    """A headed five-section numbered listing, strongest level first."""
    headers = {
        ConfidenceLevel.HIGH: "**High confidence:**",
        ConfidenceLevel.MODERATE: "**Moderate confidence:**",
        ConfidenceLevel.LOW: "**Low confidence:**",
        ConfidenceLevel.LOWEST: "**Lowest confidence:**",
        ConfidenceLevel.COMPLETELY_UNCERTAIN: "**Complete uncertainty / rejection:**",
    }
    lines = []
    counter = 1
    for level in reversed(LEVELS_ASCENDING):
        lines.append(headers[level])
        lines.append("")
        for _ in range(per_level):
            lines.append(f"{counter}. {phrase(level, question, rng)}")
            counter += 1
        lines.append("")
    return "\n".join(lines).rstrip("\n")


def synthesize_corpus(
    questions: Sequence[SynthQuestion],
    generators: Sequence[str],
    per_level: int = 10,
    seed: int = 0,
) -> list[UncertainExpression]:
    """Direct corpus construction (no gateway round-trip) for tests that
    need volume; id scheme matches the pipeline's."""
    out = []
    for question in questions:
        for model_id in generators:
            rng = random.Random((seed, question.item.question_id, model_id).__repr__())
            for level in reversed(LEVELS_ASCENDING):
                for i in range(1, per_level + 1):
                    out.append(
                        UncertainExpression(
                            id=f"{question.item.question_id}/{model_id}/{level.value}/{i}",
                            text=phrase(level, question, rng),
                            level_hint=level,
                            question_id=question.item.question_id,
                            source_model=model_id,
                            is_refusal=level is ConfidenceLevel.COMPLETELY_UNCERTAIN,
                        )
                    )
    return out


# --- Simulated annotation crowd ---------------------------------------------

VALIDATION_ITEMS = (
    ValidationItem("val-anchor-high", 90.0, 4.0),
    ValidationItem("val-anchor-upper", 70.0, 5.0),
    ValidationItem("val-anchor-mid", 50.0, 5.0),
    ValidationItem("val-anchor-lower", 30.0, 5.0),
    ValidationItem("val-anchor-refusal", 5.0, 3.0),
)


@dataclass
class SynthCrowd:
    surveys: list[Survey]
    annotations: list[AnnotationRecord]
    expressions: list[UncertainExpression]
    # ground truth about the construction, for oracle checks
    spam_survey_ids: set[str] = field(default_factory=set)
    responsible_worker_ids: set[str] = field(default_factory=set)
    sparse_expression_ids: set[str] = field(default_factory=set)

    @property
    def expressions_by_id(self) -> dict[str, UncertainExpression]:
        return {e.id: e for e in self.expressions}


def _good_validation_score(item: ValidationItem, rng: random.Random) -> int:
    lo = item.expert_mean - 1.9 * item.expert_std
    hi = item.expert_mean + 1.9 * item.expert_std
    raw = rng.gauss(item.expert_mean, 0.8 * item.expert_std)
    return int(round(min(hi, max(lo, max(0.0, min(100.0, raw))))))


def _spam_validation_score(item: ValidationItem, rng: random.Random) -> int:
    # reflect around 50 and push past the 2-sigma band
    off = 100.0 - item.expert_mean + rng.choice((-1, 1)) * 3 * item.expert_std
    return int(round(max(0.0, min(100.0, off))))


def _real_item_score(
    expr: UncertainExpression,
    archetype: str,
    bias: float,
    rng: random.Random,
) -> int:
    if expr.is_refusal:
        if archetype == "responsible":
            return 0
        if archetype == "spam":
            return rng.randint(0, 100)
        return rng.randint(1, 8)  # sloppy: small but instruction-breaking
    anchor = LEVEL_ANCHOR[expr.level_hint]
    if archetype == "spam":
        return rng.randint(0, 100)
    sigma = 6.0 if archetype == "responsible" else 9.0
    raw = rng.gauss(anchor + bias, sigma)
    return int(round(max(0.0, min(100.0, raw))))


def synthesize_crowd(
    expressions: Sequence[UncertainExpression],
    seed: int = 0,
    annotators_per_expression: int = 5,
    sparse_block_every: int = 6,
) -> SynthCrowd:
    """Build a survey cohort over the given expressions.

    Expressions are shuffled into blocks of 100; each block is annotated by
    ``annotators_per_expression`` workers, one survey each. Every
    ``sparse_block_every``-th block gets 3 spammer surveys (their validation
    answers are engineered to fail the 2-sigma screen) so its expressions
    survive with at most 2 annotations: a guaranteed sub-threshold pool. With
    the default spacing the survey acceptance rate is exactly 0.9.
    """
    rng = random.Random(seed)
    shuffled = list(expressions)
    rng.shuffle(shuffled)
    n_blocks = len(shuffled) // 100
    if n_blocks == 0:
        raise ValueError("need at least 100 expressions to form one survey block")
    crowd = SynthCrowd(surveys=[], annotations=[], expressions=list(expressions))

    # archetype is a worker property: a reused worker must behave the same
    # way in every survey or the global exact-zero responsibility rule breaks
    worker_seq = 0
    pools: dict[str, list[str]] = {"responsible": [], "sloppy": [], "spam": []}
    uses: dict[str, int] = {}
    biases: dict[str, float] = {}

    def next_worker(archetype: str, taken: set[str]) -> str:
        nonlocal worker_seq
        for w in pools[archetype]:
            if uses[w] < 5 and w not in taken:
                uses[w] += 1
                return w
        w = f"w{worker_seq:05d}"
        worker_seq += 1
        pools[archetype].append(w)
        uses[w] = 1
        biases[w] = rng.gauss(0.0, 2.0)
        return w

    n = annotators_per_expression
    for b in range(n_blocks):
        block = shuffled[b * 100 : (b + 1) * 100]
        sparse = sparse_block_every > 0 and (b % sparse_block_every == sparse_block_every - 1)
        if sparse:
            spam = max(1, n - 2)
            archetypes = ["spam"] * spam + ["responsible"] * (n - spam)
            crowd.sparse_expression_ids.update(e.id for e in block)
        else:
            responsible = max(1, round(0.6 * n))
            archetypes = ["responsible"] * responsible + ["sloppy"] * (n - responsible)
        taken: set[str] = set()
        for k, archetype in enumerate(archetypes):
            worker = next_worker(archetype, taken)
            taken.add(worker)
            survey_id = f"s{b:04d}-{k}"
            crowd.surveys.append(
                Survey(
                    survey_id=survey_id,
                    worker_id=worker,
                    real_item_ids=[e.id for e in block],
                    validation_items=list(VALIDATION_ITEMS),
                )
            )
            if archetype == "spam":
                crowd.spam_survey_ids.add(survey_id)
            elif archetype == "responsible":
                crowd.responsible_worker_ids.add(worker)
            for item in VALIDATION_ITEMS:
                score = (
                    _spam_validation_score(item, rng)
                    if archetype == "spam"
                    else _good_validation_score(item, rng)
                )
                crowd.annotations.append(
                    AnnotationRecord(item.expression_id, worker, survey_id, score)
                )
            for expr in block:
                crowd.annotations.append(
                    AnnotationRecord(
                        expr.id,
                        worker,
                        survey_id,
                        _real_item_score(expr, archetype, biases[worker], rng),
                    )
                )
    return crowd


# --- Mock gateway scripting ---------------------------------------------------

def write_mock_script(path: str | Path, entries: list[dict], default: dict | None = None) -> None:
    payload: dict = {"entries": entries}
    if default is not None:
        payload["default"] = default
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8"
    )


def generation_script_entries(
    questions: Sequence[SynthQuestion], per_level: int = 10, seed: int = 0
) -> list[dict]:
    """Mock entries answering the expression-generation prompt per question."""
    entries = []
    for q in questions:
        rng = random.Random((seed, "gen", q.item.question_id).__repr__())
        entries.append(
            {
                # gold answer after "Answer:" distinguishes the generation
                # prompt from the plain QA prompt for the same question
                "contains": f"Question: {q.item.question}\nAnswer: {q.item.gold_targets[0]}",
                "responses": [
                    {"text": generation_response_text(q, per_level, rng)}
                ],
            }
        )
    return entries
