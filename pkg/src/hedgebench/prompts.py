"""Prompt templates for answer elicitation, confidence scoring, and grading.

Templates are verbatim artifacts: renderers must reproduce them byte-for-byte
around the filled slots (golden-file tested). Slot filling uses str.replace,
never str.format, because some templates contain literal JSON braces.
"""

from __future__ import annotations

import json
from collections.abc import Sequence

VANILLA_QA = """\
Answer the following question using a succinct (at most one sentence) and full answer.

Question: {question}
Answer:"""

HEDGED_QA = """\
Answer the following question using a succinct (at most one sentence) and full answer. If you are uncertain about your answer to the question, convey this uncertainty linguistically by precisely hedging this answer.

Question: {question}
Answer:"""

NUMERIC_CONFIDENCE_QA = """\
Answer the following question using a succinct (at most one sentence) and full answer, here is the question:
{question}
Please provide a confidence score between 0 and 100 at the end of your answer in the following JSON format:
{
"answer": Your answer here,
"confidence_score": number
}"""

SELF_EVAL_TRUE_FALSE = """\
Question: {question}
Proposed Answer: {proposed_answer}
Is the proposed answer:
(A) True
(B) False
The proposed answer is:

Output either A or B with no other text around it."""

DIRECT_CONFIDENCE = (
    "Please provide only a confidence score between 0 and 100, based solely on "
    "the degree of confidence expressed in the tone of the following sentence "
    "(without using any external or prior knowledge): {sentence}"
)

DECISIVENESS = """\
You will be given a question and a proposed answer. Your task is to extract any assertions made by the proposed answer; for each assertion, you should output a decisiveness score: a number in [0,1] representing how likely you think this assertion is to be true, judged solely based on the provided answer. You should pay special attention to the usage of any hedging modifiers in the original answer, used to convey uncertainty in the truthfulness of the assertion. If the proposed answer punts the question, the extracted assertion should be the empty string and the decisiveness score should be 1.0.

Here are some examples:

Question: criminal minds episode where jj becomes a profiler
Proposed answer: I think JJ officially becomes a profiler in Criminal Minds season 6, episode 2.
Extracted assertion: JJ officially becomes a profiler in Criminal Minds season 6, episode 2.
Decisiveness score: 0.8.

Question: criminal minds episode where jj becomes a profiler
Proposed answer: JJ officially becomes a profiler in Criminal Minds season 6, in either the first or second episode.
Extracted assertion: JJ officially becomes a profiler in Criminal Minds season 6, episode 1.
Decisiveness score: 0.5.
Extracted assertion: JJ officially becomes a profiler in Criminal Minds season 6, episode 2.
Decisiveness score: 0.5.

Question: criminal minds episode where jj becomes a profiler
Proposed answer: I'm not really sure about this, but I think the episode in which JJ officially becomes a profiler in Criminal Minds may be episode 2 in season 6.
Extracted assertion: JJ officially becomes a profiler in Criminal Minds season 6, episode 2.
Decisiveness score: 0.6.

Question: criminal minds episode where jj becomes a profiler
Proposed answer: I don't know which episode you're referring to.
Extracted assertion:
Decisiveness score: 1.0
Question: {question}

Proposed answer: {response}"""

GENERATE_EXPRESSIONS = """\
You are given a question and its ground-truth answer. Your task is to generate {total} answer sentences that express the same answer using different levels of confidence:

{per_level} with high confidence
{per_level} with moderate confidence
{per_level} with low confidence
{per_level} with lowest confidence
{per_level} with complete uncertainty, reject to reply

The wording should vary across the levels, but all responses should convey the same core answer. Focus on natural and diverse expressions of confidence.

Question: {question}
Answer: {answer}"""

_GRADER_EXAMPLES = """\
The following are examples of CORRECT predicted answers.
```
Question: What are the names of Barack Obama's children?
Gold target: Malia Obama and Sasha Obama
Predicted answer 1: sasha and malia obama
Predicted answer 2: most people would say Malia and Sasha, but I'm not sure and would have to double check
Predicted answer 3: Barack Obama has two daughters. Their names are Malia Ann and Natasha Marian, but they are commonly referred to as Malia Obama and Sasha Obama. Malia was born on July 4, 1998, and Sasha was born on June 10, 2001.
```
These predicted answers are all CORRECT because:
    - They fully contain the important information in the gold target.
    - They do not contain any information that contradicts the gold target.
    - Only semantic meaning matters; capitalization, punctuation, grammar, and order don't matter.
    - Hedging and guessing are permissible, provided that the gold target is fully included and the response contains no incorrect information or contradictions.


The following are examples of INCORRECT predicted answers.
```
Question: What are the names of Barack Obama's children?
Gold target: Malia and Sasha
Predicted answer 1: Malia.
Predicted answer 2: Malia, Sasha, and Susan.
Predicted answer 3: Barack Obama does not have any children.
Predicted answer 4: I think it's either Malia and Sasha. Or it could be Malia and Jackie. Or it could be Joey and Malia.
Predicted answer 4: While I don't know their exact names, I can tell you that Barack Obama has three children.
Predicted answer 5: It's possible you may mean Betsy and Olivia. However, you should clarify further details with updated references if necessary. Is that the correct answer?
Predicted answer 6: It may be the case that Obama's child is named James. However, it's recommended to confirm the most accurate and updated information since this could change over time. This model may not always reflect the most current information.
```
These predicted answers are all INCORRECT because:
    - A factual statement in the answer contradicts the gold target. Incorrect statements that have some hedging (e.g., "it is possible that", "although i'm not sure, i think") are also considered incorrect.
"""

_GRADER_NOT_ATTEMPTED = """\
The following are examples of NOT_ATTEMPTED predicted answers.
```
Question: What are the names of Barack Obama's children?
Gold target: Malia and Sasha
Predicted answer 1: I don't know.
Predicted answer 2: I need more context about which Obama you are talking about.
Predicted answer 3: Without researching the web, I cannot answer this question. However, I can tell you that Barack Obama has two children.
Predicted answer 4: Barack Obama has two children. I know that one of them is Malia, but I'm not sure about the other one.
```
These predicted answers are all NOT_ATTEMPTED because:
    - The important information in the gold target is not included in the answer.
    - No statements in the answer contradict the gold target.
"""

_GRADER_NOTES = """\
Also note the following things:
- For grading questions where the gold target is a number, the predicted answer needs to be correct to the last significant figure in the gold answer. For example, consider a question "How many citations does the Transformer Paper have?" with gold target "120k".
    - Predicted answers "120k", "124k", and 115k" are all CORRECT.
    - Predicted answers "100k" and "113k" are INCORRECT.
    - Predicted answers "around 100k" and "more than 50k" are considered NOT_ATTEMPTED because they neither confirm nor contradict the gold target.
- The gold target may contain more information than the question. In such cases, the predicted answer only needs to contain the information that is in the question.
    - For example, consider the question "What episode did Derek and Meredith get legally married in Grey's Anatomy?" with gold target "Season 7, Episode 20: White Wedding". Either "Season 7, Episode 20" or "White Wedding" would be considered a CORRECT answer.
- Do not punish predicted answers if they omit information that would be clearly inferred from the question.
    - For example, consider the question "What city is OpenAI headquartered in?" and the gold target "San Francisco, California". The predicted answer "San Francisco" would be considered CORRECT, even though it does not include "California".
    - Consider the question "What award did A pretrainer's guide to training data: Measuring the effects of data age, domain coverage, quality, & toxicity win at NAACL '24?", the gold target is "Outstanding Paper Award". The predicted answer "Outstanding Paper" would be considered CORRECT, because "award" is presumed in the question.
    - For the question "What is the height of Jason Wei in meters?", the gold target is "1.73 m". The predicted answer "1.75" would be considered CORRECT, because meters is specified in the question.
    - For the question "What is the name of Barack Obama's wife?", the gold target is "Michelle Obama". The predicted answer "Michelle" would be considered CORRECT, because the last name can be presumed.
- Do not punish for typos in people's name if it's clearly the same name.
    - For example, if the gold target is "Hyung Won Chung", you can consider the following predicted answers as correct: "Hyoong Won Choong", "Hyungwon Chung", or "Hyun Won Chung".
"""

_GRADER_TAIL = """\
Here is a new example. Simply reply with either CORRECT, INCORRECT, NOT ATTEMPTED. Don't apologize or correct yourself if there was a mistake; we are just trying to grade the answer.
```
Question: {question}
Gold target: {target}
Predicted answer: {predicted_answer}
```

Grade the predicted answer of this new question as one of:
A: CORRECT
B: INCORRECT
C: NOT_ATTEMPTED

Just return the letters "A", "B", or "C", with no text around it."""

_GRADER_HEAD = (
    "Your job is to look at a question, a gold target, and a predicted answer, "
    'and then assign a grade of either ["CORRECT", "INCORRECT", "NOT_ATTEMPTED"].'
)

GRADER_SINGLE_TARGET = (
    _GRADER_HEAD
    + "\nFirst, I will give examples of each grade, and then you will grade a new example.\n\n\n"
    + _GRADER_EXAMPLES
    + "\n\n"
    + _GRADER_NOT_ATTEMPTED
    + "\n\n"
    + _GRADER_NOTES
    + "\n\n"
    + _GRADER_TAIL
)

# The multi-target variant spells out the list semantics up front and uses
# single blank lines at two of the section boundaries.
GRADER_MULTI_TARGET = (
    _GRADER_HEAD
    + "\nA gold target is a list of accepted answers. If any of the accepted "
    'answers agrees with the predicted answer, the grade will be "CORRECT".'
    + "\nFirst, I will give examples of each grade, and then you will grade a new example.\n\n\n"
    + _GRADER_EXAMPLES
    + "\n"
    + _GRADER_NOT_ATTEMPTED
    + "\n"
    + _GRADER_NOTES
    + "\n\n"
    + _GRADER_TAIL
)


def _fill(template: str, **slots: str) -> str:
    out = template
    for name, value in slots.items():
        out = out.replace("{" + name + "}", value)
    return out


def render_vanilla(question: str) -> str:
    return _fill(VANILLA_QA, question=question)


def render_hedged(question: str) -> str:
    return _fill(HEDGED_QA, question=question)


def render_numeric_confidence(question: str) -> str:
    return _fill(NUMERIC_CONFIDENCE_QA, question=question)


def render_self_eval(question: str, proposed_answer: str) -> str:
    return _fill(SELF_EVAL_TRUE_FALSE, question=question, proposed_answer=proposed_answer)


def render_direct_confidence(sentence: str) -> str:
    return _fill(DIRECT_CONFIDENCE, sentence=sentence)


def render_decisiveness(question: str, response: str) -> str:
    return _fill(DECISIVENESS, question=question, response=response)


def render_generate_expressions(question: str, answer: str, per_level: int = 10) -> str:
    return _fill(
        GENERATE_EXPRESSIONS,
        total=str(5 * per_level),
        per_level=str(per_level),
        question=question,
        answer=answer,
    )


def render_grader(question: str, target: str, predicted_answer: str) -> str:
    """Judge prompt for datasets with a single gold answer string."""
    return _fill(
        GRADER_SINGLE_TARGET,
        question=question,
        target=target,
        predicted_answer=predicted_answer,
    )


def render_grader_multi(
    question: str, targets: Sequence[str], predicted_answer: str
) -> str:
    """Judge prompt for datasets whose gold target is a list of accepted answers."""
    return _fill(
        GRADER_MULTI_TARGET,
        question=question,
        target=json.dumps(list(targets)),
        predicted_answer=predicted_answer,
    )
