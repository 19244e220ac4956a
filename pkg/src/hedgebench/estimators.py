"""Per-question confidence estimators.

Each estimator produces an answer record carrying (response, confidence,
abstained). Confidence sources differ: a trained hedge mapper (LC/LC+), a
self-reported number (VNC), the True-token probability (P(True)), inverse
perplexity, or entailment-cluster entropy over repeated samples (SU).
"""

from __future__ import annotations

import dataclasses
import math
import re
import string
from typing import Callable, Sequence

from .datasets import QAItem
from .errors import InputError
from .gateway import CompletionRequest, Gateway
from .mapper import MapperModel, map_confidence
from .prompts import (
    render_hedged,
    render_numeric_confidence,
    render_self_eval,
    render_vanilla,
)

METHODS = ("lc", "lc_plus", "vnc", "ptrue", "perplexity", "su")

# stored bit-exact; the quoted-key pattern is tried first, first match wins
VNC_PATTERN_QUOTED = (
    r'"confidence_score"\s*:\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)'
)
VNC_PATTERN_BARE = (
    r"confidence_score\s*:\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"
)
_VNC_QUOTED = re.compile(VNC_PATTERN_QUOTED)
_VNC_BARE = re.compile(VNC_PATTERN_BARE)


@dataclasses.dataclass(frozen=True)
class QARecord:
    """One question/answer episode under one estimation method."""

    question_id: str
    question: str
    gold_targets: tuple[str, ...]
    dataset: str
    model_id: str
    method: str
    prompt_variant: str
    response: str
    confidence: float
    abstained: bool = False
    grade: str | None = None
    auxiliary: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}")

    def with_grade(self, grade: str, **auxiliary) -> "QARecord":
        merged = {**self.auxiliary, **auxiliary}
        return dataclasses.replace(self, grade=grade, auxiliary=merged)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gold_targets"] = list(self.gold_targets)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QARecord":
        d = dict(d)
        d["gold_targets"] = tuple(d["gold_targets"])
        return cls(**d)


def _ask(
    gateway: Gateway,
    model_id: str,
    prompt: str,
    temperature: float,
    want_logprobs: bool = False,
    n: int = 1,
):
    request = CompletionRequest(
        model_id=model_id,
        prompt=prompt,
        temperature=temperature,
        want_logprobs=want_logprobs,
        n=n,
    )
    if n == 1:
        return gateway.complete(request)
    return gateway.sample_n(request)


def estimate_lc(
    item: QAItem,
    gateway: Gateway,
    mapper: MapperModel,
    model_id: str,
    variant: str = "vanilla",
    temperature: float = 0.0,
) -> QARecord:
    """Answer, then score the answer's own hedging with the trained mapper.

    Abstention is not decided here: an explicit refusal surfaces later as a
    NOT_ATTEMPTED grade, which the metrics treat as abstaining.
    """
    if variant == "vanilla":
        prompt, method = render_vanilla(item.question), "lc"
    elif variant == "plus":
        prompt, method = render_hedged(item.question), "lc_plus"
    else:
        raise InputError(f"unknown LC variant {variant!r}")
    result = _ask(gateway, model_id, prompt, temperature)
    text = result.text.strip()
    if text:
        confidence = map_confidence(mapper, text)
    else:
        confidence = 0.0
    return QARecord(
        question_id=item.question_id,
        question=item.question,
        gold_targets=item.gold_targets,
        dataset=item.dataset_family,
        model_id=model_id,
        method=method,
        prompt_variant="hedged" if variant == "plus" else "vanilla",
        response=text,
        confidence=confidence,
    )


def extract_verbalized_confidence(text: str) -> tuple[float, bool]:
    """(confidence, extraction_failed): first pattern match wins, over 100."""
    match = _VNC_QUOTED.search(text) or _VNC_BARE.search(text)
    if match is None:
        return 0.0, True
    value = float(match.group(1)) / 100.0
    return min(max(value, 0.0), 1.0), False


def estimate_vnc(
    item: QAItem,
    gateway: Gateway,
    model_id: str,
    temperature: float = 0.0,
) -> QARecord:
    result = _ask(gateway, model_id, render_numeric_confidence(item.question), temperature)
    confidence, failed = extract_verbalized_confidence(result.text)
    aux = {"extraction_failed": True} if failed else {}
    return QARecord(
        question_id=item.question_id,
        question=item.question,
        gold_targets=item.gold_targets,
        dataset=item.dataset_family,
        model_id=model_id,
        method="vnc",
        prompt_variant="numeric",
        response=result.text.strip(),
        confidence=confidence,
        abstained=failed,
        auxiliary=aux,
    )


def estimate_ptrue(
    item: QAItem,
    proposed_answer: str,
    gateway: Gateway,
    model_id: str,
    temperature: float = 0.0,
) -> QARecord:
    """Probability the model assigns to calling its own answer correct.

    The choice token is read off the response; A means correct. Confidence
    is p(A) when A is emitted and 1 - p(B) when B is, without renormalizing
    over the two choice tokens.
    """
    prompt = render_self_eval(item.question, proposed_answer)
    result = _ask(gateway, model_id, prompt, temperature, want_logprobs=True)
    choice = result.text.strip().rstrip(".").upper()
    # the record's response stays the proposed answer: that is the claim the
    # confidence is about, and the text a judge must grade
    aux: dict = {"choice_response": result.text.strip()}
    abstained = False
    if not result.token_logprobs:
        raise InputError(
            f"no token log-probabilities returned for {item.question_id!r}"
        )
    logprob = result.token_logprobs[0][1]
    if choice == "A":
        confidence = math.exp(logprob)
    elif choice == "B":
        confidence = 1.0 - math.exp(logprob)
    else:
        confidence, abstained = 0.0, True
        aux["choice_parse_failed"] = True
    confidence = min(max(confidence, 0.0), 1.0)
    return QARecord(
        question_id=item.question_id,
        question=item.question,
        gold_targets=item.gold_targets,
        dataset=item.dataset_family,
        model_id=model_id,
        method="ptrue",
        prompt_variant="self_eval",
        response=proposed_answer,
        confidence=confidence,
        abstained=abstained,
        auxiliary=aux,
    )


def perplexity_from_logprobs(token_logprobs: Sequence[float]) -> tuple[float, float]:
    """(perplexity, confidence) from per-token log-likelihoods."""
    if not token_logprobs:
        raise InputError("zero-length generation has no perplexity")
    mean = sum(token_logprobs) / len(token_logprobs)
    perplexity = math.exp(-mean)
    return perplexity, math.exp(mean)


def estimate_perplexity(record_with_logprobs: QARecord) -> tuple[float, float]:
    """Read token log-probabilities off an answer record.

    Confidence is 1/perplexity: the bounded monotone inverse, so ranking
    metrics are unaffected by the choice.
    """
    logprobs = record_with_logprobs.auxiliary.get("token_logprobs")
    if not logprobs:
        raise InputError(
            f"record {record_with_logprobs.question_id!r} carries no token "
            "log-probabilities"
        )
    return perplexity_from_logprobs(logprobs)


def perplexity_record(
    item: QAItem,
    gateway: Gateway,
    model_id: str,
    temperature: float = 0.0,
) -> QARecord:
    result = _ask(
        gateway, model_id, render_vanilla(item.question), temperature, want_logprobs=True
    )
    logprobs = [lp for _, lp in result.token_logprobs or []]
    perplexity, confidence = perplexity_from_logprobs(logprobs)
    return QARecord(
        question_id=item.question_id,
        question=item.question,
        gold_targets=item.gold_targets,
        dataset=item.dataset_family,
        model_id=model_id,
        method="perplexity",
        prompt_variant="vanilla",
        response=result.text.strip(),
        confidence=confidence,
        auxiliary={
            "perplexity": perplexity,
            "token_logprobs": logprobs,
        },
    )


_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    text = text.replace("’", "'").lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def normalized_match_oracle(a: str, b: str, question: str = "") -> bool:
    """Default entailment stand-in: equality after answer normalization."""
    return normalize_answer(a) == normalize_answer(b)


@dataclasses.dataclass(frozen=True)
class SemanticClustering:
    generations: tuple[str, ...]
    clusters: tuple[tuple[int, ...], ...]  # 0-based index partition
    entropy: float
    flagged_pairs: tuple[tuple[int, int], ...] = ()

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)


def partition_entropy(sizes: Sequence[int]) -> float:
    n = sum(sizes)
    if n <= 0:
        raise InputError("entropy of an empty partition")
    return -sum((s / n) * math.log(s / n) for s in sizes if s)


def cluster_by_entailment(
    generations: Sequence[str],
    question: str,
    entailment_oracle: Callable[[str, str, str], bool] = normalized_match_oracle,
) -> SemanticClustering:
    """Greedy partition: join the first cluster whose representative
    bi-entails the new generation, else found a new cluster. An oracle
    failure on a pair counts as non-entailment and is flagged.
    """
    if len(generations) < 2:
        raise InputError("need at least two generations to cluster")
    clusters: list[list[int]] = []
    flagged: list[tuple[int, int]] = []
    for i, text in enumerate(generations):
        placed = False
        for cluster in clusters:
            rep_idx = cluster[0]
            rep = generations[rep_idx]
            try:
                both = entailment_oracle(rep, text, question) and entailment_oracle(
                    text, rep, question
                )
            except Exception:
                flagged.append((rep_idx, i))
                both = False
            if both:
                cluster.append(i)
                placed = True
                break
        if not placed:
            clusters.append([i])
    sizes = [len(c) for c in clusters]
    return SemanticClustering(
        generations=tuple(generations),
        clusters=tuple(tuple(c) for c in clusters),
        entropy=partition_entropy(sizes),
        flagged_pairs=tuple(flagged),
    )


def su_to_confidence(entropy: float, n: int) -> float:
    """1 - entropy / ln(n), the linear bridge onto the [0, 1] scale."""
    if n < 1:
        raise InputError(f"sample count {n} must be positive")
    if n == 1:
        if entropy != 0.0:
            raise InputError("a single sample has zero entropy by definition")
        return 1.0
    ceiling = math.log(n)
    if not -1e-12 <= entropy <= ceiling + 1e-12:
        raise InputError(f"entropy {entropy} outside [0, ln {n}]")
    return min(max(1.0 - entropy / ceiling, 0.0), 1.0)


def estimate_su(
    item: QAItem,
    gateway: Gateway,
    model_id: str,
    n: int = 10,
    temperature: float = 1.0,
    entailment_oracle: Callable[[str, str, str], bool] = normalized_match_oracle,
) -> QARecord:
    """Sample n answers, cluster by bidirectional entailment, convert the
    cluster entropy to a confidence. The reported answer is the first
    member of the largest cluster."""
    results = _ask(gateway, model_id, render_vanilla(item.question), temperature, n=n)
    texts = [r.text.strip() for r in results]
    clustering = cluster_by_entailment(texts, item.question, entailment_oracle)
    largest = max(clustering.clusters, key=lambda c: (len(c), -c[0]))
    confidence = su_to_confidence(clustering.entropy, len(texts))
    return QARecord(
        question_id=item.question_id,
        question=item.question,
        gold_targets=item.gold_targets,
        dataset=item.dataset_family,
        model_id=model_id,
        method="su",
        prompt_variant="vanilla",
        response=texts[largest[0]],
        confidence=confidence,
        auxiliary={
            "entropy": clustering.entropy,
            "cluster_sizes": list(clustering.sizes),
            "generations": texts,
            "flagged_pairs": [list(p) for p in clustering.flagged_pairs],
        },
    )
