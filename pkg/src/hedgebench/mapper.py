"""Hedge-to-confidence regressor plus the two judge-prompt baselines.

The trained mapper is a small bidirectional transformer encoder with a
single linear head and sigmoid output, fit with MSE against targets in
[0, 1].  Targets come either from generation-time levels (0, .25, .5,
.75, 1) or from mean human scores divided by 100.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import pathlib
import random
import re
from typing import Callable, Iterable, Mapping, Sequence

import torch
from torch import nn

from .corpus import BenchmarkEntry
from .errors import InputError, LeakageError, MappingError
from .gateway import CompletionRequest, Gateway
from .prompts import render_decisiveness, render_direct_confidence

PAD_ID = 0
UNK_ID = 1

_WORD_RE = re.compile(r"[a-z0-9']+")

_NUMBER_RE = re.compile(r"[-+]?[0-9]*\.?[0-9]+")

# one fixed sentence per level, scores must come out strictly increasing
CANONICAL_LADDER = (
    "I'm sorry, but I don't know the founding year of Pajarito, Boyacá.",
    "I cannot confirm the specific day, month, and year for that performance.",
    "I think the founding year of Pajarito, Boyacá, was 1853.",
    "I believe the founding year of Pajarito, Boyacá, is 1853.",
    "I'm positive that the founding year of Pajarito, Boyacá, is 1853.",
)

_ASSERTION_RE = re.compile(
    r"^[ \t]*Extracted assertion:[ \t]*(.*?)[ \t]*$", re.MULTILINE
)
_SCORE_RE = re.compile(
    r"^[ \t]*Decisiveness score:[ \t]*([0-9]*\.?[0-9]+)[ \t]*\.?[ \t]*$",
    re.MULTILINE,
)


def normalize_text(text: str) -> str:
    # curly quotes show up in generated hedges; fold them before matching
    return text.replace("’", "'").replace("‘", "'").strip()


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(normalize_text(text).lower())


def build_vocab(texts: Iterable[str], min_count: int = 1) -> dict[str, int]:
    counts: dict[str, int] = {}
    for text in texts:
        for tok in tokenize(text):
            counts[tok] = counts.get(tok, 0) + 1
    vocab = {"<pad>": PAD_ID, "<unk>": UNK_ID}
    for tok in sorted(counts):
        if counts[tok] >= min_count:
            vocab[tok] = len(vocab)
    return vocab


def encode(text: str, vocab: Mapping[str, int], max_len: int) -> list[int]:
    ids = [vocab.get(tok, UNK_ID) for tok in tokenize(text)]
    return ids[:max_len]


@dataclasses.dataclass(frozen=True)
class MapperHyperparams:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int = 256
    max_len: int = 64
    dropout: float = 0.1
    # unknown-word rate at inference is high (novel entities); train for it
    word_dropout: float = 0.1
    lr: float = 2e-3
    batch_size: int = 32
    epochs: int = 30
    val_fraction: float = 0.1
    seed: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class MapperTrainingExample:
    text: str
    target: float

    def __post_init__(self) -> None:
        if not normalize_text(self.text):
            raise InputError("training example with empty text")
        if not 0.0 <= self.target <= 1.0:
            raise InputError(f"target {self.target} outside [0, 1]")


def examples_from_levels(expressions) -> list[MapperTrainingExample]:
    """Generation-time labels: the level target of each hedged sentence."""
    from .levels import LEVEL_TARGET

    return [
        MapperTrainingExample(e.text, LEVEL_TARGET[e.level_hint])
        for e in expressions
    ]


def examples_from_entries(entries) -> list[MapperTrainingExample]:
    """Human labels: mean crowd score over 100, e.g. from sub-threshold items."""
    return [
        MapperTrainingExample(e.text, e.mean_score / 100.0) for e in entries
    ]


class _EncoderRegressor(nn.Module):
    def __init__(self, vocab_size: int, hp: MapperHyperparams) -> None:
        super().__init__()
        self.embed = nn.Embedding(vocab_size, hp.d_model, padding_idx=PAD_ID)
        self.pos = nn.Embedding(hp.max_len, hp.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=hp.d_model,
            nhead=hp.n_heads,
            dim_feedforward=hp.ffn_dim,
            dropout=hp.dropout,
            activation="gelu",
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=hp.n_layers)
        self.head = nn.Linear(hp.d_model, 1)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        mask = ids.eq(PAD_ID)
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.embed(ids) + self.pos(positions)[None, :, :]
        x = self.encoder(x, src_key_padding_mask=mask)
        keep = (~mask).unsqueeze(-1).float()
        pooled = (x * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        return torch.sigmoid(self.head(pooled)).squeeze(-1)


@dataclasses.dataclass
class MapperModel:
    """Trained regressor with enough context to reload and audit it."""

    vocab: dict[str, int]
    hyperparams: MapperHyperparams
    module: _EncoderRegressor
    provenance: str  # "llm_labeled" or "human_labeled"
    manifest: dict

    @property
    def version_hash(self) -> str:
        blob = b"".join(
            t.detach().cpu().numpy().tobytes()
            for _, t in sorted(self.module.state_dict().items())
        )
        blob += json.dumps(sorted(self.vocab.items())).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _batch(ids_list: Sequence[list[int]], max_len: int) -> torch.Tensor:
    width = max(1, min(max_len, max(len(ids) for ids in ids_list)))
    out = torch.full((len(ids_list), width), PAD_ID, dtype=torch.long)
    for row, ids in enumerate(ids_list):
        if ids:
            out[row, : len(ids)] = torch.tensor(ids[:width], dtype=torch.long)
    return out


def _mse(
    module: _EncoderRegressor,
    encoded: Sequence[list[int]],
    targets: Sequence[float],
    max_len: int,
) -> float:
    if not encoded:
        return 0.0
    module.eval()
    with torch.no_grad():
        preds = module(_batch(encoded, max_len))
    diff = preds - torch.tensor(targets, dtype=preds.dtype)
    return float((diff * diff).mean())


def check_leakage(
    examples: Sequence[MapperTrainingExample], benchmark_texts: Iterable[str]
) -> None:
    held_out = {normalize_text(t) for t in benchmark_texts}
    offenders = sorted(
        {ex.text for ex in examples if normalize_text(ex.text) in held_out}
    )
    if offenders:
        raise LeakageError(offenders)


def train_mapper(
    examples: Sequence[MapperTrainingExample],
    hyperparams: MapperHyperparams | None = None,
    benchmark_texts: Iterable[str] = (),
    provenance: str = "llm_labeled",
) -> MapperModel:
    """Fit encoder + sigmoid head with MSE; deterministic for a fixed seed."""
    hp = hyperparams or MapperHyperparams()
    if provenance not in ("llm_labeled", "human_labeled"):
        raise InputError(f"unknown provenance tag {provenance!r}")
    if len(examples) < 100:
        raise InputError(
            f"need at least 100 training examples, got {len(examples)}"
        )
    check_leakage(examples, benchmark_texts)

    torch.set_num_threads(1)
    torch.manual_seed(hp.seed)

    vocab = build_vocab(ex.text for ex in examples)
    module = _EncoderRegressor(len(vocab), hp)

    order = list(range(len(examples)))
    random.Random(hp.seed).shuffle(order)
    n_val = int(len(order) * hp.val_fraction)
    val_idx, train_idx = order[:n_val], order[n_val:]

    enc = [encode(ex.text, vocab, hp.max_len) for ex in examples]
    targets = [ex.target for ex in examples]
    train_enc = [enc[i] for i in train_idx]
    train_t = [targets[i] for i in train_idx]
    val_enc = [enc[i] for i in val_idx]
    val_t = [targets[i] for i in val_idx]

    opt = torch.optim.Adam(module.parameters(), lr=hp.lr)
    loss_fn = nn.MSELoss()
    shuffler = random.Random(hp.seed + 1)
    dropper = random.Random(hp.seed + 2)
    best_val = math.inf
    best_state = {k: v.clone() for k, v in module.state_dict().items()}
    final_train = math.inf

    for _ in range(hp.epochs):
        module.train()
        rows = list(range(len(train_enc)))
        shuffler.shuffle(rows)
        epoch_loss, seen = 0.0, 0
        for start in range(0, len(rows), hp.batch_size):
            chunk = rows[start : start + hp.batch_size]
            batch_ids = []
            for i in chunk:
                toks = train_enc[i]
                if hp.word_dropout > 0.0:
                    toks = [
                        UNK_ID if dropper.random() < hp.word_dropout else t
                        for t in toks
                    ]
                batch_ids.append(toks)
            ids = _batch(batch_ids, hp.max_len)
            y = torch.tensor([train_t[i] for i in chunk])
            opt.zero_grad()
            loss = loss_fn(module(ids), y)
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(chunk)
            seen += len(chunk)
        final_train = epoch_loss / max(seen, 1)
        val = _mse(module, val_enc, val_t, hp.max_len) if val_enc else final_train
        if val < best_val:
            best_val = val
            best_state = {k: v.clone() for k, v in module.state_dict().items()}

    module.load_state_dict(best_state)
    module.eval()

    data_hash = hashlib.sha256(
        json.dumps([(ex.text, ex.target) for ex in examples]).encode()
    ).hexdigest()[:16]
    manifest = {
        "provenance": provenance,
        "n_examples": len(examples),
        "n_train": len(train_idx),
        "n_val": len(val_idx),
        "data_hash": data_hash,
        "hyperparams": hp.as_dict(),
        "final_train_mse": final_train,
        "best_val_mse": best_val if val_enc else None,
    }
    return MapperModel(vocab, hp, module, provenance, manifest)


def map_confidence(model: MapperModel, text: str) -> float:
    if not normalize_text(text):
        raise InputError("cannot score empty text")
    ids = encode(text, model.vocab, model.hyperparams.max_len)
    model.module.eval()
    with torch.no_grad():
        pred = model.module(_batch([ids], model.hyperparams.max_len))
    return float(pred[0])


def evaluate_mapper(
    model_or_fn: MapperModel | Callable[[str], float],
    benchmark: Sequence[BenchmarkEntry],
) -> float:
    """Mean squared error between 100x predictions and mean human scores."""
    if not benchmark:
        raise InputError("benchmark is empty")
    if isinstance(model_or_fn, MapperModel):
        predict = lambda text: map_confidence(model_or_fn, text)
    else:
        predict = model_or_fn
    total = 0.0
    for entry in benchmark:
        err = 100.0 * predict(entry.text) - entry.mean_score
        total += err * err
    return total / len(benchmark)


def save_mapper(model: MapperModel, path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "vocab": model.vocab,
            "hyperparams": model.hyperparams.as_dict(),
            "state_dict": model.module.state_dict(),
            "provenance": model.provenance,
            "manifest": model.manifest,
            "version_hash": model.version_hash,
        },
        path,
    )


def load_mapper(path: str | pathlib.Path) -> MapperModel:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    hp = MapperHyperparams(**payload["hyperparams"])
    module = _EncoderRegressor(len(payload["vocab"]), hp)
    module.load_state_dict(payload["state_dict"])
    module.eval()
    model = MapperModel(
        payload["vocab"], hp, module, payload["provenance"], payload["manifest"]
    )
    if model.version_hash != payload["version_hash"]:
        raise InputError(f"artifact at {path} failed its version-hash check")
    return model


def _first_number(text: str) -> float | None:
    match = _NUMBER_RE.search(text)
    return float(match.group()) if match else None


def llm_map_direct(
    text: str,
    gateway: Gateway,
    judge_model: str,
    temperature: float = 0.0,
) -> float:
    """Ask a judge for a 0-100 score; first number wins, one retry allowed."""
    prompt = render_direct_confidence(text)
    request = CompletionRequest(
        model_id=judge_model, prompt=prompt, temperature=temperature
    )
    last = ""
    for attempt in range(2):
        result = gateway.complete(request, sample_index=attempt)
        last = result.text
        value = _first_number(result.text)
        if value is not None and 0.0 <= value <= 100.0:
            return value / 100.0
    raise MappingError(
        f"judge gave no usable 0-100 score after retry; last response: {last!r}"
    )


@dataclasses.dataclass(frozen=True)
class DecisivenessResult:
    confidence: float | None
    assertions: tuple[tuple[str, float], ...]
    abstained: bool


def _parse_decisiveness(text: str) -> DecisivenessResult | None:
    assertions = _ASSERTION_RE.findall(text)
    scores = [float(s) for s in _SCORE_RE.findall(text)]
    if not assertions or len(assertions) != len(scores):
        return None
    if any(not 0.0 <= s <= 1.0 for s in scores):
        return None
    pairs = tuple(zip(assertions, scores))
    # a punt line (empty assertion, score 1.0) marks "no assertion made"
    real = [(a, s) for a, s in pairs if not (a == "" and s == 1.0)]
    if not real:
        return DecisivenessResult(None, pairs, abstained=True)
    mean = sum(s for _, s in real) / len(real)
    return DecisivenessResult(mean, pairs, abstained=False)


def llm_map_decisiveness(
    question: str,
    response_text: str,
    gateway: Gateway,
    judge_model: str,
    temperature: float = 0.0,
) -> DecisivenessResult:
    prompt = render_decisiveness(question, response_text)
    request = CompletionRequest(
        model_id=judge_model, prompt=prompt, temperature=temperature
    )
    last = ""
    for attempt in range(2):
        result = gateway.complete(request, sample_index=attempt)
        last = result.text
        parsed = _parse_decisiveness(result.text)
        if parsed is not None:
            return parsed
    raise MappingError(
        f"could not parse assertion/score pairs after retry; last response: {last!r}"
    )
