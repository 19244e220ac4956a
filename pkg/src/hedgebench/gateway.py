"""Provider-agnostic chat-completion access with disk caching, retries,
bounded per-provider parallelism, optional token log-probabilities, and a
reasoning-effort request knob. Downstream code only ever sees this interface
or a deterministic file-scripted mock of it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import requests

from .errors import CapabilityError, ConfigError, TransportError, UnknownModelError

log = logging.getLogger(__name__)

REASONING_EFFORTS = ("off", "minimal", "low", "moderate")


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int | None = None
    reasoning_effort: str | None = None
    want_logprobs: bool = False
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"sample count n={self.n} must be >= 1")
        if self.temperature < 0:
            raise ConfigError(f"temperature {self.temperature} must be >= 0")
        if self.reasoning_effort is not None and self.reasoning_effort not in REASONING_EFFORTS:
            raise ConfigError(
                f"reasoning_effort {self.reasoning_effort!r} not in {REASONING_EFFORTS}"
            )


@dataclass
class CompletionResult:
    text: str
    token_logprobs: list[tuple[str, float]] | None = None
    usage: dict = field(default_factory=dict)
    cache_hit: bool = False

    def as_dict(self) -> dict:
        return {
            "text": self.text,
            "token_logprobs": self.token_logprobs,
            "usage": self.usage,
        }

    @classmethod
    def from_dict(cls, d: dict, cache_hit: bool = False) -> "CompletionResult":
        lps = d.get("token_logprobs")
        if lps is not None:
            lps = [(t, float(p)) for t, p in lps]
        return cls(
            text=d["text"],
            token_logprobs=lps,
            usage=d.get("usage", {}),
            cache_hit=cache_hit,
        )


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    platform: str
    max_tokens: int | None = None
    reasoning_effort: str | None = None
    notes: str | None = None


class ModelRegistry:
    """Declarative model table: id, platform, max tokens, reasoning effort."""

    def __init__(self, specs: Sequence[ModelSpec]):
        self._by_id = {s.model_id: s for s in specs}
        if len(self._by_id) != len(specs):
            raise ConfigError("duplicate model_id in registry")

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelRegistry":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        specs = [ModelSpec(**row) for row in data["models"]]
        return cls(specs)

    @classmethod
    def bundled(cls) -> "ModelRegistry":
        path = Path(__file__).parent / "configs" / "models.json"
        return cls.from_file(path)

    def lookup(self, model_id: str) -> ModelSpec:
        try:
            return self._by_id[model_id]
        except KeyError:
            raise UnknownModelError(
                f"model {model_id!r} not in registry ({sorted(self._by_id)})"
            ) from None

    def __contains__(self, model_id: str) -> bool:
        return model_id in self._by_id

    def ids(self) -> list[str]:
        return sorted(self._by_id)


def cache_key(request: CompletionRequest, sample_index: int) -> str:
    payload = json.dumps(
        {
            "model_id": request.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "reasoning_effort": request.reasoning_effort,
            "sample_index": sample_index,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed JSON files; writes go through temp-file + rename."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            self.misses += 1
            return None
        self.hits += 1
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, payload: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, ensure_ascii=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def stats(self) -> dict:
        return {"hits": self.hits, "misses": self.misses}


class Provider:
    """One backend platform. Subclasses implement _call."""

    name = "abstract"
    supports_logprobs = False

    def complete(
        self, spec: ModelSpec, request: CompletionRequest, sample_index: int
    ) -> CompletionResult:
        if request.want_logprobs and not self.supports_logprobs:
            raise CapabilityError(
                f"provider {self.name!r} does not expose token log-probabilities"
            )
        return self._call(spec, request, sample_index)

    def _call(self, spec, request, sample_index):  # pragma: no cover - interface
        raise NotImplementedError


def _env_key(var: str) -> str:
    value = os.environ.get(var)
    if not value:
        raise ConfigError(f"environment variable {var} is not set")
    return value


class OpenAIProvider(Provider):
    name = "openai"
    supports_logprobs = True
    base_url = "https://api.openai.com/v1"

    def _call(self, spec, request, sample_index):
        body: dict = {
            "model": spec.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        max_tokens = request.max_tokens or spec.max_tokens
        if max_tokens:
            body["max_completion_tokens"] = max_tokens
        effort = request.reasoning_effort or spec.reasoning_effort
        if effort and effort != "off":
            body["reasoning_effort"] = effort
        if request.want_logprobs:
            body["logprobs"] = True
        if request.temperature > 0:
            body["seed"] = sample_index
        resp = requests.post(
            f"{self.base_url}/chat/completions",
            headers={"Authorization": f"Bearer {_env_key('OPENAI_API_KEY')}"},
            json=body,
            timeout=120,
        )
        if resp.status_code != 200:
            raise TransportError(f"openai http {resp.status_code}: {resp.text[:200]}")
        choice = resp.json()["choices"][0]
        lps = None
        if request.want_logprobs and choice.get("logprobs"):
            lps = [
                (t["token"], float(t["logprob"]))
                for t in choice["logprobs"]["content"]
            ]
        return CompletionResult(
            text=choice["message"]["content"],
            token_logprobs=lps,
            usage=resp.json().get("usage", {}),
        )


class TogetherProvider(Provider):
    name = "together"
    supports_logprobs = True
    base_url = "https://api.together.xyz/v1"

    def _call(self, spec, request, sample_index):
        body: dict = {
            "model": spec.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        max_tokens = request.max_tokens or spec.max_tokens
        if max_tokens:
            body["max_tokens"] = max_tokens
        effort = request.reasoning_effort or spec.reasoning_effort
        if effort and effort != "off":
            body["reasoning_effort"] = effort
        if request.want_logprobs:
            body["logprobs"] = 1
        if request.temperature > 0:
            body["seed"] = sample_index
        resp = requests.post(
            f"{self.base_url}/chat/completions",
            headers={"Authorization": f"Bearer {_env_key('TOGETHER_API_KEY')}"},
            json=body,
            timeout=120,
        )
        if resp.status_code != 200:
            raise TransportError(f"together http {resp.status_code}: {resp.text[:200]}")
        choice = resp.json()["choices"][0]
        lps = None
        lp = choice.get("logprobs")
        if request.want_logprobs and lp:
            lps = list(zip(lp["tokens"], map(float, lp["token_logprobs"])))
        return CompletionResult(
            text=choice["message"]["content"],
            token_logprobs=lps,
            usage=resp.json().get("usage", {}),
        )


class AnthropicProvider(Provider):
    name = "anthropic"
    supports_logprobs = False
    base_url = "https://api.anthropic.com/v1"

    def _call(self, spec, request, sample_index):
        effort = request.reasoning_effort or spec.reasoning_effort
        if effort and effort != "off":
            log.warning(
                "model %s: reasoning effort %r has no anthropic mapping; ignored",
                spec.model_id,
                effort,
            )
        body = {
            "model": spec.model_id,
            "max_tokens": request.max_tokens or spec.max_tokens or 1024,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        resp = requests.post(
            f"{self.base_url}/messages",
            headers={
                "x-api-key": _env_key("ANTHROPIC_API_KEY"),
                "anthropic-version": "2023-06-01",
            },
            json=body,
            timeout=120,
        )
        if resp.status_code != 200:
            raise TransportError(f"anthropic http {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        text = "".join(b.get("text", "") for b in data["content"])
        return CompletionResult(text=text, usage=data.get("usage", {}))


class MockProvider(Provider):
    """Deterministic provider scripted from fixture files.

    A script directory holds ``*.json`` files of the form::

        {"entries": [{"contains": "<prompt substring>",
                      "responses": [{"text": ..., "token_logprobs": [[tok, lp], ...]}]}],
         "default": {"text": "..."}}

    The first entry (file order, then list order) whose ``contains`` string
    occurs in the prompt wins; the response at index ``sample_index mod
    len(responses)`` is returned. Also instruments concurrency so tests can
    assert the gateway's parallelism bound.
    """

    name = "mock"
    supports_logprobs = True

    def __init__(self, script_dir: str | Path | None = None, latency: float = 0.0):
        self.entries: list[dict] = []
        self.default: dict | None = None
        self.latency = latency
        self.calls = 0
        self.prompts: list[str] = []
        self.fail_next = 0  # transient-failure injection for retry tests
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0
        if script_dir is not None:
            self.load_scripts(script_dir)

    def load_scripts(self, script_dir: str | Path) -> None:
        for path in sorted(Path(script_dir).glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            self.entries.extend(data.get("entries", []))
            if self.default is None and "default" in data:
                self.default = data["default"]

    def add_entry(self, contains: str, responses: list[dict]) -> None:
        self.entries.append({"contains": contains, "responses": responses})

    def _pick(self, prompt: str, sample_index: int) -> dict:
        for entry in self.entries:
            if entry["contains"] in prompt:
                responses = entry["responses"]
                return responses[sample_index % len(responses)]
        if self.default is not None:
            return self.default
        raise TransportError(f"mock has no script for prompt: {prompt[:80]!r}")

    def _call(self, spec, request, sample_index):
        with self._lock:
            self.calls += 1
            self.prompts.append(request.prompt)
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
            if self.fail_next > 0:
                self.fail_next -= 1
                self._in_flight -= 1
                raise TransportError("scripted transient failure")
        try:
            if self.latency:
                time.sleep(self.latency)
            raw = self._pick(request.prompt, sample_index)
            lps = raw.get("token_logprobs")
            if lps is not None:
                lps = [(t, float(p)) for t, p in lps]
            return CompletionResult(
                text=raw["text"], token_logprobs=lps, usage={"mock": True}
            )
        finally:
            with self._lock:
                self._in_flight -= 1


PROVIDER_TYPES = {
    "openai": OpenAIProvider,
    "together": TogetherProvider,
    "anthropic": AnthropicProvider,
    "mock": MockProvider,
}


class Gateway:
    """Front door: cache -> per-provider semaphore -> provider with retries."""

    def __init__(
        self,
        registry: ModelRegistry,
        cache_dir: str | Path,
        providers: dict[str, Provider] | None = None,
        max_parallel: int = 4,
        max_retries: int = 3,
        backoff: float = 0.25,
    ):
        self.registry = registry
        self.cache = ResponseCache(cache_dir)
        self.max_retries = max_retries
        self.backoff = backoff
        self.providers = providers or {}
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        self._sem_lock = threading.Lock()
        self.max_parallel = max_parallel

    def _provider(self, platform: str) -> Provider:
        if platform not in self.providers:
            try:
                self.providers[platform] = PROVIDER_TYPES[platform]()
            except KeyError:
                raise ConfigError(f"unknown platform {platform!r}") from None
        return self.providers[platform]

    def _semaphore(self, platform: str) -> threading.BoundedSemaphore:
        with self._sem_lock:
            if platform not in self._semaphores:
                self._semaphores[platform] = threading.BoundedSemaphore(self.max_parallel)
            return self._semaphores[platform]

    def _complete_one(
        self, request: CompletionRequest, sample_index: int
    ) -> CompletionResult:
        key = cache_key(request, sample_index)
        cached = self.cache.get(key)
        if cached is not None:
            return CompletionResult.from_dict(cached["result"], cache_hit=True)
        spec = self.registry.lookup(request.model_id)
        provider = self._provider(spec.platform)
        semaphore = self._semaphore(spec.platform)
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with semaphore:
                    result = provider.complete(spec, request, sample_index)
                break
            except CapabilityError:
                raise
            except (TransportError, requests.RequestException) as exc:
                last_error = exc
                log.warning(
                    "attempt %d/%d for %s failed: %s",
                    attempt + 1,
                    self.max_retries + 1,
                    request.model_id,
                    exc,
                )
        else:
            raise TransportError(
                f"exhausted {self.max_retries + 1} attempts for {request.model_id}: {last_error}"
            )
        self.cache.put(
            key,
            {
                "request": {**asdict(request), "sample_index": sample_index},
                "result": result.as_dict(),
            },
        )
        return result

    def complete(
        self, request: CompletionRequest, sample_index: int = 0
    ) -> CompletionResult:
        return self._complete_one(request, sample_index)

    def sample_n(self, request: CompletionRequest) -> list[CompletionResult]:
        return [self._complete_one(request, i) for i in range(request.n)]
