import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest

from hedgebench.errors import CapabilityError, ConfigError, TransportError
from hedgebench.gateway import (
    CompletionRequest,
    Gateway,
    MockProvider,
    ModelRegistry,
    ModelSpec,
    cache_key,
)


@pytest.fixture
def registry():
    return ModelRegistry(
        [
            ModelSpec("mock-model", "mock"),
            ModelSpec("other-mock", "mock"),
        ]
    )


@pytest.fixture
def mock_provider():
    p = MockProvider()
    p.add_entry("capital of France", [{"text": "Paris."}])
    p.add_entry(
        "two plus two",
        [{"text": "4"}, {"text": "four"}, {"text": "2+2=4"}],
    )
    p.default = {"text": "fallback"}
    return p


@pytest.fixture
def gateway(tmp_path, registry, mock_provider):
    return Gateway(
        registry,
        cache_dir=tmp_path / "cache",
        providers={"mock": mock_provider},
        max_parallel=3,
        max_retries=2,
        backoff=0.001,
    )


def req(prompt, **kw):
    return CompletionRequest(model_id="mock-model", prompt=prompt, **kw)


class TestCache:
    def test_second_call_is_a_hit_with_identical_text(self, gateway, mock_provider):
        first = gateway.complete(req("What is the capital of France?"))
        second = gateway.complete(req("What is the capital of France?"))
        assert not first.cache_hit
        assert second.cache_hit
        assert second.text == first.text == "Paris."
        assert mock_provider.calls == 1

    def test_reload_from_disk_round_trips(self, tmp_path, registry, mock_provider):
        gw1 = Gateway(registry, tmp_path / "c", providers={"mock": mock_provider})
        r = req("two plus two", want_logprobs=True, temperature=1.0, n=3)
        originals = gw1.sample_n(r)
        fresh_provider = MockProvider()  # would fail if actually called
        gw2 = Gateway(registry, tmp_path / "c", providers={"mock": fresh_provider})
        replayed = gw2.sample_n(r)
        assert [x.text for x in replayed] == [x.text for x in originals]
        assert all(x.cache_hit for x in replayed)
        assert fresh_provider.calls == 0

    def test_key_covers_sampling_identity_only(self):
        a = cache_key(req("p", temperature=0.5), 0)
        assert a == cache_key(req("p", temperature=0.5, want_logprobs=True), 0)
        assert a != cache_key(req("p", temperature=0.7), 0)
        assert a != cache_key(req("q", temperature=0.5), 0)
        assert a != cache_key(req("p", temperature=0.5), 1)
        assert a != cache_key(
            CompletionRequest("x", "p", temperature=0.5, reasoning_effort="low"), 0
        )

    def test_cached_prompt_stored_byte_identical(self, gateway, tmp_path):
        prompt = "two plus two\nwith a newline and unicode ’"
        gateway.complete(req(prompt))
        files = list((tmp_path / "cache").rglob("*.json"))
        assert len(files) == 1
        stored = json.loads(files[0].read_text(encoding="utf-8"))
        assert stored["request"]["prompt"] == prompt

    def test_no_stray_temp_files(self, gateway, tmp_path):
        for i in range(5):
            gateway.complete(req(f"two plus two #{i}"))
        assert not list((tmp_path / "cache").rglob("*.tmp"))


class TestRetries:
    def test_transient_failures_then_success(self, gateway, mock_provider):
        mock_provider.fail_next = 2
        result = gateway.complete(req("two plus two"))
        assert result.text == "4"
        assert mock_provider.calls == 3

    def test_exhausted_retries_raise_transport_error(self, gateway, mock_provider):
        mock_provider.fail_next = 10
        with pytest.raises(TransportError, match="exhausted"):
            gateway.complete(req("two plus two"))

    def test_failures_are_not_cached(self, gateway, mock_provider):
        mock_provider.fail_next = 10
        with pytest.raises(TransportError):
            gateway.complete(req("two plus two"))
        mock_provider.fail_next = 0
        ok = gateway.complete(req("two plus two"))
        assert ok.text == "4" and not ok.cache_hit


class TestSampling:
    def test_sample_n_returns_distinct_indices_in_order(self, gateway):
        results = gateway.sample_n(req("two plus two", temperature=1.0, n=3))
        assert [r.text for r in results] == ["4", "four", "2+2=4"]

    def test_n_equals_one_matches_complete(self, gateway):
        a = gateway.sample_n(req("two plus two", n=1))
        b = gateway.complete(req("two plus two"))
        assert [a[0].text] == [b.text]

    def test_scripted_six_four_split(self, tmp_path, registry):
        p = MockProvider()
        p.add_entry("the split question", [{"text": "alpha"}] * 6 + [{"text": "beta"}] * 4)
        gw = Gateway(registry, tmp_path / "c", providers={"mock": p})
        results = gw.sample_n(req("the split question", temperature=1.0, n=10))
        counts = {"alpha": 0, "beta": 0}
        for r in results:
            counts[r.text] += 1
        assert counts == {"alpha": 6, "beta": 4}

    def test_invalid_n_rejected(self):
        with pytest.raises(ConfigError):
            CompletionRequest("m", "p", n=0)


class TestLogprobs:
    def test_scripted_logprobs_reach_caller(self, tmp_path, registry):
        p = MockProvider()
        p.add_entry(
            "logprob probe",
            [{"text": "ab", "token_logprobs": [["a", -0.5], ["b", -1.5]]}],
        )
        gw = Gateway(registry, tmp_path / "c", providers={"mock": p})
        r = gw.complete(req("logprob probe", want_logprobs=True))
        lps = [lp for _, lp in r.token_logprobs]
        perplexity = math.exp(-sum(lps) / len(lps))
        assert perplexity == pytest.approx(math.e, rel=1e-12)

    def test_capability_error_when_provider_lacks_logprobs(self, tmp_path, registry):
        p = MockProvider()
        p.supports_logprobs = False
        p.default = {"text": "x"}
        gw = Gateway(registry, tmp_path / "c", providers={"mock": p})
        with pytest.raises(CapabilityError):
            gw.complete(req("anything", want_logprobs=True))


class TestParallelismBound:
    def test_max_in_flight_respects_limit(self, tmp_path, registry):
        p = MockProvider(latency=0.01)
        p.default = {"text": "x"}
        gw = Gateway(registry, tmp_path / "c", providers={"mock": p}, max_parallel=3)
        with ThreadPoolExecutor(max_workers=16) as pool:
            list(pool.map(lambda i: gw.complete(req(f"q{i}")), range(40)))
        assert 1 <= p.max_in_flight <= 3

    def test_limit_is_per_provider(self, tmp_path):
        pa, pb = MockProvider(latency=0.01), MockProvider(latency=0.01)
        pa.default = {"text": "a"}
        pb.default = {"text": "b"}
        registry = ModelRegistry(
            [ModelSpec("m-a", "mock"), ModelSpec("m-b", "mock_b")]
        )
        gw = Gateway(
            registry,
            tmp_path / "c",
            providers={"mock": pa, "mock_b": pb},
            max_parallel=2,
        )

        def call(i):
            model = "m-a" if i % 2 else "m-b"
            gw.complete(CompletionRequest(model, f"q{i}"))

        with ThreadPoolExecutor(max_workers=12) as pool:
            list(pool.map(call, range(30)))
        assert pa.max_in_flight <= 2 and pb.max_in_flight <= 2


class TestMockScripts:
    def test_scripts_load_from_files(self, tmp_path, registry):
        script = {
            "entries": [
                {"contains": "red planet", "responses": [{"text": "Mars."}]}
            ],
            "default": {"text": "dunno"},
        }
        (tmp_path / "s").mkdir()
        (tmp_path / "s" / "a.json").write_text(json.dumps(script), encoding="utf-8")
        p = MockProvider(script_dir=tmp_path / "s")
        gw = Gateway(registry, tmp_path / "c", providers={"mock": p})
        assert gw.complete(req("what is the red planet called?")).text == "Mars."
        assert gw.complete(req("unscripted")).text == "dunno"

    def test_unscripted_prompt_without_default_fails(self, tmp_path, registry):
        gw = Gateway(
            registry, tmp_path / "c", providers={"mock": MockProvider()}, max_retries=0
        )
        with pytest.raises(TransportError):
            gw.complete(req("nothing matches"))


class TestRegistry:
    def test_bundled_registry_parses_and_covers_platforms(self):
        reg = ModelRegistry.bundled()
        assert "mock-model" in reg
        spec = reg.lookup("Claude-Sonnet-4-20250514")
        assert spec.platform == "anthropic"
        assert spec.max_tokens == 1000
        assert spec.reasoning_effort == "off"
        assert {reg.lookup(m).platform for m in reg.ids()} == {
            "openai",
            "together",
            "anthropic",
            "mock",
        }

    def test_unknown_model_raises(self, registry):
        with pytest.raises(ConfigError):
            registry.lookup("missing-model")

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ConfigError):
            ModelRegistry([ModelSpec("m", "mock"), ModelSpec("m", "openai")])

    def test_bad_reasoning_effort_rejected(self):
        with pytest.raises(ConfigError):
            CompletionRequest("m", "p", reasoning_effort="extreme")
