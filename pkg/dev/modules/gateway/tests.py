import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from unittest import mock

import requests
from django.test import SimpleTestCase

from core.errors import ContractError, ReplayError, RequestError, TransportError
from modules.strategies.prompts import PromptBundle
from modules.strategies.specs import Phase

from .backends import HttpBackend
from .cache import ResponseCache, cache_key
from .client import Gateway
from .endpoints import BackendKind, ModelEndpoint, Sampling, estimate_tokens
from .ratelimit import TokenBucket
from .serializers import ModelEndpointSerializer

STUB_SCRIPT = Path(__file__).resolve().parent / "fixtures" / "stub_script.json"
FIXED_TIME = "2024-05-01T12:00:00+00:00"


def _response(status, payload=None, text=""):
    response = mock.Mock(status_code=status, text=text or json.dumps(payload or {}))
    response.json.return_value = payload
    return response


class EstimateTokensTest(SimpleTestCase):
    def test_thirty_five_characters(self):
        """Test 35 characters estimate to 10 tokens"""
        self.assertEqual(estimate_tokens("x" * 35), 10)

    def test_empty(self):
        self.assertEqual(estimate_tokens(""), 0)

    def test_ceiling(self):
        self.assertEqual(estimate_tokens("x"), 1)
        self.assertEqual(estimate_tokens("x" * 36), 11)


class EndpointTest(SimpleTestCase):
    def test_sampling_bounds(self):
        with self.assertRaises(ContractError):
            Sampling(temperature=0.7, top_p=0.0, max_tokens=10)
        with self.assertRaises(ContractError):
            Sampling(temperature=-1, top_p=1.0, max_tokens=10)

    def test_serializer_defaults(self):
        """Test unspecified sampling falls back to configured defaults"""
        serializer = ModelEndpointSerializer(data={"model_id": "m", "base_url": "http://localhost:8000/v1/"})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        endpoint = serializer.save()
        self.assertEqual(endpoint.base_url, "http://localhost:8000/v1")
        self.assertEqual(endpoint.sampling, Sampling(0.7, 1.0, 1024))
        self.assertEqual(endpoint.backend, BackendKind.HTTP)

    def test_serializer_requires_stub_script(self):
        serializer = ModelEndpointSerializer(data={"model_id": "m", "backend": "stub"})
        self.assertFalse(serializer.is_valid())
        self.assertIn("stub_script", serializer.errors)


class GatewayStubTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.endpoint = ModelEndpoint(
            model_id="stub-model",
            backend=BackendKind.STUB,
            stub_script=str(STUB_SCRIPT),
            sampling=Sampling(0.7, 1.0, 256),
        )
        self.bundle = PromptBundle("system", "We use print statements. Option A or Option B?", Phase.DECISION)
        self.gateway = Gateway(cache_dir=self.tmp.name, now=lambda: FIXED_TIME)

    def test_scripted_response(self):
        """Test a matching stub rule answers the call"""
        exchange = self.gateway.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(exchange.text, "Explanation: structured logs scale.\nDecision: Option A")
        self.assertEqual(exchange.backend, BackendKind.STUB)
        self.assertEqual(exchange.created_at, FIXED_TIME)

    def test_second_call_hits_cache(self):
        """Test an identical call is served byte-identically from the cache"""
        first = self.gateway.complete(self.endpoint, self.bundle, 0)
        second = Gateway(cache_dir=self.tmp.name, now=lambda: "later").complete(self.endpoint, self.bundle, 0)
        self.assertEqual(second.backend, BackendKind.CACHE)
        self.assertEqual(second.text, first.text)
        self.assertEqual(second.created_at, FIXED_TIME)

    def test_run_index_isolation(self):
        """Test different run indices never share a cache entry"""
        first = self.gateway.complete(self.endpoint, self.bundle, 1)
        third = self.gateway.complete(self.endpoint, self.bundle, 2)
        self.assertNotEqual(first.key, third.key)
        self.assertTrue(third.text.endswith("Option B"))

    def test_replay_only_miss(self):
        """Test replay-only mode refuses unseen keys and names the key"""
        gateway = Gateway(cache_dir=self.tmp.name, replay_only=True)
        with self.assertRaises(ReplayError) as ctx:
            gateway.complete(self.endpoint, self.bundle, 0)
        expected = cache_key("stub-model", self.bundle, self.endpoint.sampling, 0)
        self.assertEqual(ctx.exception.details["key"], expected)

    def test_elicitation_rule(self):
        bundle = PromptBundle("instruction", "dilemma", Phase.ELICITATION)
        exchange = self.gateway.complete(self.endpoint, bundle, 0)
        self.assertTrue(exchange.text.startswith("Best Practices:"))

    def test_stub_token_estimates(self):
        exchange = self.gateway.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(exchange.completion_tokens, estimate_tokens(exchange.text))
        self.assertGreater(exchange.prompt_tokens, 0)

    def test_key_locks_are_released(self):
        """Test per-key locks do not outlive their calls"""
        for run_index in range(20):
            self.gateway.complete(self.endpoint, self.bundle, run_index)
        self.assertEqual(self.gateway._key_locks, {})
        self.assertEqual(self.gateway.backend_calls, 20)

        replay = Gateway(cache_dir=self.tmp.name, replay_only=True)
        with self.assertRaises(ReplayError):
            replay.complete(self.endpoint, self.bundle, 99)
        self.assertEqual(replay._key_locks, {})

    def test_concurrent_identical_calls_reach_the_backend_once(self):
        with ThreadPoolExecutor(max_workers=4) as executor:
            texts = set(executor.map(lambda _: self.gateway.complete(self.endpoint, self.bundle, 0).text, range(8)))
        self.assertEqual(len(texts), 1)
        self.assertEqual(self.gateway.backend_calls, 1)
        self.assertEqual(self.gateway._key_locks, {})


class ResponseCacheTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.cache = ResponseCache(self.tmp.name)

    def test_layout_and_no_overwrite(self):
        key = "ab" + "0" * 62
        self.assertTrue(self.cache.put(key, {"value": 1}))
        self.assertFalse(self.cache.put(key, {"value": 2}))
        self.assertEqual(self.cache.get(key), {"value": 1})
        self.assertTrue((Path(self.tmp.name) / "ab" / f"{key}.json").exists())

    def test_key_depends_on_every_part(self):
        bundle = PromptBundle("s", "u", Phase.DECISION)
        sampling = Sampling(0.7, 1.0, 10)
        base = cache_key("m", bundle, sampling, 0)
        self.assertNotEqual(base, cache_key("m2", bundle, sampling, 0))
        self.assertNotEqual(base, cache_key("m", PromptBundle("s", "u", Phase.ELICITATION), sampling, 0))
        self.assertNotEqual(base, cache_key("m", bundle, Sampling(0.0, 1.0, 10), 0))
        self.assertEqual(base, cache_key("m", PromptBundle("s", "u", Phase.DECISION), sampling, 0))


@mock.patch.dict(os.environ, {"BENCH_TEST_KEY": "sk-secret-value"})
class HttpBackendTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.endpoint = ModelEndpoint(
            model_id="gpt-test",
            base_url="https://api.example.test/v1",
            api_key_env="BENCH_TEST_KEY",
            sampling=Sampling(0.7, 1.0, 64),
        )
        self.bundle = PromptBundle("system", "user", Phase.DECISION)
        self.sleeps = []
        self.backend = HttpBackend(attempts=5, backoff=1.0, timeout=5, sleep=self.sleeps.append)

    @mock.patch("modules.gateway.backends.requests.post")
    def test_success_uses_reported_usage(self, post):
        post.return_value = _response(
            200,
            {
                "choices": [{"message": {"content": "Decision: Option A"}}],
                "usage": {"prompt_tokens": 9, "completion_tokens": 4},
            },
        )
        completion = self.backend.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(completion.text, "Decision: Option A")
        self.assertEqual((completion.prompt_tokens, completion.completion_tokens), (9, 4))
        args, kwargs = post.call_args
        self.assertEqual(args[0], "https://api.example.test/v1/chat/completions")
        self.assertEqual(kwargs["headers"]["Authorization"], "Bearer sk-secret-value")
        self.assertEqual([m["role"] for m in kwargs["json"]["messages"]], ["system", "user"])

    @mock.patch("modules.gateway.backends.requests.post")
    def test_retries_with_exponential_backoff(self, post):
        """Test transient failures are retried with doubling waits"""
        post.side_effect = [
            requests.ConnectionError("reset"),
            _response(429, text="slow down"),
            _response(503, text="busy"),
            _response(200, {"choices": [{"message": {"content": "ok"}}]}),
        ]
        completion = self.backend.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(completion.text, "ok")
        self.assertEqual(self.sleeps, [1.0, 2.0, 4.0])
        self.assertEqual(completion.completion_tokens, 1)

    @mock.patch("modules.gateway.backends.requests.post")
    def test_exhausted_retries(self, post):
        post.side_effect = requests.Timeout("too slow")
        with self.assertRaises(TransportError):
            self.backend.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(post.call_count, 5)
        self.assertEqual(self.sleeps, [1.0, 2.0, 4.0, 8.0])

    @mock.patch("modules.gateway.backends.requests.post")
    def test_broken_stream_is_retried(self, post):
        """Test a truncated response body counts as a transient transport failure"""
        post.side_effect = [
            requests.exceptions.ChunkedEncodingError("connection broken"),
            requests.exceptions.ContentDecodingError("bad gzip"),
            _response(200, {"choices": [{"message": {"content": "ok"}}]}),
        ]
        self.assertEqual(self.backend.complete(self.endpoint, self.bundle, 0).text, "ok")
        self.assertEqual(post.call_count, 3)
        self.assertEqual(self.sleeps, [1.0, 2.0])

    @mock.patch("modules.gateway.backends.requests.post")
    def test_malformed_url_is_not_retried(self, post):
        post.side_effect = requests.exceptions.InvalidURL("no host")
        with self.assertRaises(RequestError):
            self.backend.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(post.call_count, 1)
        self.assertEqual(self.sleeps, [])

    @mock.patch("modules.gateway.backends.requests.post")
    def test_client_error_carries_excerpt(self, post):
        """Test a 4xx response raises a request error with a body excerpt"""
        post.return_value = _response(400, text="bad model " + "x" * 900)
        with self.assertRaises(RequestError) as ctx:
            self.backend.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(ctx.exception.details["status"], 400)
        self.assertEqual(len(ctx.exception.details["body"]), 500)
        self.assertEqual(post.call_count, 1)

    @mock.patch("modules.gateway.backends.requests.post")
    def test_key_never_cached(self, post):
        post.return_value = _response(200, {"choices": [{"message": {"content": "Decision: Option B"}}]})
        gateway = Gateway(cache_dir=self.tmp.name, http_backend=self.backend, now=lambda: FIXED_TIME)
        gateway.complete(self.endpoint, self.bundle, 0)
        self.assertEqual(gateway.network_calls, 1)
        for path in Path(self.tmp.name).rglob("*.json"):
            self.assertNotIn("sk-secret-value", path.read_text(encoding="utf-8"))

    def test_missing_key_variable(self):
        endpoint = ModelEndpoint(model_id="m", base_url="http://x", api_key_env="BENCH_MISSING_KEY")
        with self.assertRaises(RequestError):
            self.backend.complete(endpoint, self.bundle, 0)


class TokenBucketTest(SimpleTestCase):
    def test_waits_for_refill(self):
        """Test a drained bucket sleeps until the next token is due"""
        clock = [0.0]
        sleeps = []

        def sleep(seconds):
            sleeps.append(seconds)
            clock[0] += seconds

        bucket = TokenBucket(60, clock=lambda: clock[0], sleep=sleep)
        bucket.acquire()
        bucket.acquire()
        self.assertEqual(len(sleeps), 1)
        self.assertAlmostEqual(sleeps[0], 1.0)
