"""Completion backends: OpenAI-compatible HTTP and a scripted local stub."""

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from core.conf import bench_setting
from core.errors import RequestError, SchemaError, TransportError

from .endpoints import estimate_tokens

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}
BODY_EXCERPT = 500
# Failures that no retry can fix. Every other requests exception is treated as transport.
MALFORMED_REQUEST = (
    requests.exceptions.InvalidURL,
    requests.exceptions.InvalidSchema,
    requests.exceptions.MissingSchema,
    requests.exceptions.InvalidHeader,
    requests.exceptions.URLRequired,
)


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int
    completion_tokens: int


def _estimated(bundle, text):
    return Completion(
        text=text,
        prompt_tokens=estimate_tokens(bundle.system_instruction) + estimate_tokens(bundle.user_message),
        completion_tokens=estimate_tokens(text),
    )


class HttpBackend:
    name = "http"

    def __init__(self, attempts=None, backoff=None, timeout=None, sleep=time.sleep):
        self.attempts = attempts or bench_setting("RETRY_ATTEMPTS")
        self.backoff = bench_setting("RETRY_BACKOFF_SECONDS") if backoff is None else backoff
        self.timeout = timeout or bench_setting("REQUEST_TIMEOUT_SECONDS")
        self._sleep = sleep

    def _headers(self, endpoint):
        headers = {"Content-Type": "application/json"}
        if endpoint.api_key_env:
            key = os.environ.get(endpoint.api_key_env)
            if not key:
                raise RequestError(
                    f"environment variable {endpoint.api_key_env} is not set", model_id=endpoint.model_id
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, endpoint, bundle, run_index, key=None):
        url = f"{endpoint.base_url}/chat/completions"
        payload = {
            "model": endpoint.model_id,
            "messages": [
                {"role": "system", "content": bundle.system_instruction},
                {"role": "user", "content": bundle.user_message},
            ],
            "temperature": endpoint.sampling.temperature,
            "top_p": endpoint.sampling.top_p,
            "max_tokens": endpoint.sampling.max_tokens,
        }
        headers = self._headers(endpoint)

        last_error = None
        for attempt in range(self.attempts):
            try:
                response = requests.post(url, json=payload, headers=headers, timeout=self.timeout)
            except MALFORMED_REQUEST as exc:
                raise RequestError(f"cannot send request to {endpoint.model_id}: {exc}", url=url) from exc
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if response.status_code in RETRYABLE_STATUS:
                    last_error = f"HTTP {response.status_code}: {response.text[:BODY_EXCERPT]}"
                elif 400 <= response.status_code < 500:
                    raise RequestError(
                        f"{endpoint.model_id} rejected the request with HTTP {response.status_code}",
                        status=response.status_code,
                        body=response.text[:BODY_EXCERPT],
                    )
                else:
                    return self._parse(endpoint, bundle, response)

            logger.warning(
                "Attempt %d/%d to %s failed: %s", attempt + 1, self.attempts, endpoint.model_id, last_error
            )
            if attempt < self.attempts - 1:
                self._sleep(self.backoff * 2**attempt)

        raise TransportError(
            f"{endpoint.model_id} unreachable after {self.attempts} attempts", last_error=last_error
        )

    def _parse(self, endpoint, bundle, response):
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                f"{endpoint.model_id} returned an unreadable completion", body=response.text[:BODY_EXCERPT]
            ) from exc
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return Completion(text, int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
        return _estimated(bundle, text)


class StubBackend:
    """Deterministic scripted responses for tests and offline demos.

    Script format::

        {"responses": {"<cache key>": "text"},
         "rules": [{"contains": "...", "system_contains": "...", "phase": "decision",
                    "model_id": "...", "run_index": 0 | [0, 1], "response": "text"}],
         "default": "text"}

    Exact cache-key responses win, then the first rule whose conditions all
    hold, then ``default``.
    """

    name = "stub"

    def __init__(self, script):
        self.responses = script.get("responses", {})
        self.rules = script.get("rules", [])
        self.default = script.get("default")

    @classmethod
    def from_file(cls, path):
        try:
            script = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read stub script {path}: {exc}", path=str(path)) from exc
        return cls(script)

    @staticmethod
    def _matches(rule, endpoint, bundle, run_index):
        if "contains" in rule and rule["contains"] not in bundle.user_message:
            return False
        if "system_contains" in rule and rule["system_contains"] not in bundle.system_instruction:
            return False
        if "phase" in rule and rule["phase"] != str(bundle.phase):
            return False
        if "model_id" in rule and rule["model_id"] != endpoint.model_id:
            return False
        if "run_index" in rule:
            allowed = rule["run_index"] if isinstance(rule["run_index"], list) else [rule["run_index"]]
            if run_index not in allowed:
                return False
        return True

    def complete(self, endpoint, bundle, run_index, key=None):
        if key is not None and key in self.responses:
            return _estimated(bundle, self.responses[key])
        for rule in self.rules:
            if self._matches(rule, endpoint, bundle, run_index):
                return _estimated(bundle, rule["response"])
        if self.default is not None:
            return _estimated(bundle, self.default)
        raise RequestError(f"stub script has no response for {endpoint.model_id} run {run_index}", key=key)
