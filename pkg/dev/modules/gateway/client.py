"""The model gateway: cache first, then the endpoint's backend.

Every fresh exchange is stored before it is returned, so a finished
experiment can be replayed with the network disabled.
"""

import logging
import threading
from contextlib import contextmanager

from django.utils import timezone

from core.conf import bench_setting
from core.errors import ReplayError

from .backends import HttpBackend, StubBackend
from .cache import ResponseCache, cache_key
from .endpoints import BackendKind, ChatExchange
from .ratelimit import TokenBucket

logger = logging.getLogger(__name__)


class Gateway:
    def __init__(self, cache_dir=None, replay_only=False, http_backend=None, now=None):
        self.cache = ResponseCache(cache_dir or bench_setting("CACHE_DIR"))
        self.replay_only = replay_only
        self.http = http_backend or HttpBackend()
        self._now = now or (lambda: timezone.now().isoformat())
        self._stubs = {}
        self._buckets = {}
        self._slots = {}
        self._registry_lock = threading.Lock()
        # key -> [lock, holders]; entries are dropped when the last holder leaves.
        self._key_locks = {}
        self.network_calls = 0
        self.backend_calls = 0

    @contextmanager
    def _key_lock(self, key):
        with self._registry_lock:
            slot = self._key_locks.setdefault(key, [threading.Lock(), 0])
            slot[1] += 1
        try:
            with slot[0]:
                yield
        finally:
            with self._registry_lock:
                slot[1] -= 1
                if not slot[1]:
                    del self._key_locks[key]

    def _stub(self, endpoint):
        with self._registry_lock:
            if endpoint.stub_script not in self._stubs:
                self._stubs[endpoint.stub_script] = StubBackend.from_file(endpoint.stub_script)
            return self._stubs[endpoint.stub_script]

    def _throttle(self, endpoint):
        with self._registry_lock:
            if endpoint.model_id not in self._buckets:
                per_minute = endpoint.requests_per_minute or bench_setting("REQUESTS_PER_MINUTE")
                in_flight = endpoint.max_in_flight or bench_setting("MAX_IN_FLIGHT")
                self._buckets[endpoint.model_id] = TokenBucket(per_minute)
                self._slots[endpoint.model_id] = threading.BoundedSemaphore(in_flight)
            return self._buckets[endpoint.model_id], self._slots[endpoint.model_id]

    @staticmethod
    def _exchange(key, endpoint, bundle, run_index, entry, backend):
        response = entry["response"]
        return ChatExchange(
            key=key,
            model_id=endpoint.model_id,
            request={**bundle.to_dict(), "sampling": endpoint.sampling.to_dict(), "run_index": run_index},
            text=response["text"],
            prompt_tokens=response["prompt_tokens"],
            completion_tokens=response["completion_tokens"],
            backend=backend,
            created_at=entry["created_at"],
            origin=entry.get("origin", str(backend)),
        )

    def complete(self, endpoint, bundle, run_index):
        """Return the exchange for (endpoint, bundle, run_index), calling out at most once per key."""
        key = cache_key(endpoint.model_id, bundle, endpoint.sampling, run_index)
        with self._key_lock(key):
            entry = self.cache.get(key)
            if entry is not None:
                return self._exchange(key, endpoint, bundle, run_index, entry, BackendKind.CACHE)
            if self.replay_only:
                raise ReplayError(f"no cached response for key {key}", key=key, model_id=endpoint.model_id)

            if endpoint.backend == BackendKind.STUB:
                completion = self._stub(endpoint).complete(endpoint, bundle, run_index, key=key)
            else:
                bucket, slots = self._throttle(endpoint)
                bucket.acquire()
                with slots:
                    completion = self.http.complete(endpoint, bundle, run_index)
                with self._registry_lock:
                    self.network_calls += 1
            with self._registry_lock:
                self.backend_calls += 1

            entry = {
                "key": key,
                "model_id": endpoint.model_id,
                "request": {**bundle.to_dict(), "sampling": endpoint.sampling.to_dict(), "run_index": run_index},
                "response": {
                    "text": completion.text,
                    "prompt_tokens": completion.prompt_tokens,
                    "completion_tokens": completion.completion_tokens,
                },
                "origin": str(endpoint.backend),
                "created_at": self._now(),
            }
            self.cache.put(key, entry)
            logger.debug("Cached %s response for %s run %d", endpoint.backend, endpoint.model_id, run_index)
            return self._exchange(key, endpoint, bundle, run_index, entry, endpoint.backend)
