from django.conf import settings

DEFAULTS = {
    "DEPTH_LIMIT": 10_000,
    "TEMPERATURE": 0.7,
    "TOP_P": 1.0,
    "MAX_TOKENS": 1024,
    "RETRY_ATTEMPTS": 5,
    "RETRY_BACKOFF_SECONDS": 1.0,
    "REQUEST_TIMEOUT_SECONDS": 120,
    "REQUESTS_PER_MINUTE": 60,
    "MAX_IN_FLIGHT": 8,
    "CACHE_DIR": "var/cache",
    "RUNS_PER_CONDITION": 5,
    "EXACT_TEST_THRESHOLD": 10,
    "QUASI_POISSON_TRIGGER": 1.5,
    "GLM_TOLERANCE": 1e-10,
    "GLM_MAX_ITERATIONS": 100,
    "ALPHA": 0.05,
    "BOOTSTRAP_RESAMPLES": 10_000,
    "TRIAGE_THRESHOLD": 0.6,
    "ALIGNMENT_TOP_K": 25,
}


def bench_setting(name):
    """Look up a BIASBENCH setting, falling back to the shipped default."""
    configured = getattr(settings, "BIASBENCH", {})
    if name in configured:
        return configured[name]
    return DEFAULTS[name]
