import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

logging.disable(logging.WARNING)

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv()

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "biasbench-local-only-key")

DEBUG = os.getenv("DJANGO_DEBUG", "0") == "1"
ALLOWED_HOSTS = []

TESTING = len(sys.argv) > 1 and sys.argv[1] == "test"

# Applications.
INSTALLED_APPS = [
    "rest_framework",
    "core.cli",
    "modules.dilemmas",
    "modules.horn",
    "modules.strategies",
    "modules.gateway",
    "modules.runner",
    "modules.stats",
    "modules.lexicon",
    "modules.miner",
    "modules.report",
]

# Nothing is persisted through the ORM; archives and caches are plain files.
DATABASES = {}

DEFAULT_AUTO_FIELD = "django.db.models.AutoField"

# Internationalization.
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# Experiment defaults. Run configs override per invocation.
BIASBENCH = {
    "DEPTH_LIMIT": int(os.getenv("BIASBENCH_DEPTH_LIMIT", "10000")),
    "TEMPERATURE": 0.7,
    "TOP_P": 1.0,
    "MAX_TOKENS": 1024,
    "RETRY_ATTEMPTS": 5,
    "RETRY_BACKOFF_SECONDS": 1.0,
    "REQUEST_TIMEOUT_SECONDS": 120,
    "REQUESTS_PER_MINUTE": int(os.getenv("BIASBENCH_REQUESTS_PER_MINUTE", "60")),
    "MAX_IN_FLIGHT": int(os.getenv("BIASBENCH_MAX_IN_FLIGHT", "8")),
    "CACHE_DIR": os.getenv("BIASBENCH_CACHE_DIR", "var/cache"),
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

# Loggers.
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {thread:d} {message}",
            "style": "{",
        },
        "colored": {
            "()": "colorlog.ColoredFormatter",
            "format": "%(log_color)s%(levelname)-8s%(reset)s %(blue)s%(message)s",
        },
    },
    "handlers": {
        "console": {
            "formatter": "colored",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": "WARNING",
            "propagate": False,
        },
        "core": {
            "handlers": ["console"],
            "level": os.getenv("BIASBENCH_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "modules": {
            "handlers": ["console"],
            "level": os.getenv("BIASBENCH_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}

if not TESTING:
    logging.disable(logging.NOTSET)

REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": ("rest_framework.renderers.JSONRenderer",),
    # Serializers only; django.contrib.auth is not installed.
    "DEFAULT_AUTHENTICATION_CLASSES": [],
    "DEFAULT_PERMISSION_CLASSES": [],
    "UNAUTHENTICATED_USER": None,
}
