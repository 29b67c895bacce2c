from dataclasses import asdict, dataclass, field

from django.db import models

from core.conf import bench_setting
from core.errors import ContractError


class BackendKind(models.TextChoices):
    HTTP = "http", "OpenAI-compatible HTTP"
    STUB = "stub", "Scripted stub"
    CACHE = "cache", "Response cache"


@dataclass(frozen=True)
class Sampling:
    temperature: float
    top_p: float
    max_tokens: int

    def __post_init__(self):
        if self.temperature < 0:
            raise ContractError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ContractError("top_p must lie in (0, 1]")
        if self.max_tokens < 1:
            raise ContractError("max_tokens must be positive")

    @classmethod
    def defaults(cls):
        return cls(bench_setting("TEMPERATURE"), bench_setting("TOP_P"), bench_setting("MAX_TOKENS"))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ModelEndpoint:
    """Where and how one model is called.

    ``api_key_env`` names an environment variable; the key itself is read at
    call time and never stored.
    """

    model_id: str
    base_url: str = ""
    api_key_env: str | None = None
    sampling: Sampling = field(default_factory=Sampling.defaults)
    backend: BackendKind = BackendKind.HTTP
    stub_script: str | None = None
    requests_per_minute: int | None = None
    max_in_flight: int | None = None

    def __post_init__(self):
        if self.backend == BackendKind.HTTP and not self.base_url:
            raise ContractError(f"endpoint {self.model_id} needs a base_url", model_id=self.model_id)
        if self.backend == BackendKind.STUB and not self.stub_script:
            raise ContractError(f"stub endpoint {self.model_id} needs a stub_script", model_id=self.model_id)

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "base_url": self.base_url,
            "api_key_env": self.api_key_env,
            "sampling": self.sampling.to_dict(),
            "backend": str(self.backend),
            "stub_script": self.stub_script,
            "requests_per_minute": self.requests_per_minute,
            "max_in_flight": self.max_in_flight,
        }


@dataclass(frozen=True)
class ChatExchange:
    key: str
    model_id: str
    request: dict
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend: BackendKind
    created_at: str
    # backend that produced the text originally; equals backend on a fresh call
    origin: str = ""

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ContractError("token counts must be nonnegative")


def estimate_tokens(text):
    """Budgeting estimate at 3.5 characters per token."""
    return -(-len(text) * 2 // 7)
