"""Corpus prompts, triage scores and the classifier gate."""

import csv
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import requests

from core.conf import bench_setting
from core.errors import DataError, SchemaError, TransportError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorpusPrompt:
    prompt_id: str
    text: str
    classifier_score: float | None = None

    def __post_init__(self):
        if self.classifier_score is not None and not 0 <= self.classifier_score <= 1:
            raise DataError(f"score for {self.prompt_id} outside [0, 1]", prompt_id=self.prompt_id)


def load_corpus(path):
    """Read JSON lines of ``{"prompt_id": ..., "text": ...}``."""
    prompts, seen = [], set()
    with Path(path).open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                prompt = CorpusPrompt(str(record["prompt_id"]), record["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SchemaError(f"{path}:{line_number}: unreadable corpus line: {exc}", line=line_number) from exc
            if prompt.prompt_id in seen:
                raise DataError(f"duplicate prompt id {prompt.prompt_id}", prompt_id=prompt.prompt_id)
            seen.add(prompt.prompt_id)
            prompts.append(prompt)
    return prompts


class ScoreSource(Protocol):
    def scores(self, prompts) -> dict: ...


class FileScoreSource:
    """CSV with a ``prompt_id,score`` header, or a JSON object mapping ids to scores."""

    def __init__(self, path):
        self.path = Path(path)

    def _read(self):
        try:
            if self.path.suffix.lower() == ".csv":
                with self.path.open(encoding="utf-8", newline="") as handle:
                    return {row["prompt_id"]: float(row["score"]) for row in csv.DictReader(handle)}
            return {str(key): float(value) for key, value in json.loads(self.path.read_text(encoding="utf-8")).items()}
        except (OSError, ValueError, KeyError, AttributeError) as exc:
            raise SchemaError(f"cannot read score file {self.path}: {exc}", path=str(self.path)) from exc

    def scores(self, prompts):
        return self._read()


class HttpScoreSource:
    """``POST {url}`` with ``{"texts": [...]}``, answered by ``{"scores": [...]}``."""

    def __init__(self, url, batch_size=64, timeout=None):
        self.url = url
        self.batch_size = batch_size
        self.timeout = timeout or bench_setting("REQUEST_TIMEOUT_SECONDS")

    def scores(self, prompts):
        scores = {}
        for start in range(0, len(prompts), self.batch_size):
            batch = prompts[start : start + self.batch_size]
            try:
                response = requests.post(self.url, json={"texts": [p.text for p in batch]}, timeout=self.timeout)
                response.raise_for_status()
                values = response.json()["scores"]
            except (requests.RequestException, ValueError, KeyError) as exc:
                raise TransportError(f"scoring endpoint failed: {exc}", url=self.url) from exc
            if len(values) != len(batch):
                raise TransportError("scoring endpoint returned the wrong number of scores", url=self.url)
            scores.update({p.prompt_id: float(v) for p, v in zip(batch, values, strict=True)})
        return scores


def attach_scores(prompts, source):
    scores = source.scores(prompts)
    return [replace(p, classifier_score=scores[p.prompt_id]) if p.prompt_id in scores else p for p in prompts]


def triage(prompts, threshold=None):
    """Keep prompts scored strictly above the threshold."""
    threshold = bench_setting("TRIAGE_THRESHOLD") if threshold is None else threshold
    retained = []
    for prompt in prompts:
        if prompt.classifier_score is None:
            raise DataError(f"prompt {prompt.prompt_id} has no classifier score", prompt_id=prompt.prompt_id)
        if prompt.classifier_score > threshold:
            retained.append(prompt)
    logger.info("Triage kept %d of %d prompts (score > %s)", len(retained), len(prompts), threshold)
    return retained
