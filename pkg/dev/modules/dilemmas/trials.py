"""Trial and elicitation records plus the append-only NDJSON archive."""

import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path

from core.errors import ContractError, DataError, DuplicateTrialError

from .domain import Condition, Decision

logger = logging.getLogger(__name__)

DECISION_KIND = "decision"
ELICITATION_KIND = "elicitation"


@dataclass(frozen=True)
class TrialRecord:
    model_id: str
    strategy_id: str
    pair_id: str
    condition: Condition
    run_index: int
    raw_text: str
    decision: Decision
    elicited_cues: str | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    timestamp: str = ""
    backend: str | None = None
    error: str | None = None

    def __post_init__(self):
        if self.run_index < 0:
            raise ContractError("run_index must be nonnegative", run_index=self.run_index)
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ContractError("token counts must be nonnegative")

    @property
    def key(self):
        return (self.model_id, self.strategy_id, self.pair_id, str(self.condition), self.run_index)

    @property
    def retryable(self):
        """The call itself failed, so a resumed run may replace this record."""
        return self.error is not None

    def to_dict(self):
        return {
            "kind": DECISION_KIND,
            "model_id": self.model_id,
            "strategy_id": self.strategy_id,
            "pair_id": self.pair_id,
            "condition": str(self.condition),
            "run_index": self.run_index,
            "raw_text": self.raw_text,
            "decision": self.decision.to_dict(),
            "elicited_cues": self.elicited_cues,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "timestamp": self.timestamp,
            "backend": self.backend,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            model_id=data["model_id"],
            strategy_id=data["strategy_id"],
            pair_id=data["pair_id"],
            condition=Condition(data["condition"]),
            run_index=int(data["run_index"]),
            raw_text=data.get("raw_text", ""),
            decision=Decision.from_dict(data["decision"]),
            elicited_cues=data.get("elicited_cues"),
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            timestamp=data.get("timestamp", ""),
            backend=data.get("backend"),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class ElicitationRecord:
    """First phase of a two-step strategy: the best-practices answer for one run."""

    model_id: str
    strategy_id: str
    pair_id: str
    run_index: int
    source_condition: Condition
    raw_text: str
    cues: str | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    timestamp: str = ""
    backend: str | None = None
    error: str | None = None

    @property
    def key(self):
        return (self.model_id, self.strategy_id, self.pair_id, str(self.source_condition), self.run_index)

    @property
    def succeeded(self):
        return self.cues is not None

    @property
    def retryable(self):
        return self.error is not None and not self.raw_text

    def to_dict(self):
        return {
            "kind": ELICITATION_KIND,
            "model_id": self.model_id,
            "strategy_id": self.strategy_id,
            "pair_id": self.pair_id,
            "run_index": self.run_index,
            "source_condition": str(self.source_condition),
            "raw_text": self.raw_text,
            "cues": self.cues,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "timestamp": self.timestamp,
            "backend": self.backend,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            model_id=data["model_id"],
            strategy_id=data["strategy_id"],
            pair_id=data["pair_id"],
            run_index=int(data["run_index"]),
            source_condition=Condition(data["source_condition"]),
            raw_text=data.get("raw_text", ""),
            cues=data.get("cues"),
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            timestamp=data.get("timestamp", ""),
            backend=data.get("backend"),
            error=data.get("error"),
        )


def record_from_dict(data):
    kind = data.get("kind", DECISION_KIND)
    if kind == DECISION_KIND:
        return TrialRecord.from_dict(data)
    if kind == ELICITATION_KIND:
        return ElicitationRecord.from_dict(data)
    raise DataError(f"unknown archive record kind {kind!r}", kind=kind)


def encode_record(record):
    return json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False)


def _marker(record):
    return (type(record).__name__, record.key)


class TrialArchive:
    """Newline-delimited JSON archive, one record per line, append only.

    Keys already on disk are loaded at construction so a resumed run can skip
    them and a duplicate append fails loudly. A retryable record (a call that
    never produced text) may be followed by a replacement for the same key;
    readers keep the last one.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._retryable = {}
        if self.path.exists():
            for record in self.read():
                self._retryable[_marker(record)] = record.retryable

    def __contains__(self, marker):
        return marker in self._retryable

    def _settled(self, marker):
        return self._retryable.get(marker) is False

    def has_trial(self, key):
        """True when the trial is archived and needs no retry."""
        return self._settled((TrialRecord.__name__, key))

    def has_elicitation(self, key):
        return self._settled((ElicitationRecord.__name__, key))

    def append(self, record):
        marker = _marker(record)
        with self._lock:
            if self._settled(marker):
                raise DuplicateTrialError(f"record {record.key} already archived", key=list(record.key))
            if marker in self._retryable:
                logger.info("Replacing failed record %s", record.key)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(encode_record(record) + "\n")
            self._retryable[marker] = record.retryable

    def read(self):
        return list(read_archive(self.path))

    def __len__(self):
        return len(self._retryable)


def read_archive(path):
    """Every record in an archive file, one per key.

    A later line may only repeat a key whose earlier record is retryable, and
    it replaces that record in place.
    """
    path = Path(path)
    records = {}
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = record_from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataError(f"{path}:{line_number}: unreadable archive line: {exc}", line=line_number) from exc
            marker = _marker(record)
            if marker in records and not records[marker].retryable:
                raise DuplicateTrialError(f"{path}:{line_number}: duplicate record {record.key}", line=line_number)
            records[marker] = record
    return list(records.values())


def split_records(records):
    trials = [r for r in records if isinstance(r, TrialRecord)]
    elicitations = [r for r in records if isinstance(r, ElicitationRecord)]
    return trials, elicitations
