"""Cue records and the manual review that finalizes them."""

import json
from dataclasses import dataclass, replace
from pathlib import Path

from django.db import models

from core.errors import ContractError, DataError, SchemaError, VocabularyError
from modules.dilemmas.domain import BiasType

RELABEL_PREFIX = "relabel:"


class ReviewStatus(models.TextChoices):
    UNREVIEWED = "unreviewed", "Unreviewed"
    CONFIRMED = "confirmed", "Confirmed"
    REJECTED = "rejected", "Rejected"
    RELABELLED = "relabelled", "Relabelled"


@dataclass(frozen=True)
class CueRecord:
    prompt_id: str
    cue_span: str
    proposed_bias: BiasType
    review_status: ReviewStatus = ReviewStatus.UNREVIEWED
    final_bias: BiasType | None = None

    def __post_init__(self):
        if self.review_status == ReviewStatus.CONFIRMED and self.final_bias != self.proposed_bias:
            raise ContractError("a confirmed cue keeps its proposed bias", prompt_id=self.prompt_id)
        if self.review_status == ReviewStatus.RELABELLED and self.final_bias in (None, self.proposed_bias):
            raise ContractError("a relabelled cue needs a different final bias", prompt_id=self.prompt_id)
        if self.review_status in (ReviewStatus.UNREVIEWED, ReviewStatus.REJECTED) and self.final_bias is not None:
            raise ContractError("only confirmed or relabelled cues carry a final bias", prompt_id=self.prompt_id)

    @property
    def positive(self):
        """Cue-positive after review; judge output alone never qualifies."""
        return self.review_status in (ReviewStatus.CONFIRMED, ReviewStatus.RELABELLED)

    def to_dict(self):
        return {
            "prompt_id": self.prompt_id,
            "cue_span": self.cue_span,
            "proposed_bias": str(self.proposed_bias),
            "review_status": str(self.review_status),
            "final_bias": str(self.final_bias) if self.final_bias else None,
        }


@dataclass(frozen=True)
class ReviewSummary:
    candidates: int
    confirmed: int
    relabelled: int
    rejected: int
    unreviewed: int

    @property
    def positives(self):
        return self.confirmed + self.relabelled

    @property
    def type_stable(self):
        return self.confirmed

    def to_dict(self):
        return {
            "candidates": self.candidates,
            "positives": self.positives,
            "type_stable": self.type_stable,
            "confirmed": self.confirmed,
            "relabelled": self.relabelled,
            "rejected": self.rejected,
            "unreviewed": self.unreviewed,
        }


def parse_review(mapping):
    """``prompt_id -> "confirm" | "reject" | "relabel:<bias>"``."""
    if not isinstance(mapping, dict):
        raise SchemaError("review file must be a JSON object")
    decisions = {}
    for prompt_id, verdict in mapping.items():
        verdict = str(verdict).strip()
        if verdict == "confirm":
            decisions[prompt_id] = (ReviewStatus.CONFIRMED, None)
        elif verdict == "reject":
            decisions[prompt_id] = (ReviewStatus.REJECTED, None)
        elif verdict.startswith(RELABEL_PREFIX):
            label = verdict[len(RELABEL_PREFIX) :]
            if label not in BiasType.values:
                raise VocabularyError(f"unknown bias type {label!r} in review of {prompt_id}", label=label)
            decisions[prompt_id] = (ReviewStatus.RELABELLED, BiasType(label))
        else:
            raise SchemaError(f"unreadable review verdict {verdict!r} for {prompt_id}", prompt_id=prompt_id)
    return decisions


def load_review(path):
    try:
        return parse_review(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read review file {path}: {exc}", path=str(path)) from exc


def apply_review(records, decisions):
    known = {record.prompt_id for record in records}
    unknown = sorted(set(decisions) - known)
    if unknown:
        raise DataError(f"review names {len(unknown)} unknown prompts", unknown=unknown)

    finalized = []
    for record in records:
        if record.prompt_id not in decisions:
            finalized.append(record)
            continue
        status, relabel = decisions[record.prompt_id]
        if status == ReviewStatus.RELABELLED and relabel == record.proposed_bias:
            status, relabel = ReviewStatus.CONFIRMED, None
        if status == ReviewStatus.CONFIRMED:
            relabel = record.proposed_bias
        finalized.append(replace(record, review_status=status, final_bias=relabel))

    counts = {status: sum(r.review_status == status for r in finalized) for status in ReviewStatus}
    summary = ReviewSummary(
        candidates=len(finalized),
        confirmed=counts[ReviewStatus.CONFIRMED],
        relabelled=counts[ReviewStatus.RELABELLED],
        rejected=counts[ReviewStatus.REJECTED],
        unreviewed=counts[ReviewStatus.UNREVIEWED],
    )
    return finalized, summary
