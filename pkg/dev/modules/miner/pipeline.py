"""End-to-end corpus mining, stage by stage."""

import logging
from dataclasses import dataclass, field
from itertools import pairwise

from core.errors import ContractError

from .alignment import align_cues, apply_validation, summarize_alignment
from .corpus import attach_scores, triage
from .extraction import filter_and_extract
from .prevalence import prevalence
from .review import apply_review

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StageCounts:
    corpus: int
    triaged: int
    coding: int
    candidates: int
    positives: int

    def to_dict(self):
        return {
            "corpus": self.corpus,
            "triaged": self.triaged,
            "coding": self.coding,
            "candidates": self.candidates,
            "positives": self.positives,
        }


def check_stages(stages):
    """Each stage's prompt ids must be a subset of the previous stage's."""
    names = list(stages)
    for outer, inner in pairwise(names):
        extra = set(stages[inner]) - set(stages[outer])
        if extra:
            raise ContractError(f"stage {inner} holds prompts missing from {outer}", extra=sorted(extra))
    return StageCounts(*(len(set(ids)) for ids in stages.values()))


@dataclass
class MiningOutcome:
    stages: StageCounts
    records: list
    failures: list
    review: object = None
    alignment: list = field(default_factory=list)
    alignment_summary: object = None
    report: object = None

    def to_dict(self):
        return {
            "stages": self.stages.to_dict(),
            "records": [record.to_dict() for record in self.records],
            "failures": [failure.to_dict() for failure in self.failures],
            "review": self.review.to_dict() if self.review else None,
            "alignment": [result.to_dict() for result in self.alignment],
            "alignment_summary": self.alignment_summary.to_dict() if self.alignment_summary else None,
            "prevalence": self.report.to_dict() if self.report else None,
        }


def mine(
    prompts,
    scores,
    gateway,
    judge,
    review=None,
    references=None,
    validations=None,
    threshold=None,
    k=None,
    judge_prompts=None,
):
    """Triage, judge, review, align and count.

    Without a review every candidate stays unreviewed and no prompt is
    counted as cue-positive. Alignment runs only when references are given.
    """
    prompts = attach_scores(prompts, scores) if scores is not None else list(prompts)
    retained = triage(prompts, threshold)
    extracted = filter_and_extract(retained, gateway, judge, judge_prompts)
    records, summary = apply_review(extracted.records, review or {})

    stages = check_stages(
        {
            "corpus": [p.prompt_id for p in prompts],
            "triaged": [p.prompt_id for p in retained],
            "coding": extracted.coding,
            "candidates": [r.prompt_id for r in records],
            "positives": [r.prompt_id for r in records if r.positive],
        }
    )
    logger.info("Mining stages: %s", stages.to_dict())

    outcome = MiningOutcome(stages=stages, records=records, failures=extracted.failures, review=summary)
    if references is not None:
        outcome.alignment = align_cues(records, references, gateway, judge, k, judge_prompts)
        if validations:
            outcome.alignment = apply_validation(outcome.alignment, validations)
        outcome.alignment_summary = summarize_alignment(outcome.alignment)
    if stages.coding:
        outcome.report = prevalence(records, stages.corpus, stages.coding, outcome.alignment_summary)
    return outcome
