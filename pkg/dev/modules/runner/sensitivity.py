"""Flip-based bias sensitivity and its aggregation into group samples."""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass

from django.db import models

from core.errors import ContractError, CoverageError
from modules.dilemmas.domain import Condition, DecisionChoice
from modules.dilemmas.trials import TrialRecord

logger = logging.getLogger(__name__)


class Pairing(models.TextChoices):
    RUN_INDEX = "run_index", "Run i biased against run i unbiased"
    MAJORITY = "majority", "Majority vote per condition"


class Grouping(models.TextChoices):
    ALL = "all", "All pairs"
    MODEL = "model", "Per model"
    BIAS = "bias", "Per bias type"
    TIER = "tier", "Per complexity tier"


@dataclass(frozen=True)
class PairSensitivity:
    model_id: str
    strategy_id: str
    pair_id: str
    paired_runs: int
    flips: int
    valid_paired_runs: int

    def __post_init__(self):
        if not 0 <= self.flips <= self.valid_paired_runs <= self.paired_runs:
            raise ContractError(
                "need flips <= valid_paired_runs <= paired_runs",
                flips=self.flips,
                valid=self.valid_paired_runs,
                paired=self.paired_runs,
            )

    @property
    def rate(self):
        if self.valid_paired_runs == 0:
            return None
        return self.flips / self.valid_paired_runs

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "strategy_id": self.strategy_id,
            "pair_id": self.pair_id,
            "paired_runs": self.paired_runs,
            "flips": self.flips,
            "valid_paired_runs": self.valid_paired_runs,
            "rate": self.rate,
        }


@dataclass(frozen=True)
class GroupSummary:
    grouping: str
    group: str
    strategy_id: str
    rates: tuple
    pooled_flips: int
    pooled_valid: int
    undefined_pairs: int = 0

    @property
    def empty(self):
        return not self.rates

    @property
    def mean(self):
        return sum(self.rates) / len(self.rates) if self.rates else None

    @property
    def pooled_rate(self):
        return self.pooled_flips / self.pooled_valid if self.pooled_valid else None

    def to_dict(self):
        return {
            "grouping": self.grouping,
            "group": self.group,
            "strategy_id": self.strategy_id,
            "n_pairs": len(self.rates),
            "mean": self.mean,
            "pooled_flips": self.pooled_flips,
            "pooled_valid": self.pooled_valid,
            "pooled_rate": self.pooled_rate,
            "undefined_pairs": self.undefined_pairs,
            "empty": self.empty,
            "rates": list(self.rates),
        }


@dataclass(frozen=True)
class ValiditySummary:
    model_id: str
    strategy_id: str
    paired_runs: int
    valid_paired_runs: int

    @property
    def rate(self):
        return self.valid_paired_runs / self.paired_runs if self.paired_runs else None

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "strategy_id": self.strategy_id,
            "paired_runs": self.paired_runs,
            "valid_paired_runs": self.valid_paired_runs,
            "validity_rate": self.rate,
        }


def _majority(decisions):
    counts = Counter(d.choice for d in decisions if d.is_valid)
    ranked = counts.most_common()
    if not ranked or (len(ranked) > 1 and ranked[0][1] == ranked[1][1]):
        return DecisionChoice.INVALID
    return ranked[0][0]


def _pair_sensitivity(cell, by_condition, pairing):
    biased, unbiased = by_condition[Condition.BIASED], by_condition[Condition.UNBIASED]
    if pairing == Pairing.MAJORITY:
        choices = (_majority(biased.values()), _majority(unbiased.values()))
        valid = DecisionChoice.INVALID not in choices
        return PairSensitivity(*cell, 1, int(valid and choices[0] != choices[1]), int(valid))

    flips = valid = 0
    for run_index in sorted(biased):
        first, second = biased[run_index], unbiased[run_index]
        if first.is_valid and second.is_valid:
            valid += 1
            flips += first.choice != second.choice
    return PairSensitivity(*cell, len(biased), flips, valid)


def compute_sensitivity(records, pairing=Pairing.RUN_INDEX):
    """One PairSensitivity per (model, strategy, pair), sorted by that key.

    Elicitation records are ignored. Every cell needs both conditions with the
    same run indices.
    """
    cells = defaultdict(lambda: {Condition.BIASED: {}, Condition.UNBIASED: {}})
    for record in records:
        if isinstance(record, TrialRecord):
            cell = (record.model_id, record.strategy_id, record.pair_id)
            cells[cell][Condition(record.condition)][record.run_index] = record.decision

    missing = []
    for cell, by_condition in cells.items():
        biased, unbiased = set(by_condition[Condition.BIASED]), set(by_condition[Condition.UNBIASED])
        for condition, runs in ((Condition.UNBIASED, biased - unbiased), (Condition.BIASED, unbiased - biased)):
            missing.extend([*cell, str(condition), run_index] for run_index in sorted(runs))
    if missing:
        raise CoverageError(f"{len(missing)} trials have no counterpart in the other condition", missing=missing)

    return [_pair_sensitivity(cell, cells[cell], pairing) for cell in sorted(cells)]


def _group_of(sensitivity, grouping, pairs_by_id):
    if grouping == Grouping.ALL:
        return "all"
    if grouping == Grouping.MODEL:
        return sensitivity.model_id
    pair = (pairs_by_id or {}).get(sensitivity.pair_id)
    if pair is None:
        raise ContractError(f"pair {sensitivity.pair_id} is not in the dataset", pair_id=sensitivity.pair_id)
    if grouping == Grouping.BIAS:
        return str(pair.bias_type)
    if pair.tier is None:
        raise ContractError("tier grouping needs tier assignments", pair_id=pair.pair_id)
    return str(pair.tier)


def aggregate_sensitivity(sensitivities, grouping, pairs_by_id=None):
    """Per (group, strategy) sample of per-pair rates plus the pooled counts.

    Pairs whose rate is undefined are left out of the sample and counted in
    ``undefined_pairs``.
    """
    rates = defaultdict(list)
    pooled = defaultdict(lambda: [0, 0, 0])
    for sensitivity in sensitivities:
        key = (_group_of(sensitivity, grouping, pairs_by_id), sensitivity.strategy_id)
        totals = pooled[key]
        totals[0] += sensitivity.flips
        totals[1] += sensitivity.valid_paired_runs
        if sensitivity.rate is None:
            totals[2] += 1
        else:
            rates[key].append(sensitivity.rate)

    summaries = []
    for (group, strategy_id), (flips, valid, undefined) in sorted(pooled.items()):
        group_rates = tuple(rates[(group, strategy_id)])
        summary = GroupSummary(str(grouping), group, strategy_id, group_rates, flips, valid, undefined)
        if summary.empty:
            logger.warning(
                "Group %s=%s has no defined rate under %s; excluded from testing", grouping, group, strategy_id
            )
        summaries.append(summary)
    return summaries


def validity_rates(sensitivities):
    totals = defaultdict(lambda: [0, 0])
    for sensitivity in sensitivities:
        cell = totals[(sensitivity.model_id, sensitivity.strategy_id)]
        cell[0] += sensitivity.paired_runs
        cell[1] += sensitivity.valid_paired_runs
    return [
        ValiditySummary(model, strategy, paired, valid)
        for (model, strategy), (paired, valid) in sorted(totals.items())
    ]
