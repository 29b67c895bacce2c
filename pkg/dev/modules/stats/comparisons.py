"""Strategy-versus-baseline tests over per-pair sensitivity rates."""

import logging
from collections import defaultdict
from dataclasses import dataclass, replace

from django.db import models

from core.errors import ContractError

from .multiplicity import bh_fdr, stars
from .nonparametric import mann_whitney, rank_biserial

logger = logging.getLogger(__name__)


class FdrFamily(models.TextChoices):
    TABLE = "table", "One family per output table"
    COLUMN = "column", "One family per grouping and strategy"


@dataclass(frozen=True)
class StatResult:
    comparison_id: str
    grouping: str
    group: str
    strategy_id: str
    statistic: float
    r_rb: float
    p: float
    method: str
    q: float | None = None
    stars: str = ""

    def __post_init__(self):
        if not -1 <= self.r_rb <= 1:
            raise ContractError("rank-biserial correlation outside [-1, 1]", r_rb=self.r_rb)
        if not 0 <= self.p <= 1:
            raise ContractError("p-value outside [0, 1]", p=self.p)

    def to_dict(self):
        return {
            "comparison_id": self.comparison_id,
            "grouping": self.grouping,
            "group": self.group,
            "strategy_id": self.strategy_id,
            "statistic": self.statistic,
            "r_rb": self.r_rb,
            "p": self.p,
            "q": self.q,
            "stars": self.stars,
            "method": self.method,
        }


def comparison_id(grouping, group, strategy_id):
    return f"{grouping}:{group}:{strategy_id}"


def adjust(results, family=FdrFamily.TABLE, alpha=None):
    """Attach BH q-values and stars within each family."""
    families = defaultdict(list)
    for index, result in enumerate(results):
        key = (result.grouping,) if family == FdrFamily.TABLE else (result.grouping, result.strategy_id)
        families[key].append(index)

    adjusted = list(results)
    for indices in families.values():
        fdr = bh_fdr([results[i].p for i in indices], alpha=alpha)
        for i, q in zip(indices, fdr.q_values, strict=True):
            adjusted[i] = replace(results[i], q=q, stars=stars(q))
    return adjusted


def compare_strategies(summaries, baseline, family=FdrFamily.TABLE, alpha=None):
    """Test every non-baseline strategy against the baseline within each group.

    ``summaries`` are group samples carrying ``grouping``, ``group``,
    ``strategy_id`` and per-pair ``rates``. Groups with an empty sample on
    either side are skipped.
    """
    samples = defaultdict(dict)
    for summary in summaries:
        samples[(summary.grouping, summary.group)][summary.strategy_id] = list(summary.rates)

    results = []
    for (grouping, group), by_strategy in sorted(samples.items()):
        null = by_strategy.get(baseline)
        if not null:
            logger.warning("No baseline sample for %s=%s; group left untested", grouping, group)
            continue
        for strategy_id, rates in sorted(by_strategy.items()):
            if strategy_id == baseline:
                continue
            if not rates:
                logger.warning("Empty sample for %s in %s=%s; comparison skipped", strategy_id, grouping, group)
                continue
            test = mann_whitney(null, rates)
            results.append(
                StatResult(
                    comparison_id=comparison_id(grouping, group, strategy_id),
                    grouping=grouping,
                    group=group,
                    strategy_id=strategy_id,
                    statistic=test.u,
                    r_rb=rank_biserial(null, rates),
                    p=test.p,
                    method=test.method,
                )
            )
    return adjust(results, family=family, alpha=alpha)
