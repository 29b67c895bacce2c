"""Mann-Whitney U and the rank-biserial effect size."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from core.errors import DomainError

# exact null distribution up to this combined sample size (tie-free only)
EXACT_MAX_N = 12


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    method: str


def _samples(sample_a, sample_b):
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DomainError("Mann-Whitney needs two non-empty samples", n_a=int(a.size), n_b=int(b.size))
    return a, b


def mann_whitney(sample_a, sample_b):
    """Two-sided test; ``u`` is the statistic of ``sample_a``.

    Exact p for small tie-free samples, otherwise the normal approximation
    with tie and continuity corrections.
    """
    a, b = _samples(sample_a, sample_b)
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return MannWhitneyResult(a.size * b.size / 2, 1.0, "degenerate")

    has_ties = np.unique(pooled).size < pooled.size
    method = "exact" if pooled.size <= EXACT_MAX_N and not has_ties else "asymptotic"
    result = stats.mannwhitneyu(a, b, alternative="two-sided", use_continuity=True, method=method)
    return MannWhitneyResult(float(result.statistic), float(min(1.0, result.pvalue)), method)


def rank_biserial(sample_null, sample_strategy):
    """Positive when the strategy sample tends to be lower than the null sample."""
    null, strategy = _samples(sample_null, sample_strategy)
    greater = np.sum(null[:, None] > strategy[None, :])
    lower = np.sum(null[:, None] < strategy[None, :])
    return float((greater - lower) / (null.size * strategy.size))
