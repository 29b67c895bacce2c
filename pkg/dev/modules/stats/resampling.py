"""Seeded percentile bootstrap."""

from dataclasses import dataclass

import numpy as np

from core.conf import bench_setting
from core.errors import ContractError, DomainError

# resamples drawn per block so memory stays bounded for long vectors
BLOCK_SIZE = 1000


@dataclass(frozen=True)
class Interval:
    point: float
    lower: float
    upper: float
    confidence: float
    resamples: int
    seed: int

    def to_dict(self):
        return {
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "confidence": self.confidence,
            "resamples": self.resamples,
            "seed": self.seed,
        }


def _check(values, seed, resamples, confidence):
    data = np.asarray(list(values), dtype=float)
    if data.size == 0:
        raise DomainError("bootstrap needs at least one value")
    if seed is None:
        raise ContractError("bootstrap seed must be explicit")
    if resamples < 1:
        raise DomainError("resample count must be positive", resamples=resamples)
    if not 0 < confidence < 1:
        raise DomainError("confidence must lie in (0, 1)", confidence=confidence)
    return data


def _percentiles(replicates, confidence):
    tail = (1 - confidence) / 2 * 100
    lower, upper = np.percentile(replicates, [tail, 100 - tail])
    return float(lower), float(upper)


def _replicates(rng, size, resamples, statistic_of_indices):
    chunks = []
    remaining = resamples
    while remaining:
        block = min(BLOCK_SIZE, remaining)
        indices = rng.integers(0, size, size=(block, size))
        chunks.append(statistic_of_indices(indices))
        remaining -= block
    return np.concatenate(chunks)


def bootstrap_ci(values, seed, resamples=None, confidence=0.95, statistic=np.mean):
    """``statistic`` must accept an ``axis`` keyword, as numpy reductions do."""
    resamples = bench_setting("BOOTSTRAP_RESAMPLES") if resamples is None else resamples
    data = _check(values, seed, resamples, confidence)

    rng = np.random.default_rng(seed)
    replicates = _replicates(rng, data.size, resamples, lambda idx: statistic(data[idx], axis=1))
    lower, upper = _percentiles(replicates, confidence)
    return Interval(float(statistic(data)), lower, upper, confidence, resamples, seed)


def bootstrap_difference_ci(sample_a, sample_b, seed, paired=True, resamples=None, confidence=0.95):
    """Interval for mean(a) - mean(b).

    Paired samples share one index vector per resample, unpaired samples are
    resampled independently.
    """
    resamples = bench_setting("BOOTSTRAP_RESAMPLES") if resamples is None else resamples
    a = _check(sample_a, seed, resamples, confidence)
    b = _check(sample_b, seed, resamples, confidence)
    rng = np.random.default_rng(seed)

    if paired:
        if a.size != b.size:
            raise DomainError("paired samples must have equal length", n_a=int(a.size), n_b=int(b.size))
        replicates = _replicates(rng, a.size, resamples, lambda idx: a[idx].mean(axis=1) - b[idx].mean(axis=1))
    else:
        means_a = _replicates(rng, a.size, resamples, lambda idx: a[idx].mean(axis=1))
        means_b = _replicates(rng, b.size, resamples, lambda idx: b[idx].mean(axis=1))
        replicates = means_a - means_b

    lower, upper = _percentiles(replicates, confidence)
    return Interval(float(a.mean() - b.mean()), lower, upper, confidence, resamples, seed)
