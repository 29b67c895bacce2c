"""Quartile complexity tiers over inference-step counts.

Boundaries are nearest-rank percentiles (inclusive); a value equal to a
boundary falls in the lower tier.
"""

import logging
from dataclasses import replace

from core.errors import DomainError
from modules.dilemmas.domain import ComplexityTier

from .verification import verify_pair

logger = logging.getLogger(__name__)

_ORDERED_TIERS = (ComplexityTier.LOW, ComplexityTier.MID_LOW, ComplexityTier.MID_HIGH, ComplexityTier.HIGH)


def nearest_rank(sorted_values, percent):
    rank = max(1, -(-len(sorted_values) * percent // 100))
    return sorted_values[rank - 1]


def quartile_boundaries(values):
    if not values:
        raise DomainError("cannot compute quartiles of an empty step distribution")
    ordered = sorted(values)
    return tuple(nearest_rank(ordered, percent) for percent in (25, 50, 75))


def tier_for(value, boundaries):
    for tier, boundary in zip(_ORDERED_TIERS, boundaries, strict=False):
        if value <= boundary:
            return tier
    return ComplexityTier.HIGH


def inference_steps(pair, depth_limit=None):
    if pair.inference_steps is not None:
        return pair.inference_steps
    return verify_pair(pair, depth_limit=depth_limit).unbiased_steps


def assign_tiers(pairs, depth_limit=None):
    """Return ``[(pair_id, ComplexityTier)]`` in input order."""
    steps = [inference_steps(pair, depth_limit) for pair in pairs]
    boundaries = quartile_boundaries(steps)
    logger.info("Tier boundaries (nearest-rank Q1/Q2/Q3): %s", boundaries)
    return [(pair.pair_id, tier_for(value, boundaries)) for pair, value in zip(pairs, steps, strict=True)]


def with_tiers(pairs, depth_limit=None):
    tiers = dict(assign_tiers(pairs, depth_limit))
    return [replace(pair, tier=tiers[pair.pair_id]) for pair in pairs]
