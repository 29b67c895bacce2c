"""Independent reference computations used by the self-test and unit tests."""

from itertools import combinations

import numpy as np
from scipy.stats import norm, rankdata


def mann_whitney_u(sample_a, sample_b):
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in sample_a for y in sample_b)


def enumerated_mann_whitney_p(sample_a, sample_b):
    """Two-sided p from every assignment of the pooled values to sample a."""
    pooled = list(sample_a) + list(sample_b)
    n_a, n_b = len(sample_a), len(sample_b)
    centre = n_a * n_b / 2
    observed = abs(mann_whitney_u(sample_a, sample_b) - centre)

    extreme = total = 0
    for chosen in combinations(range(len(pooled)), n_a):
        picked = set(chosen)
        a = [pooled[i] for i in chosen]
        b = [pooled[i] for i in range(len(pooled)) if i not in picked]
        total += 1
        if abs(mann_whitney_u(a, b) - centre) >= observed - 1e-9:
            extreme += 1
    return extreme / total


def normal_mann_whitney_p(sample_a, sample_b):
    """Tie-corrected normal approximation with continuity correction."""
    n_a, n_b = len(sample_a), len(sample_b)
    n = n_a + n_b
    ranks = rankdata(list(sample_a) + list(sample_b))
    u = ranks[:n_a].sum() - n_a * (n_a + 1) / 2
    _, tie_sizes = np.unique(ranks, return_counts=True)
    tie_term = np.sum(tie_sizes**3 - tie_sizes) / (n * (n - 1))
    sigma = np.sqrt(n_a * n_b / 12 * ((n + 1) - tie_term))
    if sigma == 0:
        return 1.0
    z = max(0.0, abs(u - n_a * n_b / 2) - 0.5) / sigma
    return float(min(1.0, 2 * norm.sf(z)))


def stepup_q_values(p_values):
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    q = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        index = order[rank - 1]
        running = min(running, m * p_values[index] / rank)
        q[index] = min(1.0, running)
    return q


def kappa_from_table(a, b, c, d):
    """Cohen's kappa for a 2x2 table: a=both yes, b=first only, c=second only, d=both no."""
    n = a + b + c + d
    observed = (a + d) / n
    expected = ((a + b) * (a + c) + (c + d) * (b + d)) / n**2
    return (observed - expected) / (1 - expected)


def labels_from_table(a, b, c, d):
    first = [1] * a + [1] * b + [0] * c + [0] * d
    second = [1] * a + [0] * b + [1] * c + [0] * d
    return first, second


def closed_form_log_rate_ratio(k1, t1, k0, t0):
    return float(np.log((k1 / t1) / (k0 / t0)))
