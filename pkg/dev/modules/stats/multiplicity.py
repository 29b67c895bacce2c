from dataclasses import dataclass

import numpy as np
from statsmodels.stats.multitest import multipletests

from core.conf import bench_setting
from core.errors import DomainError


@dataclass(frozen=True)
class FdrResult:
    q_values: list
    rejected: list

    @property
    def rejected_indices(self):
        return {index for index, flag in enumerate(self.rejected) if flag}


def bh_fdr(p_values, alpha=None):
    """Benjamini-Hochberg step-up adjustment, q-values in input order."""
    alpha = bench_setting("ALPHA") if alpha is None else alpha
    p = np.asarray(list(p_values), dtype=float)
    if p.size == 0:
        return FdrResult([], [])
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise DomainError("p-values must lie in [0, 1]", p_values=p.tolist())
    rejected, q_values, _, _ = multipletests(p, alpha=alpha, method="fdr_bh")
    return FdrResult([float(min(1.0, q)) for q in q_values], [bool(flag) for flag in rejected])


def stars(q):
    if q is None:
        return ""
    if q < 0.001:
        return "***"
    if q < 0.01:
        return "**"
    if q < 0.05:
        return "*"
    return ""
