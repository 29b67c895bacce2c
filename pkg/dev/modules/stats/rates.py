"""Two-group Poisson rate-ratio inference for per-token feature usage.

``log_rate_ratio`` is positive when the feature is used more often per token
in group 1 (the sensitive documents).
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import statsmodels.api as sm
from django.db import models
from scipy.stats import binom, binomtest, norm
from statsmodels.tools.sm_exceptions import ConvergenceWarning

from core.conf import bench_setting
from core.errors import ContractError, DomainError, FitError

logger = logging.getLogger(__name__)


class EffectMethod(models.TextChoices):
    GLM_HC = "glm_hc", "Poisson GLM, robust SE"
    GLM_QUASI = "glm_quasi", "Poisson GLM, quasi-Poisson scaled SE"
    EXACT = "exact", "Exact conditional test"
    DEGENERATE = "degenerate", "No occurrences"


class ExactMethod(models.TextChoices):
    MINLIKE = "minlike", "Minimum likelihood"
    DOUBLING = "doubling", "Doubled tail"


@dataclass(frozen=True)
class GlmFit:
    beta0: float
    beta1: float
    se: float
    dispersion: float
    quasi: bool
    cov_type: str

    @property
    def p(self):
        return float(2 * norm.sf(abs(self.beta1 / self.se)))


@dataclass(frozen=True)
class FeatureEffect:
    bias_type: str
    feature_id: str
    method: EffectMethod
    k1: int
    t1: int
    k0: int
    t0: int
    log_rate_ratio: float | None = None
    se: float | None = None
    dispersion: float | None = None
    p: float | None = None
    q: float | None = None
    stars: str = ""

    def __post_init__(self):
        if self.method == EffectMethod.EXACT and (self.se is not None or self.dispersion is not None):
            raise ContractError("exact effects carry no standard error or dispersion")
        if self.method in (EffectMethod.GLM_HC, EffectMethod.GLM_QUASI):
            if not (self.se and self.se > 0) or not (self.dispersion and self.dispersion > 0):
                raise ContractError("GLM effects need a positive standard error and dispersion")

    @property
    def degenerate(self):
        return self.method == EffectMethod.DEGENERATE

    def to_dict(self):
        return {
            "bias_type": self.bias_type,
            "feature_id": self.feature_id,
            "method": str(self.method),
            "log_rate_ratio": self.log_rate_ratio,
            "se": self.se,
            "dispersion": self.dispersion,
            "p": self.p,
            "q": self.q,
            "stars": self.stars,
            "k1": self.k1,
            "T1": self.t1,
            "k0": self.k0,
            "T0": self.t0,
        }


def _glm_inputs(counts, log_offsets, group):
    y = np.asarray(counts, dtype=float)
    offsets = np.asarray(log_offsets, dtype=float)
    g = np.asarray(group, dtype=int)
    if not y.size == offsets.size == g.size:
        raise DomainError("counts, offsets and group indicators must align", n=int(y.size))
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise DomainError("counts must be nonnegative integers")
    if not np.all(np.isfinite(offsets)):
        raise DomainError("log offsets must be finite; token counts must be positive")
    if not set(np.unique(g)) <= {0, 1} or not (np.any(g == 1) and np.any(g == 0)):
        raise DomainError("need at least one document in each group")
    if y.sum() == 0:
        raise DomainError("feature never occurs; the rate ratio is degenerate")
    return y, offsets, g


def poisson_rate_glm(counts, log_offsets, group, cov_type="HC0", quasi_trigger=None):
    """Fit ``log E[k] = b0 + b1*g + log T`` by IRLS.

    The sandwich SE needs residual degrees of freedom; saturated fits report
    the model-based SE.
    """
    quasi_trigger = bench_setting("QUASI_POISSON_TRIGGER") if quasi_trigger is None else quasi_trigger
    y, offsets, g = _glm_inputs(counts, log_offsets, group)
    exog = sm.add_constant(g.astype(float), has_constant="add")
    model = sm.GLM(y, exog, family=sm.families.Poisson(), offset=offsets)

    saturated = y.size <= exog.shape[1]
    fit_options = {
        "method": "IRLS",
        "tol": bench_setting("GLM_TOLERANCE"),
        "maxiter": bench_setting("GLM_MAX_ITERATIONS"),
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        fit = model.fit(cov_type="nonrobust" if saturated else cov_type, **fit_options)
    if not fit.converged:
        raise FitError("Poisson GLM did not converge", iterations=fit_options["maxiter"])

    beta0, beta1 = (float(value) for value in fit.params)
    se = float(fit.bse[1])
    if not se > 0:
        # a perfect fit leaves the sandwich empty
        se = float(model.fit(**fit_options).bse[1])
    dispersion = 1.0 if fit.df_resid <= 0 else float(fit.pearson_chi2 / fit.df_resid)
    quasi = dispersion > quasi_trigger
    if quasi:
        se *= np.sqrt(dispersion)
    if not np.isfinite(beta1) or not se > 0:
        raise FitError("Poisson GLM produced no usable estimate", beta1=beta1, se=se)

    return GlmFit(
        beta0=beta0,
        beta1=beta1,
        se=se,
        dispersion=dispersion,
        quasi=quasi,
        cov_type="nonrobust" if saturated else cov_type,
    )


def exact_rate_ratio_test(k1, t1, k0, t0, method=ExactMethod.MINLIKE):
    """Conditional binomial test: given N = k1 + k0, k1 ~ Bin(N, T1 / (T1 + T0))."""
    if t1 <= 0 or t0 <= 0:
        raise DomainError("exposures must be positive", T1=t1, T0=t0)
    if k1 < 0 or k0 < 0 or k1 + k0 == 0:
        raise DomainError("need k1 + k0 > 0 with nonnegative counts", k1=k1, k0=k0)

    total = k1 + k0
    share = t1 / (t1 + t0)
    if method == ExactMethod.DOUBLING:
        tail = min(binom.cdf(k1, total, share), binom.sf(k1 - 1, total, share))
        return float(min(1.0, 2 * tail))
    return float(min(1.0, binomtest(k1, total, share, alternative="two-sided").pvalue))


def rate_ratio_effect(bias_type, feature_id, counts, tokens, group, cov_type="HC0", exact_method=ExactMethod.MINLIKE):
    """Route one (bias, feature) cell to the GLM or the exact test."""
    counts = np.asarray(counts, dtype=int)
    tokens = np.asarray(tokens, dtype=int)
    g = np.asarray(group, dtype=int)
    k1, k0 = int(counts[g == 1].sum()), int(counts[g == 0].sum())
    t1, t0 = int(tokens[g == 1].sum()), int(tokens[g == 0].sum())
    if t1 <= 0 or t0 <= 0:
        raise DomainError("each group needs a positive token total", bias_type=bias_type, T1=t1, T0=t0)
    totals = {"k1": k1, "t1": t1, "k0": k0, "t0": t0}

    if k1 + k0 == 0:
        return FeatureEffect(bias_type, feature_id, EffectMethod.DEGENERATE, **totals)

    if k1 + k0 < bench_setting("EXACT_TEST_THRESHOLD") or k1 == 0 or k0 == 0:
        # Haldane correction keeps the ratio finite when one group has no hits
        c1, c0 = (k1 + 0.5, k0 + 0.5) if k1 == 0 or k0 == 0 else (k1, k0)
        return FeatureEffect(
            bias_type,
            feature_id,
            EffectMethod.EXACT,
            log_rate_ratio=float(np.log((c1 / t1) / (c0 / t0))),
            p=exact_rate_ratio_test(k1, t1, k0, t0, method=exact_method),
            **totals,
        )

    fit = poisson_rate_glm(counts, np.log(tokens), g, cov_type=cov_type)
    if fit.quasi:
        logger.debug("Quasi-Poisson scaling for %s/%s (phi=%.3f)", bias_type, feature_id, fit.dispersion)
    return FeatureEffect(
        bias_type,
        feature_id,
        EffectMethod.GLM_QUASI if fit.quasi else EffectMethod.GLM_HC,
        log_rate_ratio=fit.beta1,
        se=fit.se,
        dispersion=fit.dispersion,
        p=fit.p,
        **totals,
    )
