"""Randomized oracle suite for the statistics engine."""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import oracles
from .agreement import agreement
from .multiplicity import bh_fdr
from .nonparametric import mann_whitney
from .proportions import wilson_ci
from .rates import exact_rate_ratio_test, poisson_rate_glm
from .resampling import bootstrap_ci

logger = logging.getLogger(__name__)


@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _check_exact_mann_whitney(rng, cases):
    worst = 0.0
    for _ in range(cases):
        total = int(rng.integers(2, 11))
        n_a = int(rng.integers(1, total))
        values = rng.choice(1000, size=total, replace=False).astype(float)
        a, b = values[:n_a].tolist(), values[n_a:].tolist()
        worst = max(worst, abs(mann_whitney(a, b).p - oracles.enumerated_mann_whitney_p(a, b)))
    return OracleCheck("mann_whitney_exact", worst <= 1e-12, {"cases": cases, "max_abs_error": worst})


def _check_normal_mann_whitney():
    fixtures = {
        "identical": (list(range(1, 31)), list(range(1, 31))),
        "overlapping": (list(range(1, 31)), list(range(11, 41))),
        "ties": ([1, 1, 2, 2, 3, 3, 4, 5, 6, 7, 8, 9, 9], [2, 3, 3, 4, 4, 5, 6, 7, 7, 8]),
    }
    errors = {
        name: abs(mann_whitney(a, b).p - oracles.normal_mann_whitney_p(a, b)) for name, (a, b) in fixtures.items()
    }
    return OracleCheck("mann_whitney_normal", max(errors.values()) <= 1e-9, errors)


def _check_bh(rng, cases):
    worst = 0.0
    monotone = True
    for _ in range(cases):
        p = rng.uniform(0, 1, size=int(rng.integers(1, 30))) ** 3
        q = np.asarray(bh_fdr(p).q_values)
        worst = max(worst, float(np.max(np.abs(q - oracles.stepup_q_values(p.tolist())))))
        monotone &= bool(np.all(np.diff(q[np.argsort(p, kind="stable")]) >= -1e-15))
    fixed = bh_fdr([0.001, 0.9]).q_values
    passed = worst <= 1e-12 and monotone and np.allclose(fixed, [0.002, 0.9], rtol=0, atol=1e-12)
    return OracleCheck("bh_fdr", bool(passed), {"cases": cases, "max_abs_error": worst, "monotone": monotone})


def _check_wilson():
    estimate = wilson_ci(24, 97)
    passed = abs(estimate.lower - 0.1723) <= 5e-4 and abs(estimate.upper - 0.3418) <= 5e-4
    return OracleCheck("wilson", passed, estimate.to_dict())


def _glm_fixture(rng):
    while True:
        sizes = rng.integers(5, 20, size=2)
        group = np.repeat([1, 0], sizes)
        tokens = rng.integers(50, 500, size=group.size)
        rate = rng.uniform(0.01, 0.05) * np.where(group == 1, rng.uniform(0.5, 3.0), 1.0)
        counts = rng.poisson(rate * tokens)
        if counts[group == 1].sum() >= 20 and counts[group == 0].sum() >= 20:
            return counts, tokens, group


def _check_glm(rng, cases):
    worst = offset_drift = 0.0
    same_side = 0
    for _ in range(cases):
        counts, tokens, group = _glm_fixture(rng)
        k1, k0 = counts[group == 1].sum(), counts[group == 0].sum()
        t1, t0 = tokens[group == 1].sum(), tokens[group == 0].sum()
        fit = poisson_rate_glm(counts, np.log(tokens), group)
        doubled = poisson_rate_glm(counts, np.log(2 * tokens), group)
        worst = max(worst, abs(fit.beta1 - oracles.closed_form_log_rate_ratio(k1, t1, k0, t0)))
        offset_drift = max(offset_drift, abs(fit.beta1 - doubled.beta1))
        exact_p = exact_rate_ratio_test(int(k1), int(t1), int(k0), int(t0))
        same_side += (fit.p < 0.05) == (exact_p < 0.05)

    agreement_share = same_side / cases
    if agreement_share < 0.95:
        disagreement = 100 * (1 - agreement_share)
        logger.warning("GLM and exact tests disagree on significance in %.1f%% of fixtures", disagreement)
    detail = {
        "cases": cases,
        "max_abs_error": worst,
        "offset_drift": offset_drift,
        "same_side_share": agreement_share,
    }
    return OracleCheck("poisson_glm", worst <= 1e-6 and offset_drift <= 1e-8, detail)


def _check_exact_rate_ratio():
    values = {"5_vs_0": exact_rate_ratio_test(5, 100, 0, 100), "3_vs_3": exact_rate_ratio_test(3, 100, 3, 100)}
    passed = abs(values["5_vs_0"] - 0.0625) <= 1e-12 and abs(values["3_vs_3"] - 1.0) <= 1e-12
    return OracleCheck("exact_rate_ratio", passed, values)


def _check_agreement(rng, cases):
    first, second = oracles.labels_from_table(20, 4, 3, 13)
    result = agreement(first, second)
    worst = abs(result.kappa - oracles.kappa_from_table(20, 4, 3, 13))
    for _ in range(cases):
        table = [int(v) for v in rng.integers(1, 30, size=4)]
        worst = max(worst, abs(agreement(*oracles.labels_from_table(*table)).kappa - oracles.kappa_from_table(*table)))
    passed = result.matches == 33 and abs(result.percent_agreement - 0.825) <= 1e-12 and worst <= 1e-10
    return OracleCheck("agreement", passed, {"cases": cases, "max_abs_error": worst})


def _check_bootstrap(seed):
    labels = [1] * 16 + [0] * 24
    first = bootstrap_ci(labels, seed=seed)
    second = bootstrap_ci(labels, seed=seed)
    constant = bootstrap_ci([0.4] * 40, seed=seed, resamples=200)
    degenerate = np.isclose(constant.lower, 0.4) and np.isclose(constant.upper, 0.4)
    passed = first == second and first.lower <= 0.4 <= first.upper and bool(degenerate)
    return OracleCheck("bootstrap", passed, first.to_dict())


def run_selftest(seed=0, mann_whitney_cases=500, bh_cases=1000, glm_cases=200, kappa_cases=100):
    rng = np.random.default_rng(seed)
    checks = [
        _check_exact_mann_whitney(rng, mann_whitney_cases),
        _check_normal_mann_whitney(),
        _check_bh(rng, bh_cases),
        _check_wilson(),
        _check_glm(rng, glm_cases),
        _check_exact_rate_ratio(),
        _check_agreement(rng, kappa_cases),
        _check_bootstrap(seed),
    ]
    for check in checks:
        logger.info("Oracle %s: %s", check.name, "ok" if check.passed else "MISMATCH")
    return checks
