import math
import random
from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase

from core.errors import ContractError, DomainError

from . import oracles
from .agreement import agreement
from .comparisons import FdrFamily, compare_strategies
from .multiplicity import bh_fdr, stars
from .nonparametric import mann_whitney, rank_biserial
from .proportions import wilson_ci
from .rates import EffectMethod, ExactMethod, FeatureEffect, exact_rate_ratio_test, poisson_rate_glm, rate_ratio_effect
from .resampling import bootstrap_ci, bootstrap_difference_ci
from .selftest import run_selftest


class MannWhitneyTest(SimpleTestCase):
    def test_complete_separation_uses_exact_distribution(self):
        result = mann_whitney([1, 2, 3], [4, 5, 6])
        self.assertEqual(result.u, 0)
        self.assertEqual(result.method, "exact")
        self.assertAlmostEqual(result.p, 0.1, places=12)

    def test_identical_constant_samples(self):
        self.assertEqual(mann_whitney([5, 5, 5], [5, 5, 5]).p, 1.0)

    def test_large_samples_match_normal_approximation(self):
        a = list(range(1, 31))
        for shift in (0, 5, 12):
            b = [value + shift for value in a]
            result = mann_whitney(a, b)
            self.assertEqual(result.method, "asymptotic")
            self.assertAlmostEqual(result.p, oracles.normal_mann_whitney_p(a, b), delta=1e-9)

    def test_small_samples_with_ties_fall_back_to_approximation(self):
        self.assertEqual(mann_whitney([1, 2, 2], [2, 3, 4]).method, "asymptotic")

    def test_exact_p_matches_enumeration(self):
        rng = random.Random(7)
        for _ in range(100):
            values = rng.sample(range(100), rng.randint(2, 10))
            n_a = rng.randint(1, len(values) - 1)
            a, b = values[:n_a], values[n_a:]
            self.assertAlmostEqual(
                mann_whitney(a, b).p, oracles.enumerated_mann_whitney_p(a, b), delta=1e-12, msg=f"{a} vs {b}"
            )

    def test_empty_sample_is_a_domain_error(self):
        with self.assertRaises(DomainError):
            mann_whitney([], [1.0])


class RankBiserialTest(SimpleTestCase):
    def test_strategy_lower_is_positive(self):
        self.assertEqual(rank_biserial([4, 5, 6], [1, 2, 3]), 1.0)

    def test_identical_samples(self):
        self.assertEqual(rank_biserial([0.2, 0.4, 0.4], [0.2, 0.4, 0.4]), 0.0)

    def test_pair_counting(self):
        self.assertAlmostEqual(rank_biserial([1, 2, 3], [2, 3, 4]), -5 / 9)

    def test_sign_flips_when_swapped(self):
        rng = random.Random(3)
        for _ in range(50):
            a = [rng.randint(0, 5) for _ in range(rng.randint(1, 8))]
            b = [rng.randint(0, 5) for _ in range(rng.randint(1, 8))]
            forward = rank_biserial(a, b)
            self.assertTrue(-1 <= forward <= 1)
            self.assertAlmostEqual(forward, -rank_biserial(b, a))


class BenjaminiHochbergTest(SimpleTestCase):
    def test_all_rejected_on_the_step_up_boundary(self):
        result = bh_fdr([0.01, 0.02, 0.03, 0.04, 0.05], alpha=0.05)
        self.assertEqual(result.rejected_indices, {0, 1, 2, 3, 4})

    def test_single_p_of_one(self):
        result = bh_fdr([1.0])
        self.assertEqual(result.q_values, [1.0])
        self.assertEqual(result.rejected_indices, set())

    def test_two_values(self):
        result = bh_fdr([0.001, 0.9], alpha=0.05)
        self.assertAlmostEqual(result.q_values[0], 0.002)
        self.assertAlmostEqual(result.q_values[1], 0.9)
        self.assertEqual(result.rejected_indices, {0})

    def test_matches_step_up_oracle_and_dominates_p(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            p = rng.uniform(size=int(rng.integers(1, 25))) ** 2
            q = bh_fdr(p).q_values
            np.testing.assert_allclose(q, oracles.stepup_q_values(p.tolist()), rtol=0, atol=1e-12)
            self.assertTrue(all(qi >= pi - 1e-15 for qi, pi in zip(q, p, strict=True)))

    def test_lower_alpha_never_rejects_more(self):
        p = [0.001, 0.008, 0.012, 0.04, 0.2, 0.6]
        self.assertLessEqual(bh_fdr(p, alpha=0.01).rejected_indices, bh_fdr(p, alpha=0.05).rejected_indices)

    def test_invalid_p_value(self):
        with self.assertRaises(DomainError):
            bh_fdr([0.2, 1.3])

    def test_stars_thresholds(self):
        qs = (0.0005, 0.001, 0.009, 0.01, 0.049, 0.05)
        self.assertEqual([stars(q) for q in qs], ["***", "**", "**", "*", "*", ""])


class WilsonTest(SimpleTestCase):
    def test_reported_interval(self):
        estimate = wilson_ci(24, 97)
        self.assertAlmostEqual(estimate.point, 0.2474, places=4)
        self.assertAlmostEqual(estimate.lower, 0.1723, delta=5e-4)
        self.assertAlmostEqual(estimate.upper, 0.3418, delta=5e-4)

    def test_zero_successes_clip_to_zero(self):
        self.assertEqual(wilson_ci(0, 10).lower, 0.0)

    def test_half_is_symmetric(self):
        estimate = wilson_ci(50, 100)
        self.assertAlmostEqual(estimate.center, 0.5)
        self.assertAlmostEqual(0.5 - estimate.lower, estimate.upper - 0.5)

    def test_interval_contains_center(self):
        for successes, trials in [(0, 3), (1, 2), (7, 9), (9, 9), (120, 400)]:
            estimate = wilson_ci(successes, trials)
            self.assertTrue(0 <= estimate.lower <= estimate.center <= estimate.upper <= 1)

    def test_invalid_counts(self):
        for successes, trials in [(3, 2), (-1, 4), (0, 0)]:
            with self.assertRaises(DomainError):
                wilson_ci(successes, trials)


class BootstrapTest(SimpleTestCase):
    def test_constant_vector(self):
        interval = bootstrap_ci([0.4] * 40, seed=1, resamples=500)
        self.assertAlmostEqual(interval.lower, 0.4)
        self.assertAlmostEqual(interval.upper, 0.4)

    def test_same_seed_reproduces_interval(self):
        labels = [1] * 16 + [0] * 24
        first = bootstrap_ci(labels, seed=2024)
        self.assertEqual(first, bootstrap_ci(labels, seed=2024))
        self.assertLessEqual(first.lower, 0.4)
        self.assertGreaterEqual(first.upper, 0.4)

    def test_paired_difference_sign(self):
        baseline = [1] * 30 + [0] * 10
        treatment = [1] * 12 + [0] * 28
        interval = bootstrap_difference_ci(baseline, treatment, seed=5, resamples=2000)
        self.assertAlmostEqual(interval.point, 0.45)
        self.assertGreater(interval.lower, 0)

    def test_paired_lengths_must_match(self):
        with self.assertRaises(DomainError):
            bootstrap_difference_ci([1, 0], [1], seed=0)

    def test_unpaired_difference(self):
        interval = bootstrap_difference_ci([0.0] * 5, [1.0] * 9, seed=0, paired=False, resamples=300)
        self.assertAlmostEqual(interval.lower, -1.0)
        self.assertAlmostEqual(interval.upper, -1.0)

    def test_seed_is_required(self):
        with self.assertRaises(ContractError):
            bootstrap_ci([1.0, 2.0], seed=None)

    def test_empty_input(self):
        with self.assertRaises(DomainError):
            bootstrap_ci([], seed=0)


class AgreementTest(SimpleTestCase):
    def test_identical_labels(self):
        result = agreement([1, 0, 1, 1], [1, 0, 1, 1])
        self.assertEqual(result.percent_agreement, 1.0)
        self.assertAlmostEqual(result.kappa, 1.0)

    def test_reported_agreement(self):
        first, second = oracles.labels_from_table(20, 4, 3, 13)
        result = agreement(first, second)
        self.assertEqual(result.matches, 33)
        self.assertEqual(result.percent_agreement, 0.825)
        self.assertAlmostEqual(result.kappa, oracles.kappa_from_table(20, 4, 3, 13), places=10)
        self.assertAlmostEqual(result.kappa, 0.31 / 0.485, places=10)

    def test_constant_labels_leave_kappa_undefined(self):
        self.assertIsNone(agreement([1, 1, 1], [1, 1, 1]).kappa)

    def test_length_mismatch(self):
        with self.assertRaises(DomainError):
            agreement([1, 0], [1])


class PoissonRateTest(SimpleTestCase):
    def _fit(self, counts, tokens, group):
        return poisson_rate_glm(counts, np.log(tokens), group)

    def test_three_to_one_rate(self):
        fit = self._fit([10, 20, 4, 6], [400, 600, 500, 500], [1, 1, 0, 0])
        self.assertAlmostEqual(fit.beta1, math.log(3), delta=1e-8)

    def test_equal_rates(self):
        fit = self._fit([11, 19, 7, 8], [400, 600, 200, 300], [1, 1, 0, 0])
        self.assertAlmostEqual(fit.beta1, 0.0, delta=1e-8)

    def test_doubling_offsets_keeps_ratio(self):
        counts, tokens, group = [5, 9, 14, 3, 2, 7], np.array([120, 200, 310, 90, 150, 260]), [1, 1, 1, 0, 0, 0]
        doubled = self._fit(counts, 2 * tokens, group).beta1
        self.assertAlmostEqual(self._fit(counts, tokens, group).beta1, doubled, delta=1e-8)

    def test_saturated_fit_reports_model_based_se(self):
        fit = self._fit([30, 10], [1000, 1000], [1, 0])
        self.assertAlmostEqual(fit.beta1, math.log(3), delta=1e-8)
        self.assertAlmostEqual(fit.se, math.sqrt(1 / 30 + 1 / 10), places=6)
        self.assertEqual(fit.dispersion, 1.0)

    def test_overdispersion_triggers_quasi_scaling(self):
        fit = self._fit([0, 40, 1, 35, 2, 0, 20, 1], [100] * 8, [1, 1, 1, 1, 0, 0, 0, 0])
        self.assertGreater(fit.dispersion, 1.5)
        self.assertTrue(fit.quasi)

    def test_hc1_is_larger_than_hc0(self):
        counts, tokens, group = [5, 9, 14, 3, 2, 7], np.array([120, 200, 310, 90, 150, 260]), [1, 1, 1, 0, 0, 0]
        hc0 = poisson_rate_glm(counts, np.log(tokens), group, quasi_trigger=1e9)
        hc1 = poisson_rate_glm(counts, np.log(tokens), group, cov_type="HC1", quasi_trigger=1e9)
        self.assertGreater(hc1.se, hc0.se)

    def test_needs_both_groups(self):
        with self.assertRaises(DomainError):
            self._fit([1, 2], [10, 10], [1, 1])


class ExactRateRatioTest(SimpleTestCase):
    def test_one_sided_outcome(self):
        self.assertAlmostEqual(exact_rate_ratio_test(5, 100, 0, 100), 0.0625, places=12)

    def test_balanced_outcome(self):
        self.assertAlmostEqual(exact_rate_ratio_test(3, 100, 3, 100), 1.0, places=12)

    def test_doubling_method(self):
        self.assertAlmostEqual(exact_rate_ratio_test(5, 100, 0, 100, method=ExactMethod.DOUBLING), 0.0625, places=12)

    def test_vacuous_data(self):
        with self.assertRaises(DomainError):
            exact_rate_ratio_test(0, 100, 0, 100)

    def test_invalid_exposure(self):
        with self.assertRaises(DomainError):
            exact_rate_ratio_test(1, 0, 1, 100)


class RateRatioEffectTest(SimpleTestCase):
    def test_absent_feature_is_degenerate(self):
        effect = rate_ratio_effect("anchoring", "negation", [0, 0], [10, 12], [1, 0])
        self.assertTrue(effect.degenerate)
        self.assertIsNone(effect.p)

    def test_sparse_feature_uses_exact_test(self):
        effect = rate_ratio_effect("anchoring", "negation", [3, 1, 2], [100, 100, 200], [1, 1, 0])
        self.assertEqual(effect.method, EffectMethod.EXACT)
        self.assertIsNone(effect.se)
        self.assertAlmostEqual(effect.log_rate_ratio, math.log((4 / 200) / (2 / 200)))

    def test_one_sided_feature_uses_corrected_ratio(self):
        effect = rate_ratio_effect("anchoring", "negation", [15, 0], [100, 100], [1, 0])
        self.assertEqual(effect.method, EffectMethod.EXACT)
        self.assertAlmostEqual(effect.log_rate_ratio, math.log(15.5 / 0.5))

    def test_frequent_feature_uses_glm(self):
        effect = rate_ratio_effect("anchoring", "negation", [10, 20, 4, 6], [400, 600, 500, 500], [1, 1, 0, 0])
        self.assertIn(effect.method, (EffectMethod.GLM_HC, EffectMethod.GLM_QUASI))
        self.assertAlmostEqual(effect.log_rate_ratio, math.log(3), delta=1e-8)
        self.assertGreater(effect.se, 0)

    def test_exact_effect_rejects_standard_error(self):
        with self.assertRaises(ContractError):
            FeatureEffect("anchoring", "negation", EffectMethod.EXACT, 3, 100, 1, 100, se=0.2)


def _summary(grouping, group, strategy_id, rates):
    return SimpleNamespace(grouping=grouping, group=group, strategy_id=strategy_id, rates=tuple(rates))


class CompareStrategiesTest(SimpleTestCase):
    def setUp(self):
        self.summaries = [
            _summary("bias", "anchoring", "∅", [0.6, 0.8, 0.4, 1.0, 0.6, 0.8, 0.6, 0.4, 1.0, 0.8, 0.6, 0.8]),
            _summary("bias", "anchoring", "CoT", [0.0, 0.2, 0.0, 0.2, 0.0, 0.2, 0.0, 0.2, 0.2, 0.0, 0.0, 0.2]),
            _summary("bias", "anchoring", "BW", [0.6, 0.8, 0.4, 1.0, 0.6, 0.8, 0.6, 0.4, 1.0, 0.8, 0.6, 0.8]),
            _summary("bias", "framing", "∅", [0.2, 0.4, 0.0, 0.2]),
            _summary("bias", "framing", "CoT", []),
        ]

    def test_one_result_per_tested_cell(self):
        results = compare_strategies(self.summaries, baseline="∅")
        self.assertEqual([r.comparison_id for r in results], ["bias:anchoring:BW", "bias:anchoring:CoT"])

    def test_orientation_and_stars(self):
        results = {r.strategy_id: r for r in compare_strategies(self.summaries, baseline="∅")}
        self.assertEqual(results["CoT"].r_rb, 1.0)
        self.assertEqual(results["CoT"].stars, "***")
        self.assertEqual(results["BW"].r_rb, 0.0)
        self.assertEqual(results["BW"].stars, "")

    def test_q_dominates_p_within_family(self):
        for family in FdrFamily:
            for result in compare_strategies(self.summaries, baseline="∅", family=family):
                self.assertGreaterEqual(result.q, result.p)


class SelfTestTest(SimpleTestCase):
    def test_reduced_oracle_suite_passes(self):
        checks = run_selftest(seed=3, mann_whitney_cases=60, bh_cases=100, glm_cases=20, kappa_cases=20)
        failed = [check.to_dict() for check in checks if not check.passed]
        self.assertEqual(failed, [])
