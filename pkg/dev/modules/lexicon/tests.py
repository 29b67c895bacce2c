import json
import math
from pathlib import Path

from django.test import SimpleTestCase

from core.errors import DomainError, SchemaError
from modules.dilemmas.domain import Condition, Decision
from modules.dilemmas.trials import TrialRecord
from modules.runner.sensitivity import PairSensitivity
from modules.stats.rates import EffectMethod

from .analysis import LexiconDocument, analyze_features, documents_from_trials
from .codebook import count_features, load_codebook, parse_codebook

FIXTURES = Path(__file__).resolve().parent / "fixtures"

NEGATION_ONLY = parse_codebook(
    {
        "features": [
            {"feature_id": "negation", "display_name": "Negation", "patterns": [r"\bnot\b"], "category": "stance"}
        ]
    }
)


def _doc(matches, tokens=100, bias="anchoring"):
    return LexiconDocument(bias, " ".join(["not"] * matches + ["word"] * (tokens - matches)))


class CodebookTest(SimpleTestCase):
    def test_sample_codebook_loads(self):
        codebook = load_codebook(FIXTURES / "codebook.json")
        self.assertIn("bug_failure_terms", codebook.feature_ids)

    def test_duplicate_feature_ids(self):
        feature = {"feature_id": "x", "display_name": "X", "patterns": ["a"], "category": "topical"}
        with self.assertRaises(SchemaError):
            parse_codebook({"features": [feature, feature]})

    def test_pattern_must_compile(self):
        feature = {"feature_id": "x", "display_name": "X", "patterns": ["(unclosed"], "category": "topical"}
        with self.assertRaises(SchemaError):
            parse_codebook({"features": [feature]})


class CountFeaturesTest(SimpleTestCase):
    def test_case_insensitive_matches(self):
        counts = count_features(NEGATION_ONLY, "not now, NOT ever")
        self.assertEqual(counts.counts, {"negation": 2})
        self.assertEqual(counts.token_count, 4)

    def test_no_matches(self):
        self.assertEqual(count_features(NEGATION_ONLY, "ship it today").counts, {"negation": 0})

    def test_overlapping_patterns_count_once(self):
        """Test a phrase matched by two patterns of one feature counts once, at its longest"""
        codebook = parse_codebook(
            {
                "features": [
                    {
                        "feature_id": "certainty",
                        "display_name": "Certainty",
                        "patterns": [r"\bsure\b", r"\bpretty sure\b", r"\bpretty\b"],
                        "category": "stance",
                    }
                ]
            }
        )
        counts = count_features(codebook, "I am pretty sure, quite sure, and pretty tired")
        self.assertEqual(counts.counts, {"certainty": 3})

    def test_zero_width_pattern_is_not_counted(self):
        codebook = parse_codebook(
            {
                "features": [
                    {"feature_id": "x", "display_name": "X", "patterns": [r"(?:maybe)?", r"\b"], "category": "stance"}
                ]
            }
        )
        self.assertEqual(count_features(codebook, "maybe later, maybe not").counts, {"x": 2})

    def test_hand_tallied_document(self):
        tally = json.loads((FIXTURES / "tally.json").read_text(encoding="utf-8"))
        counts = count_features(load_codebook(FIXTURES / "codebook.json"), tally["document"])
        self.assertEqual(counts.token_count, tally["token_count"])
        self.assertEqual(counts.counts, tally["counts"])

    def test_empty_document(self):
        with self.assertRaises(DomainError):
            count_features(NEGATION_ONLY, "   ")


class AnalyzeFeaturesTest(SimpleTestCase):
    def test_three_to_one_rates(self):
        analysis = analyze_features([_doc(5), _doc(7)], [_doc(1), _doc(3)], NEGATION_ONLY)
        (effect,) = analysis.effects
        self.assertIn(effect.method, (EffectMethod.GLM_HC, EffectMethod.GLM_QUASI))
        self.assertAlmostEqual(effect.log_rate_ratio, math.log(3), delta=1e-6)
        self.assertIsNotNone(effect.q)

    def test_identical_rates(self):
        (effect,) = analyze_features([_doc(4), _doc(6)], [_doc(5), _doc(5)], NEGATION_ONLY).effects
        self.assertAlmostEqual(effect.log_rate_ratio, 0.0, delta=1e-8)

    def test_absent_feature_is_degenerate_and_untested(self):
        codebook = load_codebook(FIXTURES / "codebook.json")
        analysis = analyze_features([_doc(5), _doc(7)], [_doc(1), _doc(3)], codebook)
        degenerate = [e.feature_id for e in analysis.effects if e.degenerate]
        self.assertEqual(len(degenerate), 5)
        self.assertEqual(analysis.metadata["tested_cells"], 1)
        self.assertTrue(all(e.q is None for e in analysis.effects if e.degenerate))

    def test_duplicating_documents_keeps_ratios(self):
        sensitive, non_sensitive = [_doc(5), _doc(9)], [_doc(2), _doc(4), _doc(3)]
        once = analyze_features(sensitive, non_sensitive, NEGATION_ONLY).effects[0]
        twice = analyze_features(sensitive * 2, non_sensitive * 2, NEGATION_ONLY).effects[0]
        self.assertAlmostEqual(once.log_rate_ratio, twice.log_rate_ratio, delta=1e-8)

    def test_filler_lowers_positive_ratio(self):
        base = analyze_features([_doc(5), _doc(9)], [_doc(2), _doc(4)], NEGATION_ONLY).effects[0]
        padded = analyze_features([_doc(5, 150), _doc(9, 150)], [_doc(2), _doc(4)], NEGATION_ONLY).effects[0]
        self.assertGreater(base.log_rate_ratio, 0)
        self.assertLess(padded.log_rate_ratio, base.log_rate_ratio)

    def test_per_bias_rows_and_top_features(self):
        codebook = load_codebook(FIXTURES / "codebook.json")
        sensitive = [_doc(5), _doc(7), _doc(6, bias="framing")]
        non_sensitive = [_doc(1), _doc(3), _doc(2, bias="framing")]
        analysis = analyze_features(sensitive, non_sensitive, codebook)
        self.assertEqual([e.bias_type for e in analysis.effects][:: len(codebook.features)], ["anchoring", "framing"])
        self.assertEqual(analysis.top_features(), {"anchoring": ["negation"], "framing": ["negation"]})

    def test_empty_group(self):
        with self.assertRaises(DomainError):
            analyze_features([_doc(1)], [], NEGATION_ONLY)


class DocumentsFromTrialsTest(SimpleTestCase):
    def test_biased_responses_split_by_sensitivity(self):
        pair = type("Pair", (), {"bias_type": "anchoring"})()
        records = [
            TrialRecord(
                "m", "sAX+BW", "p1", Condition.BIASED, 0, "Not this one.\nDecision: Option A", Decision.option_a()
            ),
            TrialRecord("m", "sAX+BW", "p1", Condition.UNBIASED, 0, "Decision: Option B", Decision.option_b()),
            TrialRecord("m", "sAX+BW", "p2", Condition.BIASED, 0, "Decision: Option A", Decision.option_a()),
            TrialRecord("m", "∅", "p2", Condition.BIASED, 0, "Decision: Option A", Decision.option_a()),
        ]
        sensitivities = [PairSensitivity("m", "sAX+BW", "p1", 1, 1, 1), PairSensitivity("m", "sAX+BW", "p2", 1, 0, 1)]
        sensitive, non_sensitive = documents_from_trials(records, sensitivities, {"p1": pair, "p2": pair})
        self.assertEqual([d.trial_key[2] for d in sensitive], ["p1"])
        self.assertEqual([d.trial_key[2] for d in non_sensitive], ["p2"])
