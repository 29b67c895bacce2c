import json
import tempfile
from dataclasses import replace
from pathlib import Path

from django.test import SimpleTestCase

from core.errors import ContractError, DuplicatePairError, DuplicateTrialError, SchemaError, VocabularyError

from .dataset import load_dataset, parse_records, serialize_dataset, validate_pair
from .domain import BiasType, ComplexityTier, Condition, Decision, DecisionChoice
from .trials import ElicitationRecord, TrialArchive, TrialRecord, encode_record, read_archive, split_records

MINI_DATASET = Path(__file__).resolve().parent / "fixtures" / "mini.json"


def _records():
    return json.loads(MINI_DATASET.read_text(encoding="utf-8"))


class VocabularyTest(SimpleTestCase):
    def test_bias_vocabulary_is_closed(self):
        """Test there are exactly eight bias labels"""
        self.assertEqual(len(BiasType.values), 8)
        self.assertIn("hyperbolic_discounting", BiasType.values)

    def test_tier_ordering(self):
        """Test complexity tiers are ordered low to high"""
        ranks = [tier.rank for tier in ComplexityTier]
        self.assertEqual(ranks, [0, 1, 2, 3])
        self.assertLess(ComplexityTier.MID_LOW.rank, ComplexityTier.HIGH.rank)

    def test_invalid_decision_needs_reason(self):
        """Test an invalid decision must carry a reason"""
        with self.assertRaises(ContractError):
            Decision(DecisionChoice.INVALID)
        with self.assertRaises(ContractError):
            Decision(DecisionChoice.OPTION_A, "because")
        self.assertEqual(Decision.invalid("no decision marker").reason, "no decision marker")

    def test_decision_from_atom(self):
        self.assertEqual(Decision.from_atom("option_b"), Decision.option_b())
        self.assertFalse(Decision.from_atom("maybe").is_valid)


class LoadDatasetTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, document):
        path = Path(self.tmp.name) / "dataset.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    def test_mini_dataset_loads(self):
        """Test the bundled three-pair dataset loads with sound pairs"""
        pairs = load_dataset(MINI_DATASET)
        self.assertEqual(len(pairs), 3)
        self.assertEqual(pairs[0].unbiased.condition, Condition.UNBIASED)
        self.assertEqual(pairs[0].biased.condition, Condition.BIASED)
        self.assertEqual(pairs[0].inference_steps, 6)
        self.assertIsNone(pairs[1].inference_steps)
        self.assertEqual(pairs[1].expected_decision, Decision.option_b())

    def test_empty_array(self):
        """Test an empty JSON array yields no pairs"""
        self.assertEqual(load_dataset(self.write([])), [])

    def test_unknown_bias_label(self):
        """Test an unknown bias label raises a vocabulary error naming it"""
        records = _records()
        records[1]["bias_type"] = "recency"
        with self.assertRaises(VocabularyError) as ctx:
            load_dataset(self.write(records))
        self.assertIn("recency", ctx.exception.message)
        self.assertEqual(ctx.exception.details["label"], "recency")

    def test_duplicate_pair_id(self):
        """Test a repeated pair_id is rejected"""
        records = _records()
        records.append(dict(records[0]))
        with self.assertRaises(DuplicatePairError):
            load_dataset(self.write(records))

    def test_malformed_record_names_record(self):
        """Test a record missing a field raises a schema error naming it"""
        records = _records()
        del records[2]["biased_text"]
        with self.assertRaises(SchemaError) as ctx:
            load_dataset(self.write(records))
        self.assertEqual(ctx.exception.details["record"], 2)
        self.assertIn("hyperbolic-refactor-001", ctx.exception.message)

    def test_invalid_expected_decision_is_schema_error(self):
        records = _records()
        records[0]["expected_decision"] = "invalid"
        with self.assertRaises(SchemaError):
            load_dataset(self.write(records))

    def test_not_an_array(self):
        with self.assertRaises(SchemaError):
            load_dataset(self.write({"pair_id": "x"}))

    def test_missing_option_label_in_strict_mode(self):
        """Test strict loading rejects a text without both option labels"""
        records = _records()
        records[0]["biased_text"] = records[0]["biased_text"].replace("Option B", "the other one")
        with self.assertRaises(SchemaError) as ctx:
            load_dataset(self.write(records))
        self.assertEqual(ctx.exception.details["violations"][0]["invariant"], "option_label")
        self.assertEqual(len(load_dataset(self.write(records), strict=False)), 3)

    def test_round_trip_preserves_extras(self):
        """Test serializing a loaded dataset parses back to an equal dataset"""
        pairs = load_dataset(MINI_DATASET)
        self.assertIn("hand_trace", pairs[0].extras)
        document = serialize_dataset(pairs)
        self.assertEqual(parse_records(json.loads(json.dumps(document))), pairs)
        self.assertEqual(document, _records())

    def test_tier_survives_round_trip(self):
        pairs = [replace(pair, tier=ComplexityTier.HIGH) for pair in load_dataset(MINI_DATASET)]
        document = serialize_dataset(pairs)
        self.assertEqual(document[0]["tier"], "high")
        self.assertEqual(parse_records(document)[0].tier, ComplexityTier.HIGH)


class ValidatePairTest(SimpleTestCase):
    def setUp(self):
        self.pair = load_dataset(MINI_DATASET)[0]

    def test_well_formed_pair(self):
        self.assertEqual(validate_pair(self.pair), [])

    def test_missing_option_label(self):
        """Test a biased text without "Option B" yields one violation"""
        biased = replace(self.pair.biased, text=self.pair.biased.text.replace("Option B", "Plan two"))
        violations = validate_pair(replace(self.pair, biased=biased))
        self.assertEqual(len(violations), 1)
        self.assertIn("Option B", violations[0].message)

    def test_invalid_expected_decision(self):
        violations = validate_pair(replace(self.pair, expected_decision=Decision.invalid("unknown")))
        self.assertEqual([v.invariant for v in violations], ["expected_decision"])

    def test_mismatched_bias_type(self):
        biased = replace(self.pair.biased, bias_type=BiasType.FRAMING)
        violations = validate_pair(replace(self.pair, biased=biased))
        self.assertEqual([v.invariant for v in violations], ["bias_type"])


class TrialArchiveTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "trials.ndjson"

    def trial(self, run_index=0, condition=Condition.BIASED):
        return TrialRecord(
            model_id="stub-model",
            strategy_id="∅",
            pair_id="p1",
            condition=condition,
            run_index=run_index,
            raw_text="Decision: Option A",
            decision=Decision.option_a(),
            prompt_tokens=12,
            completion_tokens=5,
            timestamp="2024-01-01T00:00:00+00:00",
        )

    def test_append_and_read(self):
        """Test appended records read back in order"""
        archive = TrialArchive(self.path)
        archive.append(self.trial(0))
        archive.append(self.trial(1))
        elicitation = ElicitationRecord("stub-model", "2sAX", "p1", 0, Condition.BIASED, "Best Practices: x", "x")
        archive.append(elicitation)

        trials, elicitations = split_records(list(read_archive(self.path)))
        self.assertEqual(trials, [self.trial(0), self.trial(1)])
        self.assertEqual(elicitations, [elicitation])

    def test_duplicate_key_rejected(self):
        """Test the same trial key cannot be archived twice"""
        archive = TrialArchive(self.path)
        archive.append(self.trial(0))
        with self.assertRaises(DuplicateTrialError):
            archive.append(self.trial(0))

    def test_reopened_archive_knows_keys(self):
        TrialArchive(self.path).append(self.trial(3))
        reopened = TrialArchive(self.path)
        self.assertTrue(reopened.has_trial(self.trial(3).key))
        self.assertFalse(reopened.has_trial(self.trial(3, Condition.UNBIASED).key))

    def test_failed_record_is_replaced(self):
        """Test a retry supersedes an archived gateway failure"""
        failed = replace(self.trial(0), raw_text="", decision=Decision.invalid("gateway error"), error="timeout")
        TrialArchive(self.path).append(failed)

        reopened = TrialArchive(self.path)
        self.assertFalse(reopened.has_trial(failed.key))
        reopened.append(self.trial(0))
        self.assertTrue(reopened.has_trial(failed.key))
        with self.assertRaises(DuplicateTrialError):
            reopened.append(self.trial(0))

        self.assertEqual(read_archive(self.path), [self.trial(0)])
        self.assertEqual(len(self.path.read_text(encoding="utf-8").splitlines()), 2)

    def test_unparseable_elicitation_is_final(self):
        elicitation = ElicitationRecord("m", "2sAX", "p1", 0, Condition.BIASED, "be careful", error="no marker")
        self.assertFalse(elicitation.retryable)
        self.assertTrue(replace(elicitation, raw_text="").retryable)

    def test_duplicate_line_after_settled_record(self):
        line = encode_record(self.trial(0)) + "\n"
        self.path.write_text(line + line, encoding="utf-8")
        with self.assertRaises(DuplicateTrialError):
            read_archive(self.path)

    def test_negative_run_index(self):
        with self.assertRaises(ContractError):
            self.trial(-1)
