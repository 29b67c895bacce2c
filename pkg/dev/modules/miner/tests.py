import json
import tempfile
from pathlib import Path
from types import SimpleNamespace
from unittest import mock

from django.test import SimpleTestCase

from core.errors import ContractError, DataError, DomainError, SchemaError, TransportError
from modules.dilemmas.domain import BiasType
from modules.gateway.client import Gateway
from modules.gateway.endpoints import BackendKind, ModelEndpoint

from .alignment import (
    AlignmentResult,
    ReferenceCue,
    align_cues,
    apply_validation,
    load_references,
    rank_candidates,
    summarize_alignment,
)
from .corpus import CorpusPrompt, FileScoreSource, HttpScoreSource, attach_scores, load_corpus, triage
from .extraction import filter_and_extract, parse_judge_json
from .judge_prompts import DEFAULTS, load_judge_prompts
from .pipeline import check_stages, mine
from .prevalence import prevalence
from .review import CueRecord, ReviewStatus, apply_review, load_review, parse_review

FIXTURES = Path(__file__).resolve().parent / "fixtures"
FIXED_TIME = "2024-05-01T12:00:00+00:00"


def _confirmed(prompt_id, bias, span="cue"):
    return CueRecord(prompt_id, span, bias, ReviewStatus.CONFIRMED, bias)


class FakeJudge:
    """Answers judge calls from the instruction and prompt text."""

    def __init__(self, answers):
        self.answers = answers
        self.calls = []

    def complete(self, endpoint, bundle, run_index):
        self.calls.append(bundle)
        for (marker, needle), text in self.answers.items():
            if marker in bundle.system_instruction and needle in bundle.user_message:
                return SimpleNamespace(text=text)
        raise AssertionError(f"unexpected judge call: {bundle.user_message}")


class TriageTest(SimpleTestCase):
    def test_published_corpus_counts(self):
        """Test 35,784 prompts with 9,620 above the gate"""
        prompts = [CorpusPrompt(f"p{i}", "text", 0.9) for i in range(9_620)]
        prompts += [CorpusPrompt(f"q{i}", "text", 0.6) for i in range(40)]
        prompts += [CorpusPrompt(f"r{i}", "text", 0.3) for i in range(35_784 - 9_660)]
        self.assertEqual(len(prompts), 35_784)
        self.assertEqual(len(triage(prompts, 0.6)), 9_620)

    def test_threshold_is_strict(self):
        self.assertEqual(triage([CorpusPrompt("a", "t", 0.6)], 0.6), [])

    def test_all_zero(self):
        self.assertEqual(triage([CorpusPrompt("a", "t", 0.0), CorpusPrompt("b", "t", 0.0)]), [])

    def test_missing_score(self):
        with self.assertRaises(DataError) as ctx:
            triage([CorpusPrompt("lonely", "t")])
        self.assertEqual(ctx.exception.details["prompt_id"], "lonely")

    def test_score_outside_unit_interval(self):
        with self.assertRaises(DataError):
            CorpusPrompt("a", "t", 1.2)

    def test_fixture_scores_from_csv(self):
        prompts = attach_scores(load_corpus(FIXTURES / "corpus.jsonl"), FileScoreSource(FIXTURES / "scores.csv"))
        retained = [p.prompt_id for p in triage(prompts)]
        self.assertEqual(retained, ["dev-001", "dev-002", "dev-003", "dev-004", "dev-005", "dev-006"])

    def test_scores_from_json_map(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "scores.json"
            path.write_text(json.dumps({"a": 0.7}), encoding="utf-8")
            (prompt,) = attach_scores([CorpusPrompt("a", "t")], FileScoreSource(path))
        self.assertEqual(prompt.classifier_score, 0.7)

    def test_duplicate_corpus_ids(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "corpus.jsonl"
            line = json.dumps({"prompt_id": "a", "text": "t"})
            path.write_text(f"{line}\n{line}\n", encoding="utf-8")
            with self.assertRaises(DataError):
                load_corpus(path)

    @mock.patch("modules.miner.corpus.requests.post")
    def test_http_scores_in_batches(self, post):
        post.side_effect = [
            mock.Mock(**{"json.return_value": {"scores": [0.1, 0.9]}}),
            mock.Mock(**{"json.return_value": {"scores": [0.7]}}),
        ]
        prompts = [CorpusPrompt(p, p) for p in ("a", "b", "c")]
        scores = HttpScoreSource("http://scorer/score", batch_size=2, timeout=5).scores(prompts)
        self.assertEqual(scores, {"a": 0.1, "b": 0.9, "c": 0.7})
        self.assertEqual(post.call_args_list[1].kwargs["json"], {"texts": ["c"]})

    @mock.patch("modules.miner.corpus.requests.post")
    def test_http_score_count_mismatch(self, post):
        post.return_value = mock.Mock(**{"json.return_value": {"scores": []}})
        with self.assertRaises(TransportError):
            HttpScoreSource("http://scorer/score", timeout=5).scores([CorpusPrompt("a", "a")])


class JudgePromptsTest(SimpleTestCase):
    def test_defaults(self):
        self.assertEqual(load_judge_prompts(), DEFAULTS)
        self.assertIn("technical senses never count".lower(), DEFAULTS["cue_extraction"].lower())

    def test_unknown_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "judge.json"
            path.write_text(json.dumps({"summarize": "x"}), encoding="utf-8")
            with self.assertRaises(SchemaError):
                load_judge_prompts(path)


class FilterAndExtractTest(SimpleTestCase):
    PROMPT = CorpusPrompt(
        "dev-1", "We don't need that second if statement, the first branch covers it. Am I right?", 0.9
    )

    def _judge(self, extraction):
        return FakeJudge(
            {
                ("You label developer prompts", ""): '{"coding_related": true}',
                ("cognitive-bias cues", ""): extraction,
            }
        )

    def test_confirmation_cue(self):
        """Test a verbatim span becomes an unreviewed candidate"""
        judge = self._judge('{"cue_span": "Am I right", "bias_type": "confirmation"}')
        outcome = filter_and_extract([self.PROMPT], judge, endpoint=None, workers=1)
        (record,) = outcome.records
        self.assertEqual((record.cue_span, record.proposed_bias), ("Am I right", BiasType.CONFIRMATION))
        self.assertEqual(record.review_status, ReviewStatus.UNREVIEWED)
        self.assertFalse(record.positive)
        self.assertEqual(outcome.coding, ["dev-1"])

    def test_no_cue(self):
        judge = self._judge('{"cue_span": null, "bias_type": null}')
        outcome = filter_and_extract([self.PROMPT], judge, endpoint=None, workers=1)
        self.assertEqual(outcome.records, [])
        self.assertEqual(outcome.failures, [])

    def test_non_verbatim_span_is_discarded(self):
        judge = self._judge('{"cue_span": "Am I correct", "bias_type": "confirmation"}')
        outcome = filter_and_extract([self.PROMPT], judge, endpoint=None, workers=1)
        self.assertEqual(outcome.records, [])
        (failure,) = outcome.failures
        self.assertEqual(failure.stage, "cue_extraction")
        self.assertIn("verbatim", failure.reason)
        self.assertEqual(outcome.coding, ["dev-1"])

    def test_unparseable_extraction_keeps_prompt_as_coding(self):
        outcome = filter_and_extract([self.PROMPT], self._judge("no idea"), endpoint=None, workers=1)
        self.assertEqual(outcome.coding, ["dev-1"])
        self.assertEqual(outcome.records, [])
        self.assertEqual(outcome.failures[0].stage, "cue_extraction")

    def test_unknown_cue_type(self):
        judge = self._judge('{"cue_span": "Am I right", "bias_type": "optimism"}')
        outcome = filter_and_extract([self.PROMPT], judge, endpoint=None, workers=1)
        self.assertEqual(outcome.records, [])
        self.assertEqual(len(outcome.failures), 1)

    def test_not_coding_related(self):
        judge = FakeJudge({("You label developer prompts", ""): '{"coding_related": false}'})
        outcome = filter_and_extract([self.PROMPT], judge, endpoint=None, workers=1)
        self.assertEqual(outcome.coding, [])
        self.assertEqual(len(judge.calls), 1)

    def test_transport_error_is_recorded(self):
        judge = mock.Mock()
        judge.complete.side_effect = TransportError("judge unreachable")
        outcome = filter_and_extract([self.PROMPT], judge, endpoint=None, workers=1)
        self.assertEqual(outcome.coding, [])
        self.assertEqual(outcome.failures[0].stage, "coding_filter")

    def test_json_inside_prose(self):
        self.assertEqual(parse_judge_json('Sure! {"coding_related": true} Done.'), {"coding_related": True})


class ReviewTest(SimpleTestCase):
    def _candidates(self, n=239):
        return [CueRecord(f"c{i:03d}", "cue", BiasType.CONFIRMATION) for i in range(n)]

    def test_published_review_counts(self):
        """Test 239 candidates reduce to 97 positives, 94 type-stable"""
        decisions = {f"c{i:03d}": "confirm" for i in range(94)}
        decisions.update({f"c{i:03d}": "relabel:framing" for i in range(94, 97)})
        decisions.update({f"c{i:03d}": "reject" for i in range(97, 239)})
        records, summary = apply_review(self._candidates(), parse_review(decisions))
        self.assertEqual(summary.positives, 97)
        self.assertEqual(summary.rejected, 142)
        self.assertEqual(summary.relabelled, 3)
        self.assertEqual(summary.type_stable, 94)
        self.assertEqual(records[95].final_bias, BiasType.FRAMING)
        self.assertAlmostEqual(100 * summary.positives / summary.candidates, 40.59, places=2)

    def test_empty_review(self):
        records, summary = apply_review(self._candidates(3), {})
        self.assertTrue(all(r.review_status == ReviewStatus.UNREVIEWED for r in records))
        self.assertEqual(summary.unreviewed, 3)
        self.assertEqual(summary.positives, 0)

    def test_unknown_prompt(self):
        with self.assertRaises(DataError):
            apply_review(self._candidates(1), parse_review({"ghost": "confirm"}))

    def test_relabel_to_same_bias_confirms(self):
        (record,), _ = apply_review(self._candidates(1), parse_review({"c000": "relabel:confirmation"}))
        self.assertEqual(record.review_status, ReviewStatus.CONFIRMED)

    def test_unreadable_verdict(self):
        with self.assertRaises(SchemaError):
            parse_review({"c000": "maybe"})

    def test_relabel_needs_a_new_bias(self):
        with self.assertRaises(ContractError):
            CueRecord("x", "cue", BiasType.FRAMING, ReviewStatus.RELABELLED, BiasType.FRAMING)

    def test_fixture_review_file(self):
        decisions = load_review(FIXTURES / "review.json")
        self.assertEqual(decisions["dev-002"], (ReviewStatus.RELABELLED, BiasType.CONFIRMATION))


class AlignmentTest(SimpleTestCase):
    def setUp(self):
        self.references = load_references(FIXTURES / "references.json")

    def test_identical_span_ranks_first(self):
        pool = [ref for ref in self.references if ref.bias_type == BiasType.BANDWAGON]
        ranked = rank_candidates("everyone on the forum recommends this library", pool, k=25)
        self.assertEqual(ranked[0][0], "bandwagon-002")
        self.assertAlmostEqual(ranked[0][1], 1.0)

    def test_hindsight_cue_has_no_surface_overlap(self):
        pool = [ref for ref in self.references if ref.bias_type == BiasType.HINDSIGHT]
        ranked = rank_candidates("I should have mentioned", pool, k=25)
        self.assertEqual([score for _, score in ranked], [0.0, 0.0])

    def test_ranking_is_deterministic_with_id_ties(self):
        pool = [
            ReferenceCue("b", BiasType.FRAMING, "loss of users"),
            ReferenceCue("a", BiasType.FRAMING, "loss of users"),
            ReferenceCue("c", BiasType.FRAMING, "unrelated words"),
        ]
        first = [ref_id for ref_id, _ in rank_candidates("loss", pool, k=2)]
        self.assertEqual(first, ["a", "b"])
        self.assertEqual(first, [ref_id for ref_id, _ in rank_candidates("loss", list(reversed(pool)), k=2)])

    def test_judge_proposal_and_skipped_bias(self):
        records = [
            _confirmed("p1", BiasType.CONFIRMATION, "Am I right"),
            _confirmed("p2", BiasType.FRAMING, "we will lose users"),
        ]
        judge = FakeJudge(
            {
                ("You compare a cue phrase", "Am I right"): (
                    '{"match": true, "reference_id": "confirmation-001", "matching_substrings": ["Am I right"]}'
                )
            }
        )
        results = align_cues(records, self.references, judge, endpoint=None, k=25)
        self.assertTrue(results[0].proposed_match)
        self.assertEqual(results[0].candidates[0][0], "confirmation-001")
        self.assertEqual(results[1].skipped, "no reference cues of this bias type")
        self.assertEqual(len(judge.calls), 1)

    def test_judge_matching_a_non_candidate(self):
        judge = FakeJudge({("You compare a cue phrase", ""): '{"match": true, "reference_id": "bandwagon-001"}'})
        (result,) = align_cues([_confirmed("p1", BiasType.CONFIRMATION, "Am I right")], self.references, judge, None)
        self.assertFalse(result.proposed_match)
        self.assertIn("not a candidate", result.failure)

    def test_published_alignment_counts(self):
        """Test 38 proposals of 97 reduce to 24 validated"""
        results = [
            AlignmentResult(f"p{i:02d}", BiasType.CONFIRMATION, "cue", proposed_match=i < 38) for i in range(97)
        ]
        validations = {f"p{i:02d}": i < 24 for i in range(38)}
        summary = summarize_alignment(apply_validation(results, validations))
        self.assertEqual((summary.proposed, summary.validated), (38, 24))
        self.assertAlmostEqual(100 * summary.interval.point, 24.74, places=2)
        self.assertAlmostEqual(100 * summary.interval.lower, 17.23, delta=0.01)
        self.assertAlmostEqual(100 * summary.interval.upper, 34.18, delta=0.01)

    def test_validating_an_unproposed_match(self):
        results = [AlignmentResult("p1", BiasType.CONFIRMATION, "cue")]
        with self.assertRaises(DataError):
            apply_validation(results, {"p1": True})


class PrevalenceTest(SimpleTestCase):
    COUNTS = {
        BiasType.CONFIRMATION: 30,
        BiasType.FRAMING: 25,
        BiasType.OVERCONFIDENCE: 12,
        BiasType.HYPERBOLIC_DISCOUNTING: 9,
        BiasType.ANCHORING: 6,
        BiasType.BANDWAGON: 5,
        BiasType.AVAILABILITY: 5,
        BiasType.HINDSIGHT: 5,
    }

    def _records(self):
        return [
            _confirmed(f"{bias}-{i}", bias) for bias, count in self.COUNTS.items() for i in range(count)
        ]

    def test_published_prevalence(self):
        report = prevalence(self._records(), corpus_prompts=35_784, coding_prompts=5_269)
        self.assertEqual(report.positives, 97)
        self.assertEqual(round(report.percent_of_coding, 2), 1.84)
        self.assertEqual(round(report.percent_of_corpus, 2), 0.27)
        self.assertEqual(
            [round(row.percent, 2) for row in report.rows], [0.57, 0.47, 0.23, 0.17, 0.11, 0.09, 0.09, 0.09]
        )
        self.assertEqual(report.rows[0].bias_type, BiasType.CONFIRMATION)

    def test_unreviewed_records_do_not_count(self):
        records = [CueRecord("a", "cue", BiasType.FRAMING)]
        self.assertEqual(prevalence(records, 10, 5).positives, 0)

    def test_zero_denominator(self):
        with self.assertRaises(DomainError):
            prevalence(self._records(), corpus_prompts=35_784, coding_prompts=0)


class PipelineTest(SimpleTestCase):
    def test_stage_monotonicity(self):
        counts = check_stages(
            {"corpus": ["a", "b", "c"], "triaged": ["a", "b"], "coding": ["a"], "candidates": ["a"], "positives": []}
        )
        self.assertEqual((counts.corpus, counts.triaged, counts.coding), (3, 2, 1))
        with self.assertRaises(ContractError):
            check_stages({"corpus": ["a"], "triaged": ["a", "z"]})

    def test_stub_judge_pipeline(self):
        """Test the fixture corpus end to end through a scripted judge"""
        with tempfile.TemporaryDirectory() as tmp:
            judge = ModelEndpoint("judge", backend=BackendKind.STUB, stub_script=str(FIXTURES / "judge_stub.json"))
            outcome = mine(
                load_corpus(FIXTURES / "corpus.jsonl"),
                FileScoreSource(FIXTURES / "scores.csv"),
                Gateway(cache_dir=tmp, now=lambda: FIXED_TIME),
                judge,
                review=load_review(FIXTURES / "review.json"),
                references=load_references(FIXTURES / "references.json"),
            )
        self.assertEqual(
            outcome.stages.to_dict(), {"corpus": 8, "triaged": 6, "coding": 5, "candidates": 3, "positives": 3}
        )
        self.assertEqual([f.prompt_id for f in outcome.failures], ["dev-005"])
        self.assertEqual(outcome.review.relabelled, 1)
        self.assertEqual(outcome.alignment_summary.proposed, 1)
        self.assertEqual(outcome.alignment_summary.validated, 0)
        self.assertEqual(outcome.report.row(BiasType.CONFIRMATION).count, 2)
        self.assertAlmostEqual(outcome.report.percent_of_coding, 60.0)
