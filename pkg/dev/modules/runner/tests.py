import json
import random
import tempfile
import threading
from dataclasses import replace
from pathlib import Path

from django.test import SimpleTestCase

from core.errors import ContractError, CoverageError, DataError
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.domain import ComplexityTier, Condition, Decision
from modules.dilemmas.trials import TrialArchive, TrialRecord, encode_record, split_records
from modules.gateway.client import Gateway
from modules.gateway.endpoints import BackendKind, ModelEndpoint
from modules.strategies.cues import axiom_cues
from modules.strategies.specs import BASELINE_ID, get_strategy, preset_registry

from .decisions import parse_decision
from .experiment import (
    OPEN_ENDED_REASON,
    WINDOW_PER_WORKER,
    ElicitationSource,
    ExperimentMode,
    ExperimentRunner,
    run_experiment,
)
from .openended import parse_labels, select_open_ended_pairs, summarize_open_ended
from .sensitivity import (
    Grouping,
    PairSensitivity,
    Pairing,
    aggregate_sensitivity,
    compute_sensitivity,
    validity_rates,
)
from .workload import call_counts, plan_workload, shared_elicitation_count

FIXTURES = Path(__file__).resolve().parent / "fixtures"
GOLDEN_DATASET = FIXTURES / "golden.json"
GOLDEN_STUB = FIXTURES / "golden_stub.json"

A, B, X = Decision.option_a(), Decision.option_b(), Decision.invalid("no decision marker")


def _trials(unbiased, biased, pair_id="p1", strategy_id=BASELINE_ID, model_id="m1"):
    records = []
    for condition, decisions in ((Condition.UNBIASED, unbiased), (Condition.BIASED, biased)):
        for run_index, decision in enumerate(decisions):
            records.append(TrialRecord(model_id, strategy_id, pair_id, condition, run_index, "", decision))
    return records


class ParseDecisionTest(SimpleTestCase):
    def test_explanation_then_decision(self):
        self.assertEqual(parse_decision("Explanation: X\nDecision: Option B"), B)

    def test_case_insensitive(self):
        self.assertEqual(parse_decision("Decision: option a"), A)

    def test_no_marker(self):
        self.assertEqual(parse_decision("I would choose both options"), Decision.invalid("no decision marker"))

    def test_last_marker_wins(self):
        raw = "Decision: Option A was tempting.\nExplanation: on reflection...\nDecision: **Option B**"
        self.assertEqual(parse_decision(raw), B)

    def test_option_on_following_line(self):
        self.assertEqual(parse_decision("Decision:\n\n  Option A\n"), A)

    def test_echoed_template_is_ambiguous(self):
        raw = "Decision: <your decision here: either Option A or Option B>"
        self.assertEqual(parse_decision(raw), Decision.invalid("ambiguous decision"))

    def test_marker_without_option(self):
        self.assertEqual(parse_decision("Decision: neither"), Decision.invalid("no option after decision marker"))

    def test_option_after_preamble_line(self):
        """Test lines without an option are skipped until one names an option"""
        raw = "Decision:\nAfter weighing both plans, I recommend\n**Option B**, then Option A later."
        self.assertEqual(parse_decision(raw), Decision.invalid("ambiguous decision"))
        self.assertEqual(parse_decision("Decision:\nAfter weighing both plans, I recommend\n**Option B**."), B)
        self.assertEqual(parse_decision("Decision: my pick\n- keeps the API stable\n- Option A"), A)


class ComputeSensitivityTest(SimpleTestCase):
    def test_identical_decisions(self):
        (result,) = compute_sensitivity(_trials([A] * 5, [A] * 5))
        self.assertEqual((result.flips, result.valid_paired_runs, result.rate), (0, 5, 0.0))

    def test_flips_paired_by_run_index(self):
        (result,) = compute_sensitivity(_trials([A] * 5, [B, B, A, A, A]))
        self.assertEqual(result.flips, 2)
        self.assertEqual(result.rate, 0.4)

    def test_invalid_response_voids_the_paired_run(self):
        (result,) = compute_sensitivity(_trials([A] * 5, [X, B, A, A, A]))
        self.assertEqual((result.paired_runs, result.valid_paired_runs, result.flips), (5, 4, 1))
        self.assertEqual(result.rate, 0.25)

    def test_all_invalid_leaves_rate_undefined(self):
        (result,) = compute_sensitivity(_trials([X] * 3, [A] * 3))
        self.assertIsNone(result.rate)

    def test_missing_condition(self):
        records = [r for r in _trials([A] * 2, [A] * 2) if r.condition == Condition.UNBIASED]
        with self.assertRaises(CoverageError) as ctx:
            compute_sensitivity(records)
        expected = [["m1", BASELINE_ID, "p1", "biased", 0], ["m1", BASELINE_ID, "p1", "biased", 1]]
        self.assertEqual(ctx.exception.details["missing"], expected)

    def test_line_order_does_not_matter(self):
        records = _trials([A, B, A], [B, B, A]) + _trials([A] * 3, [A] * 3, pair_id="p2")
        shuffled = list(records)
        random.Random(5).shuffle(shuffled)
        self.assertEqual(compute_sensitivity(records), compute_sensitivity(shuffled))

    def test_elicitation_records_are_ignored(self):
        archive_records = _trials([A], [B])
        self.assertEqual(len(compute_sensitivity(archive_records + [object()])), 1)

    def test_majority_pairing(self):
        (result,) = compute_sensitivity(_trials([A] * 5, [B, B, B, A, A]), pairing=Pairing.MAJORITY)
        self.assertEqual((result.paired_runs, result.valid_paired_runs, result.flips), (1, 1, 1))

    def test_majority_tie_is_invalid(self):
        (result,) = compute_sensitivity(_trials([A] * 4, [B, B, A, A]), pairing=Pairing.MAJORITY)
        self.assertEqual(result.valid_paired_runs, 0)

    def test_counts_are_consistent(self):
        with self.assertRaises(ContractError):
            PairSensitivity("m", "s", "p", paired_runs=3, flips=2, valid_paired_runs=1)


class AggregateSensitivityTest(SimpleTestCase):
    def setUp(self):
        self.pairs = {pair.pair_id: pair for pair in load_dataset(GOLDEN_DATASET)}
        self.sensitivities = [
            PairSensitivity("m1", BASELINE_ID, "hindsight-001", 5, 0, 5),
            PairSensitivity("m1", BASELINE_ID, "hindsight-002", 5, 2, 5),
            PairSensitivity("m2", BASELINE_ID, "hindsight-001", 5, 0, 0),
        ]

    def test_mean_of_pair_rates(self):
        (summary,) = aggregate_sensitivity(self.sensitivities, Grouping.ALL)
        self.assertEqual(summary.rates, (0.0, 0.4))
        self.assertAlmostEqual(summary.mean, 0.2)
        self.assertEqual(summary.undefined_pairs, 1)
        self.assertEqual((summary.pooled_flips, summary.pooled_valid), (2, 10))

    def test_all_zero(self):
        zero = [replace(s, flips=0) for s in self.sensitivities[:2]]
        (summary,) = aggregate_sensitivity(zero, Grouping.ALL)
        self.assertEqual(summary.mean, 0.0)

    def test_model_grouping_flags_empty_group(self):
        summaries = {s.group: s for s in aggregate_sensitivity(self.sensitivities, Grouping.MODEL)}
        self.assertFalse(summaries["m1"].empty)
        self.assertTrue(summaries["m2"].empty)
        self.assertIsNone(summaries["m2"].mean)

    def test_bias_grouping(self):
        (summary,) = aggregate_sensitivity(self.sensitivities, Grouping.BIAS, self.pairs)
        self.assertEqual(summary.group, "hindsight")

    def test_tier_grouping_needs_tiers(self):
        with self.assertRaises(ContractError):
            aggregate_sensitivity(self.sensitivities, Grouping.TIER, self.pairs)
        tiered = {pid: replace(pair, tier=ComplexityTier.LOW) for pid, pair in self.pairs.items()}
        (summary,) = aggregate_sensitivity(self.sensitivities, Grouping.TIER, tiered)
        self.assertEqual(summary.group, "low")

    def test_validity_rates(self):
        rates = {(v.model_id, v.strategy_id): v.rate for v in validity_rates(self.sensitivities)}
        self.assertEqual(rates, {("m1", BASELINE_ID): 1.0, ("m2", BASELINE_ID): 0.0})


class _WindowRunner(ExperimentRunner):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.lock = threading.Lock()
        self.started = self.archived_units = self.max_ahead = 0

    def execute(self, unit):
        with self.lock:
            self.started += 1
            self.max_ahead = max(self.max_ahead, self.started - self.archived_units)
        return super().execute(unit)

    def _archive(self, records):
        super()._archive(records)
        with self.lock:
            self.archived_units += 1


class ExperimentRunnerTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.pairs = load_dataset(GOLDEN_DATASET)
        self.endpoint = ModelEndpoint("stub-model", backend=BackendKind.STUB, stub_script=str(GOLDEN_STUB))

    def gateway(self, **options):
        return Gateway(cache_dir=self.root / "cache", now=lambda: "2024-05-01T12:00:00+00:00", **options)

    def archive(self, name="trials.ndjson"):
        return TrialArchive(self.root / name)

    def script(self, payload):
        path = self.root / "script.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return ModelEndpoint("stub-model", backend=BackendKind.STUB, stub_script=str(path))

    def test_factorial_trial_count(self):
        """Test 1 model x 1 strategy x 2 pairs x 2 conditions x 5 runs gives 20 trials"""
        archive = self.archive()
        report = run_experiment(self.gateway(), archive, self.pairs[:2], [get_strategy(BASELINE_ID)], [self.endpoint])
        trials, elicitations = split_records(archive.read())
        self.assertEqual((len(trials), len(elicitations)), (20, 0))
        self.assertTrue(report.complete)
        self.assertEqual(report.expected_trials, 20)

    def test_two_step_adds_one_elicitation_per_pair_and_run(self):
        archive = self.archive()
        report = run_experiment(self.gateway(), archive, self.pairs[:2], [get_strategy("2sAX")], [self.endpoint])
        trials, elicitations = split_records(archive.read())
        self.assertEqual((len(trials), len(elicitations)), (20, 10))
        self.assertEqual(report.expected_elicitations, 10)
        self.assertTrue(all(e.source_condition == Condition.BIASED for e in elicitations))
        self.assertEqual({t.elicited_cues for t in trials}, {"follow the release checklist and review risky changes"})

    def test_per_condition_elicitation(self):
        archive = self.archive()
        run_experiment(
            self.gateway(),
            archive,
            self.pairs[:1],
            [get_strategy("2sAX")],
            [self.endpoint],
            runs_per_condition=2,
            elicitation_source=ElicitationSource.PER_CONDITION,
        )
        _, elicitations = split_records(archive.read())
        self.assertEqual(len(elicitations), 4)

    def test_probeax_cues_come_from_axioms(self):
        archive = self.archive()
        run_experiment(
            self.gateway(), archive, self.pairs[:1], [get_strategy("ProbeAX")], [self.endpoint], runs_per_condition=1
        )
        trials, elicitations = split_records(archive.read())
        self.assertEqual(elicitations, [])
        self.assertEqual({t.elicited_cues for t in trials}, {axiom_cues(self.pairs[0])})

    def test_golden_scenario_flips_one_hindsight_pair(self):
        """Test the scripted stub flips exactly one of eight hindsight pairs"""
        archive = self.archive()
        run_experiment(self.gateway(), archive, self.pairs, [get_strategy(BASELINE_ID)], [self.endpoint])
        sensitivities = compute_sensitivity(archive.read())
        flipped = [s.pair_id for s in sensitivities if s.flips]
        self.assertEqual(flipped, ["hindsight-001"])

        pairs_by_id = {pair.pair_id: pair for pair in self.pairs}
        (summary,) = aggregate_sensitivity(sensitivities, Grouping.BIAS, pairs_by_id)
        self.assertEqual(summary.group, "hindsight")
        self.assertAlmostEqual(summary.mean, 0.125)

    def test_resumed_run_matches_uninterrupted_run(self):
        strategies = [get_strategy(BASELINE_ID), get_strategy("2sAX+BW")]
        full = self.archive("full.ndjson")
        run_experiment(self.gateway(), full, self.pairs[:3], strategies, [self.endpoint], runs_per_condition=2)
        lines = full.path.read_text(encoding="utf-8").splitlines(keepends=True)

        partial_path = self.root / "partial.ndjson"
        partial_path.write_text("".join(lines[: len(lines) // 2]), encoding="utf-8")
        report = run_experiment(
            self.gateway(replay_only=True),
            TrialArchive(partial_path),
            self.pairs[:3],
            strategies,
            [self.endpoint],
            runs_per_condition=2,
        )
        resumed = sorted(encode_record(r) for r in TrialArchive(partial_path).read())
        self.assertEqual(resumed, sorted(encode_record(r) for r in full.read()))
        self.assertTrue(report.complete)
        self.assertGreater(report.resumed_trials, 0)

    def test_replay_miss_is_recorded_per_trial(self):
        """Test a replay-only miss fails the trial and a later live run fills it in"""
        archive = self.archive()
        strategies, options = [get_strategy("2sAX")], {"runs_per_condition": 1}
        report = run_experiment(
            self.gateway(replay_only=True), archive, self.pairs[1:2], strategies, [self.endpoint], **options
        )
        self.assertEqual((report.replay_misses, report.failed_trials, report.failed_elicitations), (1, 2, 1))
        trials, elicitations = split_records(archive.read())
        self.assertTrue(all(record.retryable for record in trials + elicitations))

        report = run_experiment(self.gateway(), archive, self.pairs[1:2], strategies, [self.endpoint], **options)
        self.assertEqual((report.replay_misses, report.failed_trials, report.failed_elicitations), (0, 0, 0))
        trials, elicitations = split_records(archive.read())
        self.assertEqual({t.decision for t in trials}, {Decision.option_a()})
        self.assertTrue(elicitations[0].succeeded)

    def test_resume_retries_archived_gateway_error(self):
        archive = self.archive()
        failed = TrialRecord(
            "stub-model",
            BASELINE_ID,
            self.pairs[1].pair_id,
            Condition.BIASED,
            0,
            "",
            Decision.invalid("gateway error"),
            error="stub-model unreachable after 5 attempts",
        )
        archive.append(failed)

        report = run_experiment(
            self.gateway(),
            TrialArchive(archive.path),
            self.pairs[:2],
            [get_strategy(BASELINE_ID)],
            [self.endpoint],
            runs_per_condition=1,
        )
        self.assertTrue(report.complete)
        self.assertEqual((report.archived_trials, report.failed_trials, report.resumed_trials), (4, 0, 1))
        (retried,) = [t for t in archive.read() if t.key == failed.key]
        self.assertEqual(retried.decision, Decision.option_a())
        self.assertEqual(len(archive.path.read_text(encoding="utf-8").splitlines()), 5)

    def test_unparseable_elicitation_is_not_retried(self):
        endpoint = self.script(
            {"rules": [{"phase": "elicitation", "response": "Just be careful."}], "default": "Decision: Option A"}
        )
        archive = self.archive()
        options = {"runs_per_condition": 1}
        run_experiment(self.gateway(), archive, self.pairs[:1], [get_strategy("2sAX")], [endpoint], **options)
        lines = archive.path.read_text(encoding="utf-8")
        report = run_experiment(
            self.gateway(), TrialArchive(archive.path), self.pairs[:1], [get_strategy("2sAX")], [endpoint], **options
        )
        self.assertEqual(archive.path.read_text(encoding="utf-8"), lines)
        self.assertEqual(report.failed_trials, 0)
        self.assertEqual(report.invalid_reasons, {"elicitation failed": 2})

    def test_submission_window_is_bounded(self):
        """Test units are submitted at most a fixed window ahead of the archive, in unit order"""
        runner = _WindowRunner(self.gateway(), self.archive(), runs_per_condition=5, workers=2)
        runner.run(self.pairs, [get_strategy(BASELINE_ID)], [self.endpoint])
        self.assertLessEqual(runner.max_ahead, 2 * WINDOW_PER_WORKER)
        trials, _ = split_records(runner.archive.read())
        self.assertEqual(len(trials), 80)
        order = [(t.pair_id, t.run_index) for t in trials[::2]]
        self.assertEqual(order, [(pair.pair_id, run) for pair in self.pairs for run in range(5)])

    def test_gateway_errors_are_recorded(self):
        endpoint = self.script({"rules": []})
        report = run_experiment(
            self.gateway(),
            self.archive(),
            self.pairs[:1],
            [get_strategy(BASELINE_ID)],
            [endpoint],
            runs_per_condition=1,
        )
        self.assertTrue(report.complete)
        self.assertEqual((report.failed_trials, report.invalid_trials), (2, 2))

    def test_failed_elicitation_voids_decisions(self):
        endpoint = self.script(
            {"rules": [{"phase": "elicitation", "response": "Just be careful."}], "default": "Decision: Option A"}
        )
        archive = self.archive()
        report = run_experiment(
            self.gateway(), archive, self.pairs[:1], [get_strategy("2sAX")], [endpoint], runs_per_condition=1
        )
        trials, elicitations = split_records(archive.read())
        self.assertFalse(elicitations[0].succeeded)
        self.assertEqual({t.decision.reason for t in trials}, {"elicitation failed"})
        self.assertEqual(report.failed_elicitations, 1)

    def test_open_ended_mode_defers_decisions(self):
        archive = self.archive()
        runner = ExperimentRunner(self.gateway(), archive, runs_per_condition=1, mode=ExperimentMode.OPEN_ENDED)
        runner.run(self.pairs[:1], [get_strategy("sAX+BW")], [self.endpoint])
        trials, _ = split_records(archive.read())
        self.assertEqual({t.decision.reason for t in trials}, {OPEN_ENDED_REASON})


class WorkloadTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.pairs = load_dataset(GOLDEN_DATASET)
        self.endpoint = ModelEndpoint("stub-model", backend=BackendKind.STUB, stub_script=str(GOLDEN_STUB))

    def test_full_design_arithmetic(self):
        """Test the call counts for six models over every preset on 2,368 pairs"""
        registry = preset_registry()
        n_two_step = sum(strategy.is_two_step for strategy in registry)
        self.assertEqual((len(registry), n_two_step), (14, 3))

        decisions, elicitations = call_counts(6, len(registry), n_two_step, 2368, 5)
        self.assertEqual(decisions, 1_989_120)
        self.assertEqual(elicitations, 213_120)
        self.assertEqual(shared_elicitation_count(6, n_two_step, 2368, 5), 71_040)
        self.assertEqual(shared_elicitation_count(6, n_two_step, 2368, 5, elicitations_per_run=2), 142_080)
        self.assertEqual(decisions + shared_elicitation_count(6, n_two_step, 2368, 5, 2), 2_131_200)

    def test_plan_for_golden_dataset(self):
        workload = plan_workload(2, [get_strategy(BASELINE_ID), get_strategy("2sAX")], self.pairs, 5)
        self.assertEqual(workload.decision_calls, 2 * 2 * 8 * 2 * 5)
        self.assertEqual(workload.elicitation_calls, 2 * 8 * 5)
        self.assertEqual(workload.shared_elicitation_calls, 2 * 8 * 5)
        self.assertGreater(workload.estimated_prompt_tokens, 0)

    def _run_against_plan(self, source, per_run):
        strategies = [get_strategy(BASELINE_ID), get_strategy("2sAX"), get_strategy("2sAX+BW")]
        gateway = Gateway(cache_dir=self.root / str(source), now=lambda: "2024-05-01T12:00:00+00:00")
        archive = TrialArchive(self.root / f"{source}.ndjson")
        run_experiment(
            gateway,
            archive,
            self.pairs[:3],
            strategies,
            [self.endpoint],
            runs_per_condition=2,
            elicitation_source=source,
        )
        trials, elicitations = split_records(archive.read())
        workload = plan_workload(1, strategies, self.pairs[:3], 2, elicitations_per_run=per_run)
        self.assertEqual(len(trials), workload.decision_calls)
        self.assertEqual(len(elicitations), workload.elicitation_calls)
        self.assertEqual(gateway.backend_calls, workload.backend_calls)
        return workload

    def test_plan_matches_executed_run(self):
        """Test planned counts equal the records archived and the calls the backend received"""
        workload = self._run_against_plan(ElicitationSource.BIASED, 1)
        self.assertEqual((workload.elicitation_calls, workload.shared_elicitation_calls), (12, 6))

    def test_plan_matches_per_condition_run(self):
        workload = self._run_against_plan(ElicitationSource.PER_CONDITION, 2)
        self.assertEqual((workload.elicitation_calls, workload.shared_elicitation_calls), (24, 12))

    def test_more_two_step_than_strategies(self):
        with self.assertRaises(ContractError):
            call_counts(1, 1, 2, 1, 1)


def _label(pair_id, strategy_id, coder_1, coder_2, adjudicator=None, model_id="m1"):
    record = {
        "model_id": model_id,
        "strategy_id": strategy_id,
        "pair_id": pair_id,
        "coder_1": dict(zip(("biased", "unbiased"), coder_1, strict=True)),
        "coder_2": dict(zip(("biased", "unbiased"), coder_2, strict=True)),
    }
    if adjudicator:
        record["adjudicator"] = dict(zip(("biased", "unbiased"), adjudicator, strict=True))
    return record


SWITCH = ("option_b", "option_a")
STAY = ("option_a", "option_a")
UNSURE = ("undetermined", "option_a")


class OpenEndedTest(SimpleTestCase):
    def test_select_pairs_the_treatment_fixed(self):
        pairs = {pair.pair_id: pair for pair in load_dataset(GOLDEN_DATASET)}
        sensitivities = []
        for index, pair_id in enumerate(sorted(pairs)):
            sensitivities.append(PairSensitivity("m1", BASELINE_ID, pair_id, 5, 1 + index % 2, 5))
            sensitivities.append(PairSensitivity("m1", "sAX+BW", pair_id, 5, 1 if index == 0 else 0, 5))
        selected = select_open_ended_pairs(sensitivities, pairs, seed=1, per_bias=3)
        self.assertEqual(len(selected), 3)
        self.assertNotIn("hindsight-001", selected)
        self.assertEqual(selected, select_open_ended_pairs(sensitivities, pairs, seed=1, per_bias=3))

    def test_adjudication_rules(self):
        labels = {
            label.pair_id: label
            for label in parse_labels(
                [
                    _label("p1", BASELINE_ID, SWITCH, SWITCH),
                    _label("p2", BASELINE_ID, SWITCH, STAY, adjudicator=SWITCH),
                    _label("p3", BASELINE_ID, SWITCH, STAY, adjudicator=UNSURE),
                    _label("p4", BASELINE_ID, UNSURE, UNSURE),
                ]
            )
        }
        self.assertTrue(labels["p1"].sensitive)
        self.assertEqual(labels["p2"].sided_with, "coder_1")
        self.assertTrue(labels["p2"].sensitive)
        self.assertFalse(labels["p3"].sensitive)
        self.assertFalse(labels["p4"].sensitive)

    def test_disagreement_requires_adjudicator(self):
        with self.assertRaises(DataError):
            parse_labels([_label("p1", BASELINE_ID, SWITCH, STAY)])

    def test_summary_and_reduction(self):
        records = []
        for index in range(10):
            side = SWITCH if index < 6 else STAY
            records.append(_label(f"p{index}", BASELINE_ID, side, side))
            records.append(_label(f"p{index}", "sAX+BW", SWITCH if index < 2 else STAY, SWITCH if index < 2 else STAY))
        records[0]["coder_2"] = dict(zip(("biased", "unbiased"), STAY, strict=True))
        records[0]["adjudicator"] = dict(zip(("biased", "unbiased"), STAY, strict=True))

        summaries, reductions = summarize_open_ended(parse_labels(records), seed=3, resamples=500)
        baseline = next(s for s in summaries if s.strategy_id == BASELINE_ID)
        self.assertEqual(baseline.n, 10)
        self.assertEqual(baseline.disagreements, 1)
        self.assertEqual(baseline.sides["coder_2"], 1)
        self.assertAlmostEqual(baseline.agreement.percent_agreement, 0.9)
        self.assertAlmostEqual(baseline.sensitivity.point, 0.5)

        (reduction,) = reductions
        self.assertEqual(reduction.n_pairs, 10)
        self.assertAlmostEqual(reduction.difference.point, 0.3)
