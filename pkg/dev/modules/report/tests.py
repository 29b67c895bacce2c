import csv
import json
import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from core.errors import RenderingError
from modules.dilemmas.domain import BiasType, Condition, Decision
from modules.dilemmas.trials import TrialRecord
from modules.lexicon.analysis import LexiconAnalysis
from modules.miner.prevalence import prevalence
from modules.miner.review import CueRecord, ReviewStatus
from modules.runner.sensitivity import GroupSummary, Grouping
from modules.stats.comparisons import StatResult
from modules.stats.rates import EffectMethod, FeatureEffect
from modules.strategies.specs import BASELINE_ID

from .artifacts import write_sensitivity_report
from .builders import render_lexicon_table, render_prevalence_table, render_sensitivity_table
from .export import ExportFormat, export_table, load_table
from .tables import Cell, HeatmapTable, RecordTable, normalize_rows, row_z_scores


def _summary(group, strategy, rates, grouping="bias"):
    return GroupSummary(grouping, group, strategy, tuple(rates), 0, 0)


def _stat(group, strategy, r_rb=0.21, stars="*", grouping="bias"):
    comparison = f"{grouping}:{group}:{strategy}"
    return StatResult(comparison, grouping, group, strategy, 10.0, r_rb, 0.01, "asymptotic", 0.03, stars)


class RowZScoreTest(SimpleTestCase):
    def test_population_standard_deviation(self):
        """Test z-scores divide by the population standard deviation"""
        scores = row_z_scores([10, 20, 30])
        self.assertAlmostEqual(scores[0], -math.sqrt(1.5))
        self.assertAlmostEqual(scores[1], 0.0)
        self.assertAlmostEqual(scores[2], math.sqrt(1.5))

    def test_all_equal_row(self):
        self.assertEqual(row_z_scores([5.0, 5.0, 5.0]), [0.0, 0.0, 0.0])

    def test_shift_invariance(self):
        values = [3.0, 7.5, 1.25, 9.0]
        shifted = row_z_scores([v + 40 for v in values])
        for a, b in zip(row_z_scores(values), shifted, strict=True):
            self.assertAlmostEqual(a, b)

    def test_missing_values_score_zero(self):
        self.assertEqual(row_z_scores([None, 4.0, 4.0])[0], 0.0)


class SensitivityTableTest(SimpleTestCase):
    def test_best_non_baseline_value(self):
        """Test the lowest non-baseline cell of a row is marked best"""
        summaries = [
            _summary("anchoring", BASELINE_ID, [0.129]),
            _summary("anchoring", "BW+IsD", [0.083]),
            _summary("anchoring", "CoT", [0.101]),
        ]
        stats = [_stat("anchoring", "BW+IsD"), _stat("anchoring", "CoT", r_rb=0.05, stars="")]
        table = render_sensitivity_table(summaries, stats)
        self.assertEqual(table.column_labels[0], BASELINE_ID)
        best = table.cell("anchoring", "BW+IsD")
        self.assertTrue(best.best_in_row)
        self.assertFalse(table.cell("anchoring", "CoT").best_in_row)
        self.assertEqual(best.text(), "8.3% (r=0.21)*")
        baseline = table.cell("anchoring", BASELINE_ID)
        self.assertEqual((baseline.r_rb, baseline.stars, baseline.best_in_row), (None, "", False))

    def test_ties_are_all_marked(self):
        cells = {"row": {BASELINE_ID: Cell(0.1), "a": Cell(5.0), "b": Cell(5.0), "c": Cell(7.0)}}
        marked = [col for col, cell in normalize_rows(cells, baseline=BASELINE_ID)["row"].items() if cell.best_in_row]
        self.assertEqual(marked, ["a", "b"])

    def test_missing_test_result(self):
        summaries = [_summary("framing", BASELINE_ID, [0.2]), _summary("framing", "sAX", [0.1])]
        with self.assertRaises(RenderingError) as ctx:
            render_sensitivity_table(summaries, [])
        self.assertEqual(ctx.exception.details, {"row": "framing", "column": "sAX"})

    def test_empty_group_needs_no_test(self):
        summaries = [_summary("framing", BASELINE_ID, [0.2]), _summary("framing", "sAX", [])]
        table = render_sensitivity_table(summaries, [])
        self.assertIsNone(table.cell("framing", "sAX").value)
        self.assertEqual(table.cell("framing", "sAX").text(), "n/a")

    def test_rows_follow_bias_vocabulary(self):
        summaries = [_summary(bias, BASELINE_ID, [0.1]) for bias in ("hindsight", "anchoring", "framing")]
        self.assertEqual(render_sensitivity_table(summaries, []).row_labels, ("anchoring", "framing", "hindsight"))


class ExportTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        summaries = [_summary("anchoring", BASELINE_ID, [0.129]), _summary("anchoring", "BW+IsD", [0.083])]
        self.table = render_sensitivity_table(summaries, [_stat("anchoring", "BW+IsD")])

    def test_json_round_trip(self):
        path = export_table(self.table, Path(self.tmp.name) / "table.json", ExportFormat.JSON)
        self.assertEqual(load_table(path), self.table)

    def test_record_table_round_trip(self):
        table = RecordTable("t", ("a", "b"), ({"a": 1, "b": None},), {"note": "x"})
        path = export_table(table, Path(self.tmp.name) / "records.json")
        self.assertEqual(load_table(path), table)

    def test_csv_cells(self):
        path = export_table(self.table, Path(self.tmp.name) / "table.csv", ExportFormat.CSV)
        with path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["", BASELINE_ID, "BW+IsD"])
        self.assertEqual(rows[1], ["anchoring", "12.9%", "8.3% (r=0.21)*"])

    def test_empty_table(self):
        empty = HeatmapTable("empty", (), (), {})
        with self.assertRaises(RenderingError):
            export_table(empty, Path(self.tmp.name) / "empty.json")


class LexiconTableTest(SimpleTestCase):
    def test_top_three_markers(self):
        effects = [
            FeatureEffect("anchoring", f"f{i}", EffectMethod.GLM_HC, 5, 100, 5, 100, lrr, 0.1, 1.0, 0.2, 0.3)
            for i, lrr in enumerate([0.5, -1.5, 0.1, 1.0, -0.2])
        ]
        effects.append(FeatureEffect("anchoring", "f5", EffectMethod.DEGENERATE, 0, 100, 0, 100))
        table = render_lexicon_table(LexiconAnalysis(effects, {}))
        marked = [col for col in table.column_labels if table.cell("anchoring", col).marked]
        self.assertEqual(marked, ["f0", "f1", "f3"])
        self.assertIsNone(table.cell("anchoring", "f5").value)
        self.assertEqual(table.cell("anchoring", "f1").text(table.unit), "-1.50")


class PrevalenceTableTest(SimpleTestCase):
    def test_rows(self):
        records = [CueRecord("a", "Am I right", BiasType.CONFIRMATION, ReviewStatus.CONFIRMED, BiasType.CONFIRMATION)]
        table = render_prevalence_table(prevalence(records, 100, 50))
        self.assertEqual(table.rows[0]["bias_type"], "confirmation")
        self.assertEqual(table.rows[0]["percent"], 2.0)
        self.assertEqual(table.metadata["positives"], 1)


class SensitivityReportTest(SimpleTestCase):
    def _records(self):
        flips = {BASELINE_ID: {"p1": 2, "p2": 1, "p3": 2}, "sAX": {"p1": 0, "p2": 0, "p3": 1}}
        records = []
        for strategy, by_pair in flips.items():
            for pair_id, flipped in by_pair.items():
                for run_index in range(2):
                    records.append(
                        TrialRecord("m1", strategy, pair_id, Condition.UNBIASED, run_index, "", Decision.option_a())
                    )
                    biased = Decision.option_b() if run_index < flipped else Decision.option_a()
                    records.append(TrialRecord("m1", strategy, pair_id, Condition.BIASED, run_index, "", biased))
        return records

    def test_model_grouping_artifacts(self):
        with tempfile.TemporaryDirectory() as tmp:
            written = write_sensitivity_report(self._records(), tmp, groupings=(Grouping.MODEL,))
            names = [path.name for path in written]
            self.assertEqual(
                names,
                [
                    "sensitivity_model.csv",
                    "sensitivity_model.json",
                    "statistics_model.json",
                    "validity_model.csv",
                    "validity_model.json",
                ],
            )
            table = load_table(Path(tmp) / "sensitivity_model.json")
            stats = json.loads((Path(tmp) / "statistics_model.json").read_text(encoding="utf-8"))
        self.assertAlmostEqual(table.cell("m1", BASELINE_ID).value, 100 * (1.0 + 0.5 + 1.0) / 3)
        self.assertAlmostEqual(table.cell("m1", "sAX").value, 100 * 0.5 / 3)
        self.assertEqual(stats["results"][0]["comparison_id"], "model:m1:sAX")

    def test_idempotent(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            write_sensitivity_report(self._records(), first, groupings=(Grouping.MODEL,))
            write_sensitivity_report(self._records(), second, groupings=(Grouping.MODEL,))
            for name in ("sensitivity_model.csv", "statistics_model.json"):
                self.assertEqual((Path(first) / name).read_bytes(), (Path(second) / name).read_bytes())
