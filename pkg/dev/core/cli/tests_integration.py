import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.apps import apps
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from modules.gateway.serializers import ModelEndpointSerializer

BASE_DIR = Path(__file__).resolve().parents[2]
FIXTURES = Path(__file__).resolve().parent / "fixtures"
DEMO_CONFIG = FIXTURES / "demo_run.json"
MINI_DATASET = BASE_DIR / "modules" / "dilemmas" / "fixtures" / "mini.json"
GOLDEN_DATASET = BASE_DIR / "modules" / "runner" / "fixtures" / "golden.json"
MINER_FIXTURES = BASE_DIR / "modules" / "miner" / "fixtures"


def _call(*args):
    out, err = StringIO(), StringIO()
    call_command(*args, stdout=out, stderr=err)
    return out.getvalue(), err.getvalue()


# (bias, count, percent of coding prompts, aligned percent)
SCALE_TABLE = (
    ("confirmation", 30, 0.57, 6.7),
    ("framing", 25, 0.47, 28.0),
    ("overconfidence", 12, 0.23, 50.0),
    ("hyperbolic_discounting", 9, 0.17, 44.4),
    ("anchoring", 6, 0.11, 16.7),
    ("bandwagon", 5, 0.09, 60.0),
    ("availability", 5, 0.09, 20.0),
    ("hindsight", 5, 0.09, 0.0),
)

# (phrase, proposed bias, prompts, review verdict, judge-proposed matches, validated matches)
SCALE_CUES = (
    ("Am I right", "confirmation", 6, "confirm", 6, 2),
    ("Is that correct", "confirmation", 21, "confirm", 0, 0),
    ("so much nicer", "framing", 3, "relabel:confirmation", 0, 0),
    ("exciting", "framing", 9, "confirm", 9, 7),
    ("a huge loss", "framing", 16, "confirm", 0, 0),
    ("im almost sure", "overconfidence", 7, "confirm", 7, 6),
    ("no doubt", "overconfidence", 5, "confirm", 0, 0),
    ("for now", "hyperbolic_discounting", 5, "confirm", 5, 4),
    ("quick fix", "hyperbolic_discounting", 4, "confirm", 0, 0),
    ("The previous version was fine", "anchoring", 2, "confirm", 2, 1),
    ("started from 100ms", "anchoring", 4, "confirm", 0, 0),
    ("popular", "bandwagon", 3, "confirm", 3, 3),
    ("everyone", "bandwagon", 2, "confirm", 0, 0),
    ("I read somewhere", "availability", 1, "confirm", 1, 1),
    ("last week it crashed", "availability", 4, "confirm", 0, 0),
    ("should have", "hindsight", 5, "confirm", 5, 0),
    ("confirm dialog", "confirmation", 142, "reject", 0, 0),
)


CODING_JUDGE = "You label developer prompts"
EXTRACTION_JUDGE = "cognitive-bias cues"
ALIGNMENT_JUDGE = "You compare a cue phrase"


def _rule(system, response, contains=None):
    rule = {"system_contains": system, "response": json.dumps(response)}
    if contains is not None:
        rule["contains"] = contains
    return rule


def _write_scale_corpus(root):
    """Mining inputs for a 35,784-prompt corpus with a known outcome at every stage.

    Prompts of one cue group share their text, so the judge answers each group once.
    """
    prompts, scores, review, validations = [], [], {}, {}
    rules = [
        _rule(CODING_JUDGE, {"coding_related": False}, contains="haiku"),
        _rule(CODING_JUDGE, {"coding_related": True}),
    ]

    def add(text, score):
        prompt_id = f"dev-{len(prompts):05d}"
        prompts.append({"prompt_id": prompt_id, "text": text})
        scores.append(f"{prompt_id},{score}")
        return prompt_id

    for phrase, bias, count, verdict, proposed, validated in SCALE_CUES:
        rules.append(_rule(EXTRACTION_JUDGE, {"cue_span": phrase, "bias_type": bias}, contains=phrase))
        if proposed:
            final_bias = verdict.removeprefix("relabel:") if verdict.startswith("relabel:") else bias
            match = {"match": True, "reference_id": f"{final_bias}-ref", "matching_substrings": [phrase]}
            rules.append(_rule(ALIGNMENT_JUDGE, match, contains=f"Cue phrase: {phrase}\n"))
        for index in range(count):
            prompt_id = add(f"Please update the request handler. {phrase}.", 0.93)
            review[prompt_id] = verdict
            if index < proposed:
                validations[prompt_id] = index < validated
    rules.append(_rule(EXTRACTION_JUDGE, {"cue_span": None, "bias_type": None}))
    rules.append(_rule(ALIGNMENT_JUDGE, {"match": False, "reference_id": None, "matching_substrings": []}))
    references = [
        {"ref_id": f"{bias}-ref", "bias_type": bias, "span": f"a reference {bias} cue phrase"}
        for bias, *_ in SCALE_TABLE
    ]

    for _ in range(5_269 - len(prompts)):
        add("Fix the failing unit test in the parser module.", 0.88)
    for _ in range(9_620 - len(prompts)):
        add("Write a haiku about autumn leaves.", 0.75)
    for _ in range(50):
        add("Summarise this meeting.", 0.6)
    while len(prompts) < 35_784:
        add("Translate this sentence into French.", 0.12)

    files = {name: root / f"{name}.json" for name in ("judge", "review", "references", "validations")}
    files["corpus"] = root / "corpus.jsonl"
    files["scores"] = root / "scores.csv"
    stub = root / "judge_stub.json"
    files["corpus"].write_text("".join(json.dumps(prompt) + "\n" for prompt in prompts), encoding="utf-8")
    files["scores"].write_text("prompt_id,score\n" + "\n".join(scores) + "\n", encoding="utf-8")
    stub.write_text(json.dumps({"rules": rules}), encoding="utf-8")
    payloads = {
        "judge": {"model_id": "judge", "backend": "stub", "stub_script": str(stub)},
        "review": review,
        "references": references,
        "validations": validations,
    }
    for name, payload in payloads.items():
        files[name].write_text(json.dumps(payload), encoding="utf-8")
    return files


class CommandIntegrationTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_runs_without_auth_apps(self):
        """Test system checks and serializers work without the auth and contenttypes apps"""
        self.assertFalse(apps.is_installed("django.contrib.auth"))
        self.assertFalse(apps.is_installed("django.contrib.contenttypes"))
        call_command("check", stdout=StringIO(), stderr=StringIO())
        serializer = ModelEndpointSerializer(data={"model_id": "m", "backend": "stub", "stub_script": "s.json"})
        self.assertTrue(serializer.is_valid(), serializer.errors)

    def test_validate_mini_dataset(self):
        """Test the bundled three-pair dataset validates"""
        out, _ = _call("validate", "--dataset", str(MINI_DATASET))
        self.assertIn("3 pairs consistent", out)

    def test_validate_reports_inconsistent_pair(self):
        records = json.loads(MINI_DATASET.read_text(encoding="utf-8"))
        records[0]["biased_program"] = records[0]["biased_program"].replace(
            "score(print_statements, 3)", "score(print_statements, 10)"
        )
        broken = self.root / "broken.json"
        broken.write_text(json.dumps(records), encoding="utf-8")

        err = StringIO()
        with self.assertRaises(SystemExit) as ctx:
            call_command("validate", "--dataset", str(broken), stdout=StringIO(), stderr=err)
        self.assertEqual(ctx.exception.code, 1)
        payload = json.loads(err.getvalue())
        self.assertEqual(payload["error"], "data_error")
        self.assertEqual(payload["details"]["problems"][0]["pair_id"], "confirmation-logging-001")

    def test_unknown_flag(self):
        with self.assertRaises(CommandError):
            call_command("validate", "--dataset", str(MINI_DATASET), "--bogus", stdout=StringIO(), stderr=StringIO())

    def test_missing_file_is_an_io_error(self):
        err = StringIO()
        with self.assertRaises(SystemExit):
            call_command(
                "analyze",
                "--archive",
                str(self.root / "absent.ndjson"),
                "--output-dir",
                str(self.root),
                "--groupings",
                "model",
                stdout=StringIO(),
                stderr=err,
            )
        self.assertEqual(json.loads(err.getvalue())["error"], "io_error")

    def test_tier(self):
        output = self.root / "tiered.json"
        out, _ = _call("tier", "--dataset", str(MINI_DATASET), "--output", str(output))
        report = json.loads(out)
        self.assertEqual(len(report["tiers"]), 3)
        self.assertEqual(len(report["boundaries"]), 3)
        self.assertTrue(all(record["tier"] for record in json.loads(output.read_text(encoding="utf-8"))))

    def test_strategies_export(self):
        out, _ = _call("strategies", "export")
        presets = json.loads(out)
        self.assertEqual(len(presets), 14)
        self.assertEqual(presets[0]["id"], "∅")

    def test_stats_selftest(self):
        out, _ = _call(
            "stats",
            "selftest",
            "--mann-whitney-cases",
            "40",
            "--bh-cases",
            "40",
            "--glm-cases",
            "10",
            "--kappa-cases",
            "10",
        )
        self.assertIn("oracle checks passed", out)

    def test_workload(self):
        out, _ = _call("workload", "--config", str(DEMO_CONFIG))
        workload = json.loads(out)
        self.assertEqual(workload["decision_calls"], 1 * 2 * 8 * 2 * 5)
        self.assertEqual(workload["elicitation_calls"], 0)


class RunPipelineIntegrationTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.cache = self.root / "cache"

    def _run(self, output, *extra):
        return _call(
            "run", "--config", str(DEMO_CONFIG), "--cache-dir", str(self.cache), "--output-dir", str(output), *extra
        )

    def test_run_replay_and_analyze(self):
        """Test a stub run replays byte-identically offline and analyzes to the frozen table"""
        first = self.root / "first"
        out, _ = self._run(first)
        self.assertTrue(json.loads(out)["complete"])
        effective = json.loads((first / "effective_config.json").read_text(encoding="utf-8"))
        self.assertEqual(effective["strategies"], ["∅", "BW"])
        self.assertNotIn("api_key", json.dumps(effective).replace("api_key_env", ""))

        second = self.root / "second"
        with mock.patch("modules.gateway.backends.requests.post", side_effect=AssertionError("network")) as post:
            self._run(second, "--replay-only")
            self._run(second, "--replay-only")
        post.assert_not_called()
        self.assertEqual((first / "trials.ndjson").read_bytes(), (second / "trials.ndjson").read_bytes())

        tables = self.root / "tables"
        _call(
            "analyze",
            "--archive",
            str(first / "trials.ndjson"),
            "--dataset",
            str(GOLDEN_DATASET),
            "--output-dir",
            str(tables),
            "--groupings",
            "bias",
            "model",
        )
        self.assertEqual(
            (tables / "sensitivity_bias.csv").read_text(encoding="utf-8"),
            (FIXTURES / "golden_sensitivity_bias.csv").read_text(encoding="utf-8"),
        )
        first_pass = (tables / "statistics_model.json").read_bytes()
        _call("analyze", "--archive", str(first / "trials.ndjson"), "--output-dir", str(tables), "--groupings", "model")
        self.assertEqual((tables / "statistics_model.json").read_bytes(), first_pass)

        archive = str(first / "trials.ndjson")
        out, _ = _call("report", "select", "--config", str(DEMO_CONFIG), "--archive", archive, "--treatment", "BW")
        self.assertEqual(json.loads(out)["seed"], 7)

    def test_replay_only_with_empty_cache(self):
        err = StringIO()
        with self.assertRaises(SystemExit):
            call_command(
                "run",
                "--config",
                str(DEMO_CONFIG),
                "--cache-dir",
                str(self.cache),
                "--output-dir",
                str(self.root / "out"),
                "--replay-only",
                stdout=StringIO(),
                stderr=err,
            )
        self.assertEqual(json.loads(err.getvalue())["error"], "replay_error")
        missed = json.loads((self.root / "out" / "run_report.json").read_text(encoding="utf-8"))
        self.assertEqual(missed["replay_misses"], missed["expected_trials"])

        out, _ = self._run(self.root / "out")
        report = json.loads(out)
        self.assertTrue(report["complete"])
        self.assertEqual((report["failed_trials"], report["replay_misses"]), (0, 0))


class MinerIntegrationTest(SimpleTestCase):
    def test_mine_fixture_corpus(self):
        with tempfile.TemporaryDirectory() as tmp:
            out, _ = _call(
                "mine",
                "--corpus",
                str(MINER_FIXTURES / "corpus.jsonl"),
                "--scores",
                str(MINER_FIXTURES / "scores.csv"),
                "--judge",
                str(MINER_FIXTURES / "judge_endpoint.json"),
                "--review",
                str(MINER_FIXTURES / "review.json"),
                "--references",
                str(MINER_FIXTURES / "references.json"),
                "--cache-dir",
                str(Path(tmp) / "cache"),
                "--output-dir",
                tmp,
            )
            stages = json.loads(out)["stages"]
            prevalence = (Path(tmp) / "prevalence_bias.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(stages["positives"], 3)
        self.assertEqual(prevalence[0], "bias_type,count,percent,example,aligned_percent")
        self.assertTrue(prevalence[1].startswith("confirmation,2,40.0,"))

    def test_full_scale_corpus_counts(self):
        """Test a 35,784-prompt corpus flows through every stage to the expected counts"""
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            paths = _write_scale_corpus(root)
            out, _ = _call(
                "mine",
                "--corpus",
                str(paths["corpus"]),
                "--scores",
                str(paths["scores"]),
                "--judge",
                str(paths["judge"]),
                "--review",
                str(paths["review"]),
                "--references",
                str(paths["references"]),
                "--validations",
                str(paths["validations"]),
                "--cache-dir",
                str(root / "cache"),
                "--output-dir",
                str(root / "out"),
            )
            mining = json.loads((root / "out" / "mining.json").read_text(encoding="utf-8"))

        self.assertEqual(
            json.loads(out)["stages"],
            {"corpus": 35_784, "triaged": 9_620, "coding": 5_269, "candidates": 239, "positives": 97},
        )
        review = mining["review"]
        self.assertEqual((review["positives"], review["rejected"], review["relabelled"]), (97, 142, 3))
        self.assertEqual(review["type_stable"], 94)
        self.assertAlmostEqual(100 * review["positives"] / review["candidates"], 40.59, places=2)

        report = mining["prevalence"]
        self.assertAlmostEqual(report["percent_of_coding"], 1.84, places=2)
        self.assertAlmostEqual(report["percent_of_corpus"], 0.27, places=2)
        rows = {row["bias_type"]: row for row in report["rows"]}
        for bias, count, percent, aligned in SCALE_TABLE:
            self.assertEqual(rows[bias]["count"], count, bias)
            self.assertEqual(round(rows[bias]["percent"], 2), percent, bias)
            self.assertEqual(round(rows[bias]["aligned_percent"], 1), aligned, bias)
        top = [row["bias_type"] for row in report["rows"][:3]]
        self.assertEqual(top, ["confirmation", "framing", "overconfidence"])

        summary = mining["alignment_summary"]
        self.assertEqual((summary["records"], summary["proposed"], summary["validated"]), (97, 38, 24))
        self.assertAlmostEqual(report["alignment"]["point"], 24 / 97)
        self.assertAlmostEqual(report["alignment"]["lower"], 0.1723, delta=0.0005)
        self.assertAlmostEqual(report["alignment"]["upper"], 0.3418, delta=0.0005)


class ReportIntegrationTest(SimpleTestCase):
    def test_open_ended_labels(self):
        labels = [
            {
                "model_id": "m1",
                "strategy_id": strategy,
                "pair_id": f"p{i}",
                "coder_1": {"biased": "option_b" if flipped else "option_a", "unbiased": "option_a"},
                "coder_2": {"biased": "option_b" if flipped else "option_a", "unbiased": "option_a"},
            }
            for strategy, flips in (("∅", [1, 1, 0, 1]), ("sAX+BW", [0, 1, 0, 0]))
            for i, flipped in enumerate(flips)
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "labels.json"
            path.write_text(json.dumps(labels), encoding="utf-8")
            _call(
                "report", "open-ended", "--labels", str(path), "--seed", "3", "--resamples", "200", "--output-dir", tmp
            )
            table = json.loads((Path(tmp) / "open_ended_model.json").read_text(encoding="utf-8"))
        rows = {row["strategy_id"]: row for row in table["rows"]}
        self.assertEqual(rows["∅"]["sensitivity_percent"], 75.0)
        self.assertEqual(rows["sAX+BW"]["sensitivity_percent"], 25.0)
        self.assertEqual(rows["∅"]["percent_agreement"], 1.0)
        self.assertEqual(table["metadata"]["reductions"][0]["n_pairs"], 4)

    def _labels(self, root):
        labels = [
            {
                "model_id": "m1",
                "strategy_id": strategy,
                "pair_id": f"p{i}",
                "coder_1": {"biased": "option_b" if flipped else "option_a", "unbiased": "option_a"},
                "coder_2": {"biased": "option_b" if flipped else "option_a", "unbiased": "option_a"},
            }
            for strategy, flips in (("∅", [1, 1, 0, 1, 0, 1, 1, 0]), ("sAX+BW", [0, 1, 0, 0, 0, 1, 0, 0]))
            for i, flipped in enumerate(flips)
        ]
        path = root / "labels.json"
        path.write_text(json.dumps(labels), encoding="utf-8")
        return path

    def _config(self, root, seed, resamples):
        config = json.loads(DEMO_CONFIG.read_text(encoding="utf-8"))
        config.update(
            dataset=str(GOLDEN_DATASET),
            seed=seed,
            output_dir=str(root / f"out-{seed}-{resamples}"),
            analysis={"bootstrap_resamples": resamples},
        )
        config["endpoints"][0]["stub_script"] = str(GOLDEN_DATASET.parent / "golden_stub.json")
        path = root / f"run-{seed}-{resamples}.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        return path

    def _reduction(self, root, config, *extra):
        _call("report", "open-ended", "--labels", str(self._labels(root)), "--config", str(config), *extra)
        out_dir = json.loads(config.read_text(encoding="utf-8"))["output_dir"]
        table = json.loads((Path(out_dir) / "open_ended_model.json").read_text(encoding="utf-8"))
        return table["metadata"]["reductions"][0]["difference"]

    def test_config_seed_and_resamples_drive_the_bootstrap(self):
        """Test the run config's seed and resample count reach the interval and change it"""
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            first = self._reduction(root, self._config(root, 7, 300))
            again = self._reduction(root, self._config(root, 7, 300))
            reseeded = self._reduction(root, self._config(root, 8, 300))
            more = self._reduction(root, self._config(root, 7, 2000))
            flagged = self._reduction(root, self._config(root, 7, 300), "--seed", "8")

        self.assertEqual((first["seed"], first["resamples"]), (7, 300))
        self.assertEqual(first, again)
        self.assertEqual((more["seed"], more["resamples"]), (7, 2000))
        self.assertEqual(flagged, reseeded)
        self.assertAlmostEqual(first["point"], 0.375)
        self.assertNotEqual(first, reseeded)
        self.assertNotEqual(first, more)

    def test_seed_is_required_without_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            err = StringIO()
            with self.assertRaises(SystemExit):
                call_command(
                    "report",
                    "open-ended",
                    "--labels",
                    str(self._labels(Path(tmp))),
                    "--output-dir",
                    tmp,
                    stdout=StringIO(),
                    stderr=err,
                )
        self.assertEqual(json.loads(err.getvalue())["details"]["missing"], ["seed"])
