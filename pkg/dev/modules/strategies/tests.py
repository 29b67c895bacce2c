import json
from pathlib import Path

from django.test import SimpleTestCase

from core.errors import ContractError, ExtractionError, VocabularyError
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.domain import BiasType, Condition, Dilemma

from . import templates
from .cues import ClauseListRenderer, ParaphraseRenderer, axiom_cues
from .prompts import build_elicitation_prompt, compose_prompt, open_ended_text, parse_best_practices
from .specs import PRESET_IDS, AxiomMode, Phase, compose_strategy, get_strategy, preset_registry

GOLDEN = json.loads((Path(__file__).resolve().parent / "fixtures" / "golden_prompts.json").read_text(encoding="utf-8"))
MINI_DATASET = Path(__file__).resolve().parents[1] / "dilemmas" / "fixtures" / "mini.json"

DILEMMA = Dilemma(
    id="p1:biased",
    bias_type=BiasType.CONFIRMATION,
    condition=Condition.BIASED,
    text="We log with print. Option A: structured logging. Option B: keep print. Which option should we choose?",
)


class PromptFidelityTest(SimpleTestCase):
    def test_directives_match_golden_file(self):
        """Test every rendered directive equals its golden text byte for byte"""
        self.assertEqual(templates.FORMAT_BLOCK, GOLDEN["format_block"])
        self.assertEqual(get_strategy("CoT").directives, (GOLDEN["CoT"],))
        self.assertEqual(get_strategy("BW").directives, (GOLDEN["BW"],))
        self.assertEqual(get_strategy("IMP").directives, (GOLDEN["IMP"],))
        self.assertEqual(get_strategy("IsD").identity_prefix, GOLDEN["IsD"])
        self.assertEqual(get_strategy("sAX").directives, (GOLDEN["sAX"],))
        self.assertEqual(build_elicitation_prompt(DILEMMA).system_instruction, GOLDEN["2sAX"])

    def test_format_block_ending(self):
        bundle = compose_prompt(get_strategy("BW+IsD"), DILEMMA)
        self.assertIn("without any additional text or formatting.", bundle.system_instruction)


class PresetRegistryTest(SimpleTestCase):
    def test_all_named_presets_present(self):
        """Test the registry carries the fourteen named presets"""
        ids = [spec.id for spec in preset_registry()]
        self.assertEqual(ids, list(PRESET_IDS))
        self.assertEqual(len(set(ids)), 14)

    def test_baseline(self):
        spec = get_strategy("∅")
        self.assertIsNone(spec.identity_prefix)
        self.assertEqual(spec.directives, ())
        self.assertEqual(spec.axiom_mode, AxiomMode.NONE)

    def test_bw_isd(self):
        """Test BW+IsD prepends the persona and appends the BW directive"""
        spec = get_strategy("BW+IsD")
        self.assertEqual(spec.identity_prefix, templates.ISD_PREFIX)
        self.assertEqual(spec.directives, (templates.BW_DIRECTIVE,))

    def test_sax_bw(self):
        spec = get_strategy("sAX+BW")
        self.assertEqual(spec.directives, (templates.SAX_DIRECTIVE, templates.BW_DIRECTIVE))
        self.assertEqual(spec.axiom_mode, AxiomMode.SAX_INLINE)

    def test_cue_strategies(self):
        self.assertTrue(get_strategy("2sAX+BW").is_two_step)
        self.assertTrue(get_strategy("ProbeAX").needs_cues)
        self.assertFalse(get_strategy("sAX").needs_cues)

    def test_custom_composition_is_canonical(self):
        """Test component order in an id does not change the strategy"""
        self.assertEqual(compose_strategy(["CoT", "BW", "sAX"]).id, "sAX+BW+CoT")
        self.assertEqual(get_strategy("IsD+BW"), get_strategy("BW+IsD"))
        directives = compose_strategy(["CoT", "IMP", "BW"]).directives
        self.assertEqual(directives, (templates.BW_DIRECTIVE, templates.IMP_DIRECTIVE, templates.COT_DIRECTIVE))

    def test_unknown_component(self):
        with self.assertRaises(VocabularyError):
            get_strategy("BW+Magic")

    def test_two_axiom_components(self):
        with self.assertRaises(VocabularyError):
            compose_strategy(["sAX", "2sAX"])


class ComposePromptTest(SimpleTestCase):
    def test_baseline_keeps_text(self):
        """Test the baseline user message is the dilemma text unchanged"""
        bundle = compose_prompt(get_strategy("∅"), DILEMMA)
        self.assertEqual(bundle.user_message, DILEMMA.text)
        self.assertEqual(bundle.system_instruction, templates.FORMAT_BLOCK)
        self.assertEqual(bundle.phase, Phase.DECISION)

    def test_probeax_cues_appended(self):
        bundle = compose_prompt(get_strategy("ProbeAX"), DILEMMA, cues="Log meaningfully")
        self.assertTrue(bundle.user_message.endswith("Reasoning cues: Log meaningfully"))
        self.assertTrue(bundle.user_message.startswith(DILEMMA.text))

    def test_cot_directive_last(self):
        bundle = compose_prompt(get_strategy("CoT"), DILEMMA)
        self.assertTrue(bundle.system_instruction.endswith(templates.COT_DIRECTIVE))

    def test_order_prefix_format_directives(self):
        bundle = compose_prompt(get_strategy("sAX+BW+IsD"), DILEMMA)
        expected = "\n".join(
            [templates.ISD_PREFIX, templates.FORMAT_BLOCK, templates.SAX_DIRECTIVE, templates.BW_DIRECTIVE]
        )
        self.assertEqual(bundle.system_instruction, expected)

    def test_missing_cues(self):
        """Test a two-step strategy without cues violates the contract"""
        with self.assertRaises(ContractError):
            compose_prompt(get_strategy("2sAX"), DILEMMA)

    def test_stable_rendering(self):
        spec = get_strategy("2sAX+BW+IsD")
        self.assertEqual(compose_prompt(spec, DILEMMA, cues="x"), compose_prompt(spec, DILEMMA, cues="x"))

    def test_open_ended_mode(self):
        """Test open-ended prompts drop the format block and the closing question"""
        bundle = compose_prompt(get_strategy("BW+IsD"), DILEMMA, open_ended=True)
        self.assertNotIn(templates.FORMAT_BLOCK, bundle.system_instruction)
        self.assertEqual(bundle.system_instruction, f"{templates.ISD_PREFIX}\n{templates.BW_DIRECTIVE}")
        self.assertEqual(
            bundle.user_message,
            "We log with print. Option A: structured logging. Option B: keep print. What do you suggest?",
        )

    def test_open_ended_without_question(self):
        self.assertEqual(open_ended_text("Pick one."), "Pick one. What do you suggest?")


class ElicitationTest(SimpleTestCase):
    def test_elicitation_bundle(self):
        bundle = build_elicitation_prompt(DILEMMA)
        self.assertEqual(bundle.phase, Phase.ELICITATION)
        self.assertIn("without mentioning any of the options", bundle.system_instruction)
        self.assertIn("Best Practices: <a short description of the best practices>", bundle.system_instruction)
        self.assertEqual(bundle.user_message, DILEMMA.text)

    def test_option_labels_only_inside_dilemma(self):
        """Test the elicitation instruction never names the options"""
        bundle = build_elicitation_prompt(DILEMMA)
        self.assertNotIn("Option A", bundle.system_instruction)
        self.assertNotIn("Option B", bundle.system_instruction)

    def test_empty_dilemma(self):
        with self.assertRaises(ContractError):
            build_elicitation_prompt(Dilemma("x", BiasType.FRAMING, Condition.BIASED, "   "))


class ParseBestPracticesTest(SimpleTestCase):
    def test_direct(self):
        self.assertEqual(parse_best_practices("Best Practices: prefer automated tests"), "prefer automated tests")

    def test_last_marker_wins(self):
        self.assertEqual(parse_best_practices("noise\nBest Practices: A. then B."), "A. then B.")
        self.assertEqual(parse_best_practices("best practices: one\nBEST PRACTICES:  two "), "two")

    def test_missing_marker(self):
        with self.assertRaises(ExtractionError):
            parse_best_practices("I think testing matters")


class AxiomCueTest(SimpleTestCase):
    def setUp(self):
        self.pair = load_dataset(MINI_DATASET)[0]

    def test_clause_per_line(self):
        """Test ProbeAX cues list the shared axioms one clause per line"""
        cues = axiom_cues(self.pair)
        lines = cues.splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[2].startswith("better(X, Y) :- score(X, SX)"))
        self.assertNotIn("%", cues)
        self.assertEqual(ClauseListRenderer()(self.pair), cues)

    def test_paraphrase_table(self):
        printed = axiom_cues(self.pair).splitlines()[2]
        renderer = ParaphraseRenderer({printed: "Prefer the option with the higher quality score."})
        lines = renderer(self.pair).splitlines()
        self.assertEqual(lines[2], "Prefer the option with the higher quality score.")
        self.assertTrue(lines[0].startswith("decision(option_a) :-"))
