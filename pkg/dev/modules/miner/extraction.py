"""Judge-driven coding filter and cue extraction."""

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from core.conf import bench_setting
from core.errors import ExtractionError, RequestError, TransportError
from modules.dilemmas.domain import BiasType
from modules.strategies.prompts import PromptBundle
from modules.strategies.specs import Phase

from .judge_prompts import load_judge_prompts
from .review import CueRecord

logger = logging.getLogger(__name__)

_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


@dataclass(frozen=True)
class JudgeFailure:
    prompt_id: str
    stage: str
    reason: str

    def to_dict(self):
        return {"prompt_id": self.prompt_id, "stage": self.stage, "reason": self.reason}


@dataclass
class ExtractionOutcome:
    coding: list = field(default_factory=list)
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def parse_judge_json(text):
    match = _JSON_OBJECT.search(text or "")
    if not match:
        raise ExtractionError("judge output holds no JSON object")
    try:
        payload = json.loads(match.group(0))
    except json.JSONDecodeError as exc:
        raise ExtractionError(f"judge output is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ExtractionError("judge output is not a JSON object")
    return payload


class CueExtractor:
    def __init__(self, gateway, endpoint, judge_prompts=None, workers=None):
        self.gateway = gateway
        self.endpoint = endpoint
        self.prompts = judge_prompts or load_judge_prompts()
        self.workers = workers or bench_setting("MAX_IN_FLIGHT")

    def _ask(self, instruction, text):
        bundle = PromptBundle(instruction, text, Phase.JUDGE)
        return parse_judge_json(self.gateway.complete(self.endpoint, bundle, 0).text)

    def _coding(self, prompt):
        payload = self._ask(self.prompts["coding_filter"], prompt.text)
        verdict = payload.get("coding_related")
        if not isinstance(verdict, bool):
            raise ExtractionError("coding verdict must be true or false")
        return verdict

    def _cue(self, prompt):
        payload = self._ask(self.prompts["cue_extraction"], prompt.text)
        span, label = payload.get("cue_span"), payload.get("bias_type")
        if not span:
            return None
        if label not in BiasType.values:
            raise ExtractionError(f"judge proposed unknown cue type {label!r}")
        if span not in prompt.text:
            raise ExtractionError(f"span {span!r} does not occur verbatim in the prompt")
        return CueRecord(prompt.prompt_id, span, BiasType(label))

    def judge(self, prompt):
        """(coding_related, record or None, failures) for one prompt."""
        stage = "coding_filter"
        try:
            if not self._coding(prompt):
                return False, None, []
            stage = "cue_extraction"
            return True, self._cue(prompt), []
        except (ExtractionError, TransportError, RequestError) as exc:
            logger.info("Judge %s failed for %s: %s", stage, prompt.prompt_id, exc.message)
            return stage == "cue_extraction", None, [JudgeFailure(prompt.prompt_id, stage, exc.message)]

    def run(self, prompts):
        outcome = ExtractionOutcome()
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            for prompt, (coding, record, failures) in zip(prompts, executor.map(self.judge, prompts), strict=True):
                if coding:
                    outcome.coding.append(prompt.prompt_id)
                if record is not None:
                    outcome.records.append(record)
                outcome.failures.extend(failures)
        logger.info(
            "Judge kept %d coding prompts and %d cue candidates (%d failures)",
            len(outcome.coding),
            len(outcome.records),
            len(outcome.failures),
        )
        return outcome


def filter_and_extract(prompts, gateway, endpoint, judge_prompts=None, workers=None):
    return CueExtractor(gateway, endpoint, judge_prompts, workers).run(list(prompts))
