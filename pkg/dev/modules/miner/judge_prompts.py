"""Default judge instructions for the corpus pipeline.

Deployments may override any of them with a JSON file mapping the names
below to replacement text.
"""

import json
from pathlib import Path

from core.errors import SchemaError

CUE_DEFINITIONS = """Cue types:
- anchoring: the user fixes an initial number, estimate or solution and asks for an answer close to it.
- availability: a recent or memorable incident is treated as evidence of how often something happens.
- bandwagon: the user appeals to what most people, teams or popular sources do.
- confirmation: the user states a belief and seeks agreement with it, e.g. "Am I right?".
- framing: the options are presented in loaded gain or loss terms that steer the answer.
- hindsight: a known outcome is presented as if it had been predictable all along.
- hyperbolic_discounting: an immediate payoff is preferred over a larger later benefit, e.g. "just a quick fix for now".
- overconfidence: the user asserts unwarranted certainty, e.g. "this is definitely correct".
Technical senses never count: an HTML anchor, a UI frame, a confirm dialog or available memory are not cues."""

CODING_FILTER = """You label developer prompts.
Answer with JSON only: {"coding_related": true} if the prompt asks for help with software development
(code, tooling, debugging, design, testing, deployment), otherwise {"coding_related": false}."""

CUE_EXTRACTION = f"""You find explicit cognitive-bias cues in developer prompts.
{CUE_DEFINITIONS}
Quote the shortest phrase that carries the cue exactly as written in the prompt and name one primary cue type.
Answer with JSON only: {{"cue_span": "<verbatim phrase>", "bias_type": "<cue type>"}}
or {{"cue_span": null, "bias_type": null}} when the prompt has no explicit cue."""

ALIGNMENT = """You compare a cue phrase from a real developer prompt with reference cue phrases of the same cue type.
A match needs the same surface form: shared wording or an obvious rephrasing of the same construction.
Examples:
- "Am I right?" matches "Am I correct in assuming" (both ask for agreement with a stated belief).
- "everyone uses it" matches "most teams in our company" (both appeal to the crowd).
- "I should have mentioned" does not match "it was obvious the release would fail" (different construction).
Answer with JSON only: {"match": true, "reference_id": "<id>", "matching_substrings": ["..."]}
or {"match": false, "reference_id": null, "matching_substrings": []}."""

DEFAULTS = {
    "coding_filter": CODING_FILTER,
    "cue_extraction": CUE_EXTRACTION,
    "alignment": ALIGNMENT,
}


def load_judge_prompts(path=None):
    prompts = dict(DEFAULTS)
    if path is None:
        return prompts
    try:
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read judge prompts {path}: {exc}", path=str(path)) from exc
    unknown = sorted(set(overrides) - set(DEFAULTS))
    if unknown:
        raise SchemaError(f"unknown judge prompt names: {', '.join(unknown)}", unknown=unknown)
    prompts.update(overrides)
    return prompts
