import re
from dataclasses import dataclass

from core.errors import ContractError, ExtractionError

from . import templates
from .specs import Phase

_TRAILING_QUESTION = re.compile(r"[^.!?\n]*\?\s*$")
_BEST_PRACTICES = re.compile(re.escape(templates.BEST_PRACTICES_MARKER), re.IGNORECASE)


@dataclass(frozen=True)
class PromptBundle:
    system_instruction: str
    user_message: str
    phase: Phase = Phase.DECISION

    def to_dict(self):
        return {
            "system_instruction": self.system_instruction,
            "user_message": self.user_message,
            "phase": str(self.phase),
        }


def open_ended_text(text):
    """Drop the closing question of a dilemma and ask for a suggestion instead."""
    match = _TRAILING_QUESTION.search(text)
    head = text[: match.start()] if match else text
    return f"{head.rstrip()} {templates.OPEN_ENDED_QUESTION}".lstrip()


def system_instruction(strategy, open_ended=False):
    parts = []
    if strategy.identity_prefix:
        parts.append(strategy.identity_prefix)
    if not open_ended:
        parts.append(templates.FORMAT_BLOCK)
    parts.extend(strategy.directives)
    return "\n".join(parts)


def compose_prompt(strategy, dilemma, cues=None, open_ended=False):
    """Decision-phase bundle for one dilemma under one strategy.

    Cue-driven strategies (two-step and ProbeAX) must be given their cues;
    they are appended to the dilemma text after a ``Reasoning cues:`` label.
    """
    if not dilemma.text.strip():
        raise ContractError(f"dilemma {dilemma.id} has no text")
    if strategy.needs_cues and cues is None:
        raise ContractError(
            f"strategy {strategy.id} needs reasoning cues before the decision call", strategy=strategy.id
        )

    user_message = open_ended_text(dilemma.text) if open_ended else dilemma.text
    if cues is not None:
        user_message = f"{user_message}\n\n{templates.CUES_PREFIX}{cues}"
    return PromptBundle(system_instruction(strategy, open_ended), user_message, Phase.DECISION)


def build_elicitation_prompt(dilemma):
    if not dilemma.text.strip():
        raise ContractError(f"dilemma {dilemma.id} has no text")
    return PromptBundle(templates.ELICITATION_INSTRUCTION, dilemma.text, Phase.ELICITATION)


def parse_best_practices(raw):
    """Text after the last ``Best Practices:`` marker, trimmed."""
    matches = list(_BEST_PRACTICES.finditer(raw or ""))
    if not matches:
        raise ExtractionError("no Best Practices marker in elicitation output")
    cues = raw[matches[-1].end():].strip()
    if not cues:
        raise ExtractionError("empty Best Practices section in elicitation output")
    return cues
