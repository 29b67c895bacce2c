"""Strategy specifications and the preset registry.

A strategy is a set of components. The identity prefix comes from IsD, the
directives come from the axiom component, BW, IMP and CoT in that order, and
the id lists the components in canonical order joined with ``+``.
"""

from dataclasses import dataclass

from django.db import models

from core.errors import VocabularyError

from . import templates

BASELINE_ID = "∅"


class AxiomMode(models.TextChoices):
    NONE = "none", "No axiomatic background"
    SAX_INLINE = "sax_inline", "Self-elicited inside the explanation"
    TWO_STEP = "two_step", "Separate elicitation call"
    PROBEAX = "probeax", "Cues from the pair's own axioms"


class Phase(models.TextChoices):
    ELICITATION = "elicitation", "Elicitation"
    DECISION = "decision", "Decision"
    JUDGE = "judge", "Corpus judge"


AXIOM_COMPONENTS = {
    "sAX": AxiomMode.SAX_INLINE,
    "2sAX": AxiomMode.TWO_STEP,
    "ProbeAX": AxiomMode.PROBEAX,
}

# canonical order of the component tokens inside a strategy id
COMPONENT_ORDER = ("sAX", "2sAX", "ProbeAX", "BW", "IMP", "CoT", "IsD")

_DIRECTIVES = {
    "sAX": templates.SAX_DIRECTIVE,
    "BW": templates.BW_DIRECTIVE,
    "IMP": templates.IMP_DIRECTIVE,
    "CoT": templates.COT_DIRECTIVE,
}


@dataclass(frozen=True)
class StrategySpec:
    id: str
    identity_prefix: str | None = None
    directives: tuple = ()
    axiom_mode: AxiomMode = AxiomMode.NONE

    @property
    def needs_cues(self):
        return self.axiom_mode in (AxiomMode.TWO_STEP, AxiomMode.PROBEAX)

    @property
    def is_two_step(self):
        return self.axiom_mode == AxiomMode.TWO_STEP

    @property
    def components(self):
        return () if self.id == BASELINE_ID else tuple(self.id.split("+"))

    def to_dict(self):
        return {
            "id": self.id,
            "identity_prefix": self.identity_prefix,
            "directives": list(self.directives),
            "axiom_mode": str(self.axiom_mode),
        }


def compose_strategy(components):
    """Build a StrategySpec from component tokens such as ``["BW", "sAX"]``."""
    tokens = [token.strip() for token in components if token.strip() and token.strip() != BASELINE_ID]
    unknown = [token for token in tokens if token not in COMPONENT_ORDER]
    if unknown:
        raise VocabularyError(f"unknown strategy component {unknown[0]!r}", label=unknown[0])
    axioms = [token for token in tokens if token in AXIOM_COMPONENTS]
    if len(set(axioms)) > 1:
        raise VocabularyError(f"a strategy takes at most one axiom component, got {sorted(set(axioms))}")

    ordered = [token for token in COMPONENT_ORDER if token in tokens]
    directives = tuple(_DIRECTIVES[token] for token in ordered if token in _DIRECTIVES)
    return StrategySpec(
        id="+".join(ordered) or BASELINE_ID,
        identity_prefix=templates.ISD_PREFIX if "IsD" in ordered else None,
        directives=directives,
        axiom_mode=AXIOM_COMPONENTS[axioms[0]] if axioms else AxiomMode.NONE,
    )


def parse_strategy(strategy_id):
    return compose_strategy(strategy_id.split("+"))


PRESET_IDS = (
    BASELINE_ID,
    "CoT",
    "BW",
    "IsD",
    "IMP",
    "BW+IsD",
    "sAX",
    "2sAX",
    "ProbeAX",
    "sAX+BW",
    "sAX+IsD",
    "sAX+BW+IsD",
    "2sAX+BW",
    "2sAX+BW+IsD",
)

_PRESETS = {preset_id: parse_strategy(preset_id) for preset_id in PRESET_IDS}


def preset_registry():
    return [_PRESETS[preset_id] for preset_id in PRESET_IDS]


def get_strategy(strategy_id):
    """Preset lookup that also accepts any valid composition of components."""
    if strategy_id in _PRESETS:
        return _PRESETS[strategy_id]
    return parse_strategy(strategy_id)


def export_presets():
    return [spec.to_dict() for spec in preset_registry()]
