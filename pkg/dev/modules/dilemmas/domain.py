from dataclasses import dataclass, field

from django.db import models

from core.errors import ContractError

OPTION_LABELS = ("Option A", "Option B")


class BiasType(models.TextChoices):
    ANCHORING = "anchoring", "Anchoring bias"
    AVAILABILITY = "availability", "Availability bias"
    BANDWAGON = "bandwagon", "Bandwagon effect"
    CONFIRMATION = "confirmation", "Confirmation bias"
    FRAMING = "framing", "Framing effect"
    HINDSIGHT = "hindsight", "Hindsight bias"
    HYPERBOLIC_DISCOUNTING = "hyperbolic_discounting", "Hyperbolic discounting"
    OVERCONFIDENCE = "overconfidence", "Overconfidence bias"


class Condition(models.TextChoices):
    BIASED = "biased", "Biased"
    UNBIASED = "unbiased", "Unbiased"


class ComplexityTier(models.TextChoices):
    LOW = "low", "Low"
    MID_LOW = "mid_low", "Mid-low"
    MID_HIGH = "mid_high", "Mid-high"
    HIGH = "high", "High"

    @property
    def rank(self):
        return list(ComplexityTier).index(self)


class DecisionChoice(models.TextChoices):
    OPTION_A = "option_a", "Option A"
    OPTION_B = "option_b", "Option B"
    INVALID = "invalid", "Invalid"


@dataclass(frozen=True)
class Decision:
    choice: DecisionChoice
    reason: str | None = None

    def __post_init__(self):
        if self.choice == DecisionChoice.INVALID and not self.reason:
            raise ContractError("an invalid decision needs a reason")
        if self.choice != DecisionChoice.INVALID and self.reason is not None:
            raise ContractError(f"{self.choice} decisions carry no reason")

    @classmethod
    def option_a(cls):
        return cls(DecisionChoice.OPTION_A)

    @classmethod
    def option_b(cls):
        return cls(DecisionChoice.OPTION_B)

    @classmethod
    def invalid(cls, reason):
        return cls(DecisionChoice.INVALID, reason)

    @classmethod
    def from_atom(cls, atom):
        """Map a ground-truth atom (option_a/option_b) to a Decision."""
        if atom in (DecisionChoice.OPTION_A, DecisionChoice.OPTION_B):
            return cls(DecisionChoice(atom))
        return cls.invalid(f"unexpected decision atom {atom!r}")

    @property
    def is_valid(self):
        return self.choice != DecisionChoice.INVALID

    def to_dict(self):
        data = {"choice": str(self.choice)}
        if self.reason is not None:
            data["reason"] = self.reason
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(DecisionChoice(data["choice"]), data.get("reason"))


@dataclass(frozen=True)
class Dilemma:
    id: str
    bias_type: BiasType
    condition: Condition
    text: str
    option_labels: tuple = OPTION_LABELS


@dataclass(frozen=True)
class DilemmaPair:
    pair_id: str
    bias_type: BiasType
    unbiased: Dilemma
    biased: Dilemma
    shared_axioms: str
    unbiased_program: str
    biased_program: str
    expected_decision: Decision
    inference_steps: int | None = None
    tier: ComplexityTier | None = None
    # unknown dataset fields, carried through untouched
    extras: dict = field(default_factory=dict)

    def dilemma(self, condition):
        return self.biased if condition == Condition.BIASED else self.unbiased

    def program(self, condition):
        """Full Horn program text for one variant: shared axioms first."""
        variant = self.biased_program if condition == Condition.BIASED else self.unbiased_program
        return f"{self.shared_axioms}\n{variant}"
