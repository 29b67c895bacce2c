import logging
from dataclasses import dataclass, field

from modules.dilemmas.domain import Condition, Decision

from .parser import parse_program, parse_term
from .solver import solve
from .terms import Atom

logger = logging.getLogger(__name__)

DECISION_QUERY = "decision(X)"


@dataclass(frozen=True)
class PairVerification:
    pair_id: str
    consistent: bool
    unbiased_decision: Decision
    biased_decision: Decision
    unbiased_steps: int
    biased_steps: int
    unbiased_explored: int = 0
    biased_explored: int = 0
    diagnostics: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "pair_id": self.pair_id,
            "consistent": self.consistent,
            "unbiased_decision": self.unbiased_decision.to_dict(),
            "biased_decision": self.biased_decision.to_dict(),
            "unbiased_steps": self.unbiased_steps,
            "biased_steps": self.biased_steps,
            "unbiased_explored": self.unbiased_explored,
            "biased_explored": self.biased_explored,
            "diagnostics": list(self.diagnostics),
        }


def derive_decision(program_text, depth_limit=None):
    """Solve ``decision(X)`` on one variant program; returns (Decision, ProofResult)."""
    result = solve(parse_program(program_text), parse_term(DECISION_QUERY), depth_limit=depth_limit)
    if not result.success:
        return Decision.invalid("no solution for decision(X)"), result
    value = result.bindings.get("X")
    if not isinstance(value, Atom):
        return Decision.invalid(f"decision(X) bound X to {value}"), result
    return Decision.from_atom(value.name), result


def verify_pair(pair, depth_limit=None):
    """Check that both variants of a pair derive the expected decision."""
    outcomes = {}
    diagnostics = []
    for condition in (Condition.UNBIASED, Condition.BIASED):
        decision, proof = derive_decision(pair.program(condition), depth_limit=depth_limit)
        outcomes[condition] = (decision, proof)
        if not decision.is_valid:
            diagnostics.append(f"{condition}: {decision.reason}")

    unbiased, unbiased_proof = outcomes[Condition.UNBIASED]
    biased, biased_proof = outcomes[Condition.BIASED]
    if unbiased.is_valid and biased.is_valid and unbiased != biased:
        diagnostics.append(f"variants disagree: unbiased {unbiased.choice}, biased {biased.choice}")
    elif unbiased.is_valid and unbiased == biased and unbiased != pair.expected_decision:
        diagnostics.append(f"derived {unbiased.choice}, expected {pair.expected_decision.choice}")

    consistent = not diagnostics
    if not consistent:
        logger.warning("Pair %s is inconsistent: %s", pair.pair_id, "; ".join(diagnostics))
    return PairVerification(
        pair_id=pair.pair_id,
        consistent=consistent,
        unbiased_decision=unbiased,
        biased_decision=biased,
        unbiased_steps=unbiased_proof.steps,
        biased_steps=biased_proof.steps,
        unbiased_explored=unbiased_proof.explored,
        biased_explored=biased_proof.explored,
        diagnostics=tuple(diagnostics),
    )
