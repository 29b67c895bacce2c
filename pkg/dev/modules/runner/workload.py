"""Call and prompt-token budgeting for an experiment configuration.

The elicitation prompt depends only on the dilemma, so every two-step strategy
archives its own elicitation record while the gateway cache sends one call per
(model, pair, run, source) to the backend.
"""

from dataclasses import dataclass

from core.errors import ContractError
from modules.dilemmas.domain import Condition
from modules.gateway.endpoints import estimate_tokens
from modules.strategies.cues import axiom_cues
from modules.strategies.prompts import build_elicitation_prompt, compose_prompt
from modules.strategies.specs import AxiomMode

PLACEHOLDER_CUES = ""
ELICITATION_ORDER = (Condition.BIASED, Condition.UNBIASED)


@dataclass(frozen=True)
class Workload:
    decision_calls: int
    elicitation_calls: int
    shared_elicitation_calls: int = 0
    estimated_prompt_tokens: int = 0

    @property
    def total_calls(self):
        return self.decision_calls + self.elicitation_calls

    @property
    def backend_calls(self):
        """Calls a cold cache sends."""
        return self.decision_calls + self.shared_elicitation_calls

    def to_dict(self):
        return {
            "decision_calls": self.decision_calls,
            "elicitation_calls": self.elicitation_calls,
            "total_calls": self.total_calls,
            "shared_elicitation_calls": self.shared_elicitation_calls,
            "backend_calls": self.backend_calls,
            "estimated_prompt_tokens": self.estimated_prompt_tokens,
        }


def call_counts(n_models, n_strategies, n_two_step, n_pairs, runs, elicitations_per_run=1):
    if min(n_models, n_strategies, n_two_step, n_pairs, runs) < 0 or n_two_step > n_strategies:
        raise ContractError("call counts need nonnegative sizes and no more two-step than total strategies")
    decision_calls = n_models * n_strategies * n_pairs * len(Condition) * runs
    elicitation_calls = n_models * n_two_step * n_pairs * runs * elicitations_per_run
    return decision_calls, elicitation_calls


def shared_elicitation_count(n_models, n_two_step, n_pairs, runs, elicitations_per_run=1):
    return n_models * n_pairs * runs * elicitations_per_run if n_two_step else 0


def _bundle_tokens(bundle):
    return estimate_tokens(bundle.system_instruction) + estimate_tokens(bundle.user_message)


def plan_workload(n_models, strategies, pairs, runs, open_ended=False, elicitations_per_run=1, cue_renderer=None):
    """Counts for the design plus prompt tokens summed over the prompts sent.

    Elicited cues are unknown before the run, so two-step decision prompts are
    estimated without them.
    """
    if elicitations_per_run not in (1, 2):
        raise ContractError("elicitations_per_run must be 1 or 2", elicitations_per_run=elicitations_per_run)
    strategies, pairs = list(strategies), list(pairs)
    n_two_step = sum(strategy.is_two_step for strategy in strategies)
    decision_calls, elicitation_calls = call_counts(
        n_models, len(strategies), n_two_step, len(pairs), runs, elicitations_per_run
    )
    shared = shared_elicitation_count(n_models, n_two_step, len(pairs), runs, elicitations_per_run)

    tokens = 0
    for pair in pairs:
        axiom_text = None
        for strategy in strategies:
            if strategy.axiom_mode == AxiomMode.PROBEAX:
                axiom_text = axiom_text or axiom_cues(pair, cue_renderer)
                cues = axiom_text
            else:
                cues = PLACEHOLDER_CUES if strategy.is_two_step else None
            for condition in Condition:
                bundle = compose_prompt(strategy, pair.dilemma(condition), cues=cues, open_ended=open_ended)
                tokens += _bundle_tokens(bundle) * n_models * runs
        if n_two_step:
            for source in ELICITATION_ORDER[:elicitations_per_run]:
                tokens += _bundle_tokens(build_elicitation_prompt(pair.dilemma(source))) * n_models * runs
    return Workload(decision_calls, elicitation_calls, shared, tokens)
