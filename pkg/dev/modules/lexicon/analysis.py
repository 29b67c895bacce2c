"""Per-bias rate-ratio analysis of codebook features.

Group 1 holds responses to biased dilemmas whose pair flipped at least once
(sensitive), group 0 those whose pair never flipped. Positive log rate
ratios mean higher per-token usage in sensitive responses.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, replace

from core.errors import DomainError
from modules.dilemmas.domain import BiasType, Condition
from modules.dilemmas.trials import TrialRecord
from modules.stats.multiplicity import bh_fdr, stars
from modules.stats.rates import rate_ratio_effect

from .codebook import TOKEN_PATTERN, count_features, count_tokens

logger = logging.getLogger(__name__)

DEFAULT_STRATEGY = "sAX+BW"
TOP_K = 3


@dataclass(frozen=True)
class LexiconDocument:
    bias_type: str
    text: str
    trial_key: tuple | None = None


@dataclass(frozen=True)
class LexiconAnalysis:
    effects: list
    metadata: dict

    def top_features(self, k=TOP_K):
        """Per bias, the k non-degenerate features with the largest |log rate ratio|."""
        by_bias = defaultdict(list)
        for effect in self.effects:
            if not effect.degenerate:
                by_bias[effect.bias_type].append(effect)
        return {
            bias: [e.feature_id for e in sorted(effects, key=lambda e: (-abs(e.log_rate_ratio), e.feature_id))[:k]]
            for bias, effects in by_bias.items()
        }

    def to_dict(self):
        return {"metadata": self.metadata, "effects": [effect.to_dict() for effect in self.effects]}


def documents_from_trials(records, sensitivities, pairs_by_id, strategy_id=DEFAULT_STRATEGY):
    """Split biased-condition responses under one strategy by pair sensitivity.

    Pairs with an undefined rate and responses without word tokens are left out.
    """
    rates = {(s.model_id, s.strategy_id, s.pair_id): s.rate for s in sensitivities}
    sensitive, non_sensitive = [], []
    for record in records:
        if not isinstance(record, TrialRecord) or record.strategy_id != strategy_id:
            continue
        if record.condition != Condition.BIASED or record.error or not count_tokens(record.raw_text or ""):
            continue
        rate = rates.get((record.model_id, record.strategy_id, record.pair_id))
        if rate is None:
            continue
        document = LexiconDocument(str(pairs_by_id[record.pair_id].bias_type), record.raw_text, record.key)
        (sensitive if rate > 0 else non_sensitive).append(document)
    return sensitive, non_sensitive


def analyze_features(sensitive_docs, non_sensitive_docs, codebook, alpha=None, cov_type="HC0"):
    """One FeatureEffect per (bias, feature); BH runs over every non-degenerate cell."""
    if not sensitive_docs or not non_sensitive_docs:
        raise DomainError(
            "both document groups must be non-empty",
            sensitive=len(sensitive_docs),
            non_sensitive=len(non_sensitive_docs),
        )

    groups = defaultdict(lambda: ([], []))
    for side, documents in enumerate((sensitive_docs, non_sensitive_docs)):
        for document in documents:
            groups[document.bias_type][side].append(count_features(codebook, document.text, document.trial_key))

    effects = []
    ordered_biases = [str(b) for b in BiasType if str(b) in groups] + sorted(set(groups) - {str(b) for b in BiasType})
    for bias in ordered_biases:
        sensitive, non_sensitive = groups[bias]
        if not sensitive or not non_sensitive:
            logger.warning("Bias %s lacks sensitive or non-sensitive responses; skipped", bias)
            continue
        documents = sensitive + non_sensitive
        membership = [1] * len(sensitive) + [0] * len(non_sensitive)
        tokens = [counts.token_count for counts in documents]
        for feature_id in codebook.feature_ids:
            counts = [doc.counts[feature_id] for doc in documents]
            effects.append(rate_ratio_effect(bias, feature_id, counts, tokens, membership, cov_type=cov_type))

    tested = [index for index, effect in enumerate(effects) if not effect.degenerate]
    fdr = bh_fdr([effects[i].p for i in tested], alpha=alpha)
    for index, q in zip(tested, fdr.q_values, strict=True):
        effects[index] = replace(effects[index], q=q, stars=stars(q))

    metadata = {
        "token_pattern": TOKEN_PATTERN,
        "sensitive_documents": len(sensitive_docs),
        "non_sensitive_documents": len(non_sensitive_docs),
        "tested_cells": len(tested),
        "degenerate_cells": len(effects) - len(tested),
        "cov_type": cov_type,
    }
    return LexiconAnalysis(effects, metadata)
