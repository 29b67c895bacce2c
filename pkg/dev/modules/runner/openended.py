"""Open-ended follow-up: subset selection, human labels and their summary."""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.db import models

from core.errors import DataError, SchemaError
from modules.dilemmas.domain import BiasType
from modules.stats.agreement import agreement
from modules.stats.resampling import bootstrap_ci, bootstrap_difference_ci
from modules.strategies.specs import BASELINE_ID

from .serializers import HumanLabelSerializer

logger = logging.getLogger(__name__)

DEFAULT_TREATMENT = "sAX+BW"
DEFAULT_PER_BIAS = 5


class Recommendation(models.TextChoices):
    OPTION_A = "option_a", "Option A"
    OPTION_B = "option_b", "Option B"
    UNDETERMINED = "undetermined", "Undetermined"


@dataclass(frozen=True)
class Judgement:
    biased: Recommendation
    unbiased: Recommendation

    @property
    def sensitive(self):
        determined = Recommendation.UNDETERMINED not in (self.biased, self.unbiased)
        return determined and self.biased != self.unbiased


@dataclass(frozen=True)
class HumanLabel:
    model_id: str
    strategy_id: str
    pair_id: str
    coder_1: Judgement
    coder_2: Judgement
    adjudicator: Judgement | None = None

    @property
    def key(self):
        return (self.model_id, self.strategy_id, self.pair_id)

    @property
    def disagreement(self):
        return self.coder_1 != self.coder_2

    @property
    def sensitive(self):
        """Final label; an undetermined adjudicated recommendation counts as not sensitive."""
        if not self.disagreement:
            return self.coder_1.sensitive
        return self.adjudicator.sensitive

    @property
    def sided_with(self):
        if not self.disagreement:
            return None
        if self.adjudicator == self.coder_1:
            return "coder_1"
        if self.adjudicator == self.coder_2:
            return "coder_2"
        return "neither"


@dataclass(frozen=True)
class OpenEndedSummary:
    model_id: str
    strategy_id: str
    n: int
    agreement: object
    disagreements: int
    sides: dict
    sensitivity: object

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "strategy_id": self.strategy_id,
            "n": self.n,
            "agreement": self.agreement.to_dict(),
            "disagreements": self.disagreements,
            "sides": self.sides,
            "sensitivity": self.sensitivity.to_dict(),
        }


@dataclass(frozen=True)
class Reduction:
    model_id: str
    baseline: str
    treatment: str
    n_pairs: int
    difference: object

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "baseline": self.baseline,
            "treatment": self.treatment,
            "n_pairs": self.n_pairs,
            "difference": self.difference.to_dict(),
        }


def select_open_ended_pairs(
    sensitivities,
    pairs_by_id,
    seed,
    baseline=BASELINE_ID,
    treatment=DEFAULT_TREATMENT,
    models=None,
    per_bias=DEFAULT_PER_BIAS,
):
    """Pairs the baseline flipped on and the treatment never did, sampled evenly per bias."""
    rates = {(s.model_id, s.strategy_id, s.pair_id): s.rate for s in sensitivities}
    models = sorted(models or {s.model_id for s in sensitivities})

    def qualifies(pair_id):
        for model_id in models:
            base, treated = rates.get((model_id, baseline, pair_id)), rates.get((model_id, treatment, pair_id))
            if base is None or treated is None or not (base > 0 and treated == 0):
                return False
        return True

    rng = np.random.default_rng(seed)
    selected = []
    for bias in BiasType:
        candidates = sorted(pid for pid, pair in pairs_by_id.items() if pair.bias_type == bias and qualifies(pid))
        if len(candidates) < per_bias:
            logger.warning("Only %d open-ended candidates for %s (wanted %d)", len(candidates), bias, per_bias)
        if candidates:
            picked = rng.choice(len(candidates), size=min(per_bias, len(candidates)), replace=False)
            selected.extend(sorted(candidates[i] for i in picked))
    return selected


def _judgement(data):
    return Judgement(Recommendation(data["biased"]), Recommendation(data["unbiased"]))


def parse_labels(records):
    labels = {}
    for index, record in enumerate(records):
        serializer = HumanLabelSerializer(data=record)
        if not serializer.is_valid():
            raise SchemaError(f"label record {index} is malformed", record=index, errors=serializer.errors)
        data = serializer.validated_data
        label = HumanLabel(
            model_id=data["model_id"],
            strategy_id=data["strategy_id"],
            pair_id=data["pair_id"],
            coder_1=_judgement(data["coder_1"]),
            coder_2=_judgement(data["coder_2"]),
            adjudicator=_judgement(data["adjudicator"]) if data.get("adjudicator") else None,
        )
        if label.key in labels:
            raise DataError(f"duplicate label for {label.key}", key=list(label.key))
        labels[label.key] = label

    unresolved = [list(label.key) for label in labels.values() if label.disagreement and label.adjudicator is None]
    if unresolved:
        raise DataError(f"{len(unresolved)} coder disagreements have no adjudication", unresolved=unresolved)
    return list(labels.values())


def load_labels(path):
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read label file {path}: {exc}", path=str(path)) from exc
    if not isinstance(records, list):
        raise SchemaError("label file must hold a JSON array", path=str(path))
    return parse_labels(records)


def summarize_open_ended(labels, seed, baseline=BASELINE_ID, treatment=DEFAULT_TREATMENT, resamples=None):
    """Per (model, strategy) agreement and sensitivity, plus per-model reductions."""
    cells = defaultdict(list)
    for label in labels:
        cells[(label.model_id, label.strategy_id)].append(label)

    summaries = []
    for (model_id, strategy_id), cell in sorted(cells.items()):
        cell.sort(key=lambda label: label.pair_id)
        sides = {"coder_1": 0, "coder_2": 0, "neither": 0}
        for label in cell:
            if label.sided_with:
                sides[label.sided_with] += 1
        summaries.append(
            OpenEndedSummary(
                model_id=model_id,
                strategy_id=strategy_id,
                n=len(cell),
                agreement=agreement(
                    [item.coder_1.sensitive for item in cell], [item.coder_2.sensitive for item in cell]
                ),
                disagreements=sum(label.disagreement for label in cell),
                sides=sides,
                sensitivity=bootstrap_ci([float(item.sensitive) for item in cell], seed=seed, resamples=resamples),
            )
        )

    reductions = []
    for model_id in sorted({label.model_id for label in labels}):
        base = {item.pair_id: item.sensitive for item in cells.get((model_id, baseline), [])}
        treated = {item.pair_id: item.sensitive for item in cells.get((model_id, treatment), [])}
        shared = sorted(base.keys() & treated.keys())
        if not shared:
            continue
        difference = bootstrap_difference_ci(
            [float(base[p]) for p in shared], [float(treated[p]) for p in shared], seed=seed, resamples=resamples
        )
        reductions.append(Reduction(model_id, baseline, treatment, len(shared), difference))
    return summaries, reductions
