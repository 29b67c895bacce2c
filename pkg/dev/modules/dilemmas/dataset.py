"""Loading, validating and serializing dilemma datasets.

A dataset is one JSON document: an array of pair objects with the fields of
``DilemmaPairSerializer``. Unknown fields survive a load/serialize round trip.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from core.errors import DuplicatePairError, SchemaError, VocabularyError

from .domain import (
    OPTION_LABELS,
    BiasType,
    ComplexityTier,
    Condition,
    Decision,
    DecisionChoice,
    Dilemma,
    DilemmaPair,
)
from .serializers import DilemmaPairSerializer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    invariant: str
    message: str

    def to_dict(self):
        return {"invariant": self.invariant, "message": self.message}


def load_dataset(path, strict=True):
    """Read every pair from ``path``.

    With ``strict`` (the default) a pair that breaks a DilemmaPair invariant
    raises SchemaError; otherwise such pairs are returned for reporting.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read dataset {path}: {exc}", path=str(path)) from exc
    if not isinstance(document, list):
        raise SchemaError("dataset must be a JSON array of pair objects", path=str(path))

    pairs = parse_records(document, strict=strict)
    logger.info("Loaded %d dilemma pairs from %s", len(pairs), path)
    return pairs


def parse_records(records, strict=True):
    pairs = []
    seen = set()
    for index, record in enumerate(records):
        pair = _parse_record(index, record)
        if pair.pair_id in seen:
            raise DuplicatePairError(f"duplicate pair_id {pair.pair_id!r}", pair_id=pair.pair_id, record=index)
        seen.add(pair.pair_id)

        if strict:
            violations = validate_pair(pair)
            if violations:
                raise SchemaError(
                    f"record {index} ({pair.pair_id}) violates the pair invariants",
                    record=index,
                    pair_id=pair.pair_id,
                    violations=[v.to_dict() for v in violations],
                )
        pairs.append(pair)
    return pairs


def _parse_record(index, record):
    if not isinstance(record, dict):
        raise SchemaError(f"record {index} is not an object", record=index)

    label = record.get("bias_type")
    if label is not None and label not in BiasType.values:
        raise VocabularyError(f"unknown bias type {label!r} in record {index}", label=label, record=index)

    serializer = DilemmaPairSerializer(data=record)
    if not serializer.is_valid():
        name = record.get("pair_id", f"#{index}")
        raise SchemaError(f"record {index} ({name}) is malformed", record=index, errors=serializer.errors)

    data = serializer.validated_data
    known = DilemmaPairSerializer.known_fields()
    bias = BiasType(data["bias_type"])
    pair_id = data["pair_id"]
    return DilemmaPair(
        pair_id=pair_id,
        bias_type=bias,
        unbiased=Dilemma(f"{pair_id}:unbiased", bias, Condition.UNBIASED, data["unbiased_text"]),
        biased=Dilemma(f"{pair_id}:biased", bias, Condition.BIASED, data["biased_text"]),
        shared_axioms=data["shared_axioms"],
        unbiased_program=data["unbiased_program"],
        biased_program=data["biased_program"],
        expected_decision=Decision(DecisionChoice(data["expected_decision"])),
        inference_steps=data.get("inference_steps"),
        tier=ComplexityTier(data["tier"]) if data.get("tier") else None,
        extras={key: value for key, value in record.items() if key not in known},
    )


def validate_pair(pair):
    """Return one Violation per broken DilemmaPair invariant (empty when sound)."""
    violations = []
    if pair.unbiased.condition != Condition.UNBIASED:
        violations.append(Violation("condition", "unbiased variant is not marked unbiased"))
    if pair.biased.condition != Condition.BIASED:
        violations.append(Violation("condition", "biased variant is not marked biased"))

    for dilemma in (pair.unbiased, pair.biased):
        if dilemma.bias_type != pair.bias_type:
            violations.append(
                Violation(
                    "bias_type", f"{dilemma.condition} variant has bias {dilemma.bias_type}, pair has {pair.bias_type}"
                )
            )
        if not dilemma.text.strip():
            violations.append(Violation("text", f"{dilemma.condition} text is empty"))
            continue
        if tuple(dilemma.option_labels) != OPTION_LABELS:
            violations.append(Violation("option_labels", f"{dilemma.condition} option labels must be {OPTION_LABELS}"))
        for label in OPTION_LABELS:
            if label not in dilemma.text:
                violations.append(Violation("option_label", f"{dilemma.condition} text omits {label!r}"))

    if not pair.expected_decision.is_valid:
        violations.append(Violation("expected_decision", "expected decision must be option_a or option_b"))
    return violations


def serialize_pair(pair):
    record = {
        "pair_id": pair.pair_id,
        "bias_type": str(pair.bias_type),
        "expected_decision": str(pair.expected_decision.choice),
        "unbiased_text": pair.unbiased.text,
        "biased_text": pair.biased.text,
        "shared_axioms": pair.shared_axioms,
        "unbiased_program": pair.unbiased_program,
        "biased_program": pair.biased_program,
    }
    if pair.inference_steps is not None:
        record["inference_steps"] = pair.inference_steps
    if pair.tier is not None:
        record["tier"] = str(pair.tier)
    record.update(pair.extras)
    return record


def serialize_dataset(pairs):
    return [serialize_pair(pair) for pair in pairs]


def dump_dataset(pairs, path):
    Path(path).write_text(json.dumps(serialize_dataset(pairs), indent=2, ensure_ascii=False), encoding="utf-8")
