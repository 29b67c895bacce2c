"""Regex codebook and per-document feature counting.

Matching is case-insensitive. A feature's patterns are scanned together,
leftmost-longest and without overlaps. Empty matches never count. Tokens are maximal ``\\w`` runs.
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from django.db import models

from core.errors import DomainError, SchemaError

from .serializers import CodebookSerializer

TOKEN_PATTERN = r"\b\w+\b"
_TOKEN = re.compile(TOKEN_PATTERN)


class FeatureCategory(models.TextChoices):
    TOPICAL = "topical", "Topical"
    STANCE = "stance", "Stance"


@dataclass(frozen=True)
class Feature:
    feature_id: str
    display_name: str
    patterns: tuple
    category: FeatureCategory
    compiled: tuple = field(default=(), compare=False, repr=False)

    def _next_match(self, document, pos):
        best = None
        for regex in self.compiled:
            match = next((m for m in regex.finditer(document, pos) if m.end() > m.start()), None)
            if match and (best is None or (match.start(), -match.end()) < (best.start(), -best.end())):
                best = match
        return best

    def count(self, document):
        total, pos = 0, 0
        while (match := self._next_match(document, pos)) is not None:
            total += 1
            pos = match.end()
        return total


@dataclass(frozen=True)
class Codebook:
    features: tuple

    @property
    def feature_ids(self):
        return [feature.feature_id for feature in self.features]

    def to_dict(self):
        return {
            "features": [
                {
                    "feature_id": f.feature_id,
                    "display_name": f.display_name,
                    "patterns": list(f.patterns),
                    "category": str(f.category),
                }
                for f in self.features
            ]
        }


@dataclass(frozen=True)
class FeatureCounts:
    trial_key: tuple | None
    token_count: int
    counts: dict


def parse_codebook(data):
    serializer = CodebookSerializer(data=data)
    if not serializer.is_valid():
        raise SchemaError("codebook is malformed", errors=serializer.errors)
    features = tuple(
        Feature(
            feature_id=item["feature_id"],
            display_name=item["display_name"],
            patterns=tuple(item["patterns"]),
            category=FeatureCategory(item["category"]),
            compiled=tuple(re.compile(pattern, re.IGNORECASE) for pattern in item["patterns"]),
        )
        for item in serializer.validated_data["features"]
    )
    return Codebook(features)


def load_codebook(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read codebook {path}: {exc}", path=str(path)) from exc
    return parse_codebook(data)


def count_tokens(document):
    return len(_TOKEN.findall(document))


def count_features(codebook, document, trial_key=None):
    if not document or not document.strip():
        raise DomainError("cannot code an empty document", trial_key=trial_key)
    tokens = count_tokens(document)
    if tokens == 0:
        raise DomainError("document has no word tokens", trial_key=trial_key)
    counts = {feature.feature_id: feature.count(document) for feature in codebook.features}
    return FeatureCounts(trial_key, tokens, counts)
