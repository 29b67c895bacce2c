"""Surface-form alignment of corpus cues with reference dilemma cues.

Candidates come from TF-IDF retrieval over cue spans of the same bias
type; the judge then decides whether any candidate shares the surface
form, and a reviewer validates the judge's proposals.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import cosine_similarity

from core.conf import bench_setting
from core.errors import DataError, ExtractionError, RequestError, SchemaError, TransportError, VocabularyError
from modules.dilemmas.domain import BiasType
from modules.stats.proportions import wilson_ci
from modules.strategies.prompts import PromptBundle
from modules.strategies.specs import Phase

from .extraction import parse_judge_json
from .judge_prompts import load_judge_prompts

logger = logging.getLogger(__name__)

TFIDF_OPTIONS = {
    "lowercase": True,
    "token_pattern": r"(?u)\b\w+\b",
    "ngram_range": (1, 1),
    "smooth_idf": True,
    "norm": "l2",
}
SKIPPED_NO_REFERENCES = "no reference cues of this bias type"


@dataclass(frozen=True)
class ReferenceCue:
    ref_id: str
    bias_type: BiasType
    span: str


def parse_references(items):
    if not isinstance(items, list):
        raise SchemaError("reference cues must be a JSON list")
    references, seen = [], set()
    for item in items:
        try:
            ref_id, label, span = item["ref_id"], item["bias_type"], item["span"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"reference cue is missing field {exc}") from exc
        if label not in BiasType.values:
            raise VocabularyError(f"unknown bias type {label!r} in reference {ref_id}", label=label)
        if ref_id in seen:
            raise SchemaError(f"duplicate reference id {ref_id}", ref_id=ref_id)
        seen.add(ref_id)
        references.append(ReferenceCue(ref_id, BiasType(label), span))
    return references


def load_references(path):
    try:
        return parse_references(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read reference cues {path}: {exc}", path=str(path)) from exc


@dataclass(frozen=True)
class AlignmentResult:
    prompt_id: str
    bias_type: BiasType
    cue_span: str
    candidates: tuple = ()
    proposed_match: bool = False
    reference_id: str | None = None
    matching_substrings: tuple = ()
    validated: bool | None = None
    skipped: str = ""
    failure: str = ""

    @property
    def aligned(self):
        return self.proposed_match and self.validated is True

    def to_dict(self):
        return {
            "prompt_id": self.prompt_id,
            "bias_type": str(self.bias_type),
            "cue_span": self.cue_span,
            "candidates": [{"ref_id": ref_id, "score": score} for ref_id, score in self.candidates],
            "proposed_match": self.proposed_match,
            "reference_id": self.reference_id,
            "matching_substrings": list(self.matching_substrings),
            "validated": self.validated,
            "skipped": self.skipped,
            "failure": self.failure,
        }


def rank_candidates(span, references, k=None):
    """Top-k references by cosine similarity of TF-IDF vectors, ties by id."""
    k = k or bench_setting("ALIGNMENT_TOP_K")
    if not references:
        return []
    vectorizer = TfidfVectorizer(**TFIDF_OPTIONS)
    try:
        matrix = vectorizer.fit_transform([span] + [ref.span for ref in references])
    except ValueError:
        # no token anywhere
        return [(ref.ref_id, 0.0) for ref in sorted(references, key=lambda ref: ref.ref_id)[:k]]
    scores = cosine_similarity(matrix[0:1], matrix[1:]).ravel()
    pairs = zip((ref.ref_id for ref in references), scores, strict=True)
    ranked = sorted(pairs, key=lambda item: (-round(item[1], 12), item[0]))
    return [(ref_id, float(score)) for ref_id, score in ranked[:k]]


def _judge_message(record, candidates, spans):
    lines = [f"Cue phrase: {record.cue_span}", "Reference phrases:"]
    lines.extend(f"- [{ref_id}] {spans[ref_id]}" for ref_id, _ in candidates)
    return "\n".join(lines)


def align_cues(records, references, gateway, endpoint, k=None, judge_prompts=None):
    """Alignment results for every cue-positive record, in record order."""
    k = k or bench_setting("ALIGNMENT_TOP_K")
    instruction = (judge_prompts or load_judge_prompts())["alignment"]
    spans = {ref.ref_id: ref.span for ref in references}
    by_bias = {}
    for ref in references:
        by_bias.setdefault(ref.bias_type, []).append(ref)

    results = []
    for record in records:
        if not record.positive:
            continue
        result = AlignmentResult(record.prompt_id, record.final_bias, record.cue_span)
        pool = by_bias.get(record.final_bias, [])
        if not pool:
            logger.warning("Skipping alignment of %s: %s", record.prompt_id, SKIPPED_NO_REFERENCES)
            results.append(replace(result, skipped=SKIPPED_NO_REFERENCES))
            continue

        candidates = rank_candidates(record.cue_span, pool, k)
        result = replace(result, candidates=tuple(candidates))
        bundle = PromptBundle(instruction, _judge_message(record, candidates, spans), Phase.JUDGE)
        try:
            payload = parse_judge_json(gateway.complete(endpoint, bundle, 0).text)
            if payload.get("match") is True:
                reference_id = payload.get("reference_id")
                if reference_id not in {ref_id for ref_id, _ in candidates}:
                    raise ExtractionError(f"judge matched {reference_id!r}, which is not a candidate")
                result = replace(
                    result,
                    proposed_match=True,
                    reference_id=reference_id,
                    matching_substrings=tuple(payload.get("matching_substrings") or ()),
                )
        except (ExtractionError, TransportError, RequestError) as exc:
            logger.info("Alignment judge failed for %s: %s", record.prompt_id, exc.message)
            result = replace(result, failure=exc.message)
        results.append(result)
    return results


def apply_validation(results, validations):
    """Record manual verdicts on the judge's proposed matches."""
    by_id = {result.prompt_id: result for result in results}
    unknown = sorted(set(validations) - set(by_id))
    if unknown:
        raise DataError(f"validation names {len(unknown)} unknown prompts", unknown=unknown)
    unproposed = sorted(pid for pid, verdict in validations.items() if verdict and not by_id[pid].proposed_match)
    if unproposed:
        raise DataError("only judge-proposed matches can be validated", prompts=unproposed)
    return [
        replace(result, validated=bool(validations[result.prompt_id])) if result.prompt_id in validations else result
        for result in results
    ]


@dataclass(frozen=True)
class AlignmentSummary:
    records: int
    proposed: int
    validated: int
    by_bias: dict = field(default_factory=dict)
    interval: object = None

    def to_dict(self):
        return {
            "records": self.records,
            "proposed": self.proposed,
            "validated": self.validated,
            "by_bias": self.by_bias,
            "interval": self.interval.to_dict() if self.interval else None,
            "tfidf": {key: list(value) if isinstance(value, tuple) else value for key, value in TFIDF_OPTIONS.items()},
        }


def summarize_alignment(results, confidence=0.95):
    """Per-bias aligned percentages over all cue-positive records of that bias."""
    by_bias = {}
    for bias in BiasType:
        subset = [result for result in results if result.bias_type == bias]
        if subset:
            aligned = sum(result.aligned for result in subset)
            by_bias[str(bias)] = {"records": len(subset), "aligned": aligned, "percent": 100 * aligned / len(subset)}
    validated = sum(result.aligned for result in results)
    return AlignmentSummary(
        records=len(results),
        proposed=sum(result.proposed_match for result in results),
        validated=validated,
        by_bias=by_bias,
        interval=wilson_ci(validated, len(results), confidence) if results else None,
    )
