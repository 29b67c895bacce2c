from dataclasses import dataclass, field

from core.errors import DomainError
from modules.dilemmas.domain import BiasType


@dataclass(frozen=True)
class PrevalenceRow:
    bias_type: BiasType
    count: int
    percent: float
    example: str = ""
    aligned_percent: float | None = None

    def to_dict(self):
        return {
            "bias_type": str(self.bias_type),
            "count": self.count,
            "percent": self.percent,
            "example": self.example,
            "aligned_percent": self.aligned_percent,
        }


@dataclass(frozen=True)
class PrevalenceReport:
    corpus_prompts: int
    coding_prompts: int
    positives: int
    rows: list = field(default_factory=list)
    alignment: object = None

    @property
    def percent_of_corpus(self):
        return 100 * self.positives / self.corpus_prompts

    @property
    def percent_of_coding(self):
        return 100 * self.positives / self.coding_prompts

    def row(self, bias_type):
        return next(row for row in self.rows if row.bias_type == bias_type)

    def to_dict(self):
        return {
            "corpus_prompts": self.corpus_prompts,
            "coding_prompts": self.coding_prompts,
            "positives": self.positives,
            "percent_of_corpus": self.percent_of_corpus,
            "percent_of_coding": self.percent_of_coding,
            "rows": [row.to_dict() for row in self.rows],
            "alignment": self.alignment.to_dict() if self.alignment else None,
        }


def prevalence(records, corpus_prompts, coding_prompts, alignment=None):
    """Cue prevalence over the coding-prompt denominator.

    Rows are sorted by count, most frequent first. ``alignment`` is an
    optional summary from ``summarize_alignment`` that fills the aligned
    percentage of each row.
    """
    if corpus_prompts <= 0 or coding_prompts <= 0:
        raise DomainError(
            "prevalence needs positive denominators", corpus_prompts=corpus_prompts, coding_prompts=coding_prompts
        )
    positives = [record for record in records if record.positive]
    if coding_prompts > corpus_prompts or len(positives) > coding_prompts:
        raise DomainError("denominators must nest", corpus_prompts=corpus_prompts, coding_prompts=coding_prompts)

    aligned = alignment.by_bias if alignment else {}
    rows = []
    for bias in BiasType:
        matching = sorted((r for r in positives if r.final_bias == bias), key=lambda r: r.prompt_id)
        if not matching:
            continue
        share = aligned.get(str(bias))
        rows.append(
            PrevalenceRow(
                bias_type=bias,
                count=len(matching),
                percent=100 * len(matching) / coding_prompts,
                example=matching[0].cue_span,
                aligned_percent=share["percent"] if share else None,
            )
        )
    rows.sort(key=lambda row: -row.count)
    return PrevalenceReport(
        corpus_prompts=corpus_prompts,
        coding_prompts=coding_prompts,
        positives=len(positives),
        rows=rows,
        alignment=alignment.interval if alignment else None,
    )
