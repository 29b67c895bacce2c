"""Turn analysis results into report tables."""

import logging

from core.errors import RenderingError
from modules.dilemmas.domain import BiasType, ComplexityTier
from modules.strategies.specs import BASELINE_ID, PRESET_IDS

from .tables import Cell, CellUnit, HeatmapTable, RecordTable, normalize_rows

logger = logging.getLogger(__name__)


def _row_order(grouping, groups):
    known = {"bias": [str(b) for b in BiasType], "tier": [str(t) for t in ComplexityTier]}.get(grouping, [])
    return [g for g in known if g in groups] + sorted(set(groups) - set(known))


def _column_order(strategies, baseline):
    preset = [s for s in PRESET_IDS if s in strategies and s != baseline]
    return [baseline] + preset + sorted(set(strategies) - set(preset) - {baseline})


def render_sensitivity_table(summaries, stat_results, baseline=BASELINE_ID, title=""):
    """Mean per-pair sensitivity per (group, strategy), tested cells annotated.

    Rows are the groups of one grouping, columns the strategies with the
    baseline first.
    """
    summaries = list(summaries)
    if not summaries:
        raise RenderingError("no sensitivity summaries to render", title=title)
    grouping = summaries[0].grouping
    by_cell = {(s.group, s.strategy_id): s for s in summaries}
    stats = {(r.group, r.strategy_id): r for r in stat_results if r.grouping == grouping}
    rows = _row_order(grouping, {s.group for s in summaries})
    columns = _column_order({s.strategy_id for s in summaries}, baseline)

    cells = {}
    for row in rows:
        base = by_cell.get((row, baseline))
        cells[row] = {}
        for column in columns:
            summary = by_cell.get((row, column))
            value = 100 * summary.mean if summary is not None and not summary.empty else None
            if column == baseline or value is None or base is None or base.empty:
                cells[row][column] = Cell(value)
                continue
            stat = stats.get((row, column))
            if stat is None:
                raise RenderingError(f"no test result for cell {row} / {column}", row=row, column=column)
            cells[row][column] = Cell(value, r_rb=stat.r_rb, stars=stat.stars)

    return HeatmapTable(
        title=title or f"Sensitivity by {grouping}",
        row_labels=tuple(rows),
        column_labels=tuple(columns),
        cells=normalize_rows(cells, baseline=baseline),
        metadata={"grouping": grouping, "baseline": baseline, "z_score": "population standard deviation"},
    )


def render_lexicon_table(analysis, top_k=3, title="Lexicon rate ratios"):
    """Log rate ratios per (bias, feature) with the largest effects of each row marked."""
    if not analysis.effects:
        raise RenderingError("lexicon analysis has no effects", title=title)
    top = analysis.top_features(top_k)
    rows = _row_order("bias", {e.bias_type for e in analysis.effects})
    columns = list(dict.fromkeys(e.feature_id for e in analysis.effects))

    cells = {row: {column: Cell(None) for column in columns} for row in rows}
    for effect in analysis.effects:
        cells[effect.bias_type][effect.feature_id] = Cell(
            None if effect.degenerate else effect.log_rate_ratio,
            stars=effect.stars,
            marked=effect.feature_id in top.get(effect.bias_type, ()),
        )
    return HeatmapTable(
        title=title,
        row_labels=tuple(rows),
        column_labels=tuple(columns),
        cells=normalize_rows(cells, mark_best=False),
        unit=CellUnit.LOG_RATIO,
        metadata={**analysis.metadata, "top_k": top_k},
    )


def render_validity_table(validity):
    rows = tuple(v.to_dict() for v in validity)
    columns = ("model_id", "strategy_id", "paired_runs", "valid_paired_runs", "validity_rate")
    return RecordTable("Validity rates", columns, rows)


def render_open_ended_table(summaries, reductions):
    """Bar data: final sensitivity with its interval, coder agreement, and reductions."""
    columns = (
        "model_id",
        "strategy_id",
        "n",
        "sensitivity_percent",
        "lower_percent",
        "upper_percent",
        "percent_agreement",
        "kappa",
        "disagreements",
        "sided_coder_1",
        "sided_coder_2",
    )
    rows = tuple(
        {
            "model_id": s.model_id,
            "strategy_id": s.strategy_id,
            "n": s.n,
            "sensitivity_percent": 100 * s.sensitivity.point,
            "lower_percent": 100 * s.sensitivity.lower,
            "upper_percent": 100 * s.sensitivity.upper,
            "percent_agreement": s.agreement.percent_agreement,
            "kappa": s.agreement.kappa,
            "disagreements": s.disagreements,
            "sided_coder_1": s.sides["coder_1"],
            "sided_coder_2": s.sides["coder_2"],
        }
        for s in summaries
    )
    return RecordTable(
        "Open-ended sensitivity", columns, rows, metadata={"reductions": [r.to_dict() for r in reductions]}
    )


def render_prevalence_table(report):
    columns = ("bias_type", "count", "percent", "example", "aligned_percent")
    rows = tuple(row.to_dict() for row in report.rows)
    metadata = {key: value for key, value in report.to_dict().items() if key != "rows"}
    return RecordTable("Cue prevalence", columns, rows, metadata=metadata)
