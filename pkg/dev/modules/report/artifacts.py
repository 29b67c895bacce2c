"""Write every sensitivity artifact for one trial archive."""

import json
import logging
from pathlib import Path

from modules.runner.sensitivity import Grouping, Pairing, aggregate_sensitivity, compute_sensitivity, validity_rates
from modules.stats.comparisons import FdrFamily, compare_strategies
from modules.strategies.specs import BASELINE_ID

from .builders import render_sensitivity_table, render_validity_table
from .export import ExportFormat, artifact_path, export_table

logger = logging.getLogger(__name__)

SENSITIVITY = "sensitivity"
STATISTICS = "statistics"


def write_sensitivity_report(
    records,
    out_dir,
    pairs_by_id=None,
    groupings=(Grouping.BIAS, Grouping.MODEL),
    baseline=BASELINE_ID,
    family=FdrFamily.TABLE,
    alpha=None,
    pairing=Pairing.RUN_INDEX,
    formats=(ExportFormat.CSV, ExportFormat.JSON),
):
    """Tables, test results and validity rates; returns the written paths in order."""
    sensitivities = compute_sensitivity(records, pairing)
    written = []
    for grouping in groupings:
        summaries = aggregate_sensitivity(sensitivities, grouping, pairs_by_id)
        results = compare_strategies(summaries, baseline, family=family, alpha=alpha)
        table = render_sensitivity_table(summaries, results, baseline)
        for fmt in formats:
            written.append(export_table(table, artifact_path(out_dir, SENSITIVITY, grouping, fmt), fmt))

        path = artifact_path(out_dir, STATISTICS, grouping, ExportFormat.JSON)
        payload = {
            "grouping": str(grouping),
            "baseline": baseline,
            "fdr_family": str(family),
            "pairing": str(pairing),
            "summaries": [s.to_dict() for s in summaries],
            "results": [r.to_dict() for r in results],
        }
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        written.append(path)
        logger.info("Wrote %s tables (%d tests)", grouping, len(results))

    validity = render_validity_table(validity_rates(sensitivities))
    for fmt in formats:
        written.append(export_table(validity, artifact_path(out_dir, "validity", "model", fmt), fmt))
    return [Path(p) for p in written]
