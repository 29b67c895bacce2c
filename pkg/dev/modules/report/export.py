import csv
import json
from pathlib import Path

from django.db import models

from core.errors import SchemaError

from .tables import HeatmapTable, RecordTable, require_rows


class ExportFormat(models.TextChoices):
    CSV = "csv", "CSV"
    JSON = "json", "JSON"


def artifact_path(out_dir, artifact, grouping, fmt):
    return Path(out_dir) / f"{artifact}_{grouping}.{fmt}"


def _csv_rows(table):
    if isinstance(table, HeatmapTable):
        yield ["", *table.column_labels]
        for row in table.row_labels:
            yield [row, *(table.cell(row, column).text(table.unit) for column in table.column_labels)]
    else:
        yield list(table.columns)
        for record in table.rows:
            yield ["" if record.get(column) is None else record[column] for column in table.columns]


def export_table(table, path, fmt=ExportFormat.JSON):
    """Write one table; OSError propagates for unwritable paths."""
    require_rows(table)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == ExportFormat.CSV:
        with path.open("w", encoding="utf-8", newline="") as handle:
            csv.writer(handle, lineterminator="\n").writerows(_csv_rows(table))
    else:
        kind = "heatmap" if isinstance(table, HeatmapTable) else "records"
        payload = {"kind": kind, **table.to_dict()}
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_table(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read table {path}: {exc}", path=str(path)) from exc
    kind = data.pop("kind", "heatmap")
    return HeatmapTable.from_dict(data) if kind == "heatmap" else RecordTable.from_dict(data)
