"""Heatmap tables and flat record tables behind every report artifact."""

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from django.db import models

from core.errors import RenderingError


class CellUnit(models.TextChoices):
    PERCENT = "percent", "Percent"
    LOG_RATIO = "log_ratio", "Log rate ratio"


@dataclass(frozen=True)
class Cell:
    value: float | None
    r_rb: float | None = None
    stars: str = ""
    z: float = 0.0
    best_in_row: bool = False
    marked: bool = False

    def text(self, unit=CellUnit.PERCENT):
        if self.value is None:
            return "n/a"
        if unit == CellUnit.LOG_RATIO:
            return f"{self.value:+.2f}{self.stars}"
        effect = f" (r={self.r_rb:.2f})" if self.r_rb is not None else ""
        return f"{self.value:.1f}%{effect}{self.stars}"


def row_z_scores(values):
    """Population z-scores of the defined values; an all-equal row scores 0 throughout."""
    present = np.array([v for v in values if v is not None], dtype=float)
    if present.size == 0:
        return [0.0 for _ in values]
    mean, spread = present.mean(), present.std(ddof=0)
    if np.isclose(spread, 0.0):
        return [0.0 for _ in values]
    return [0.0 if v is None else float((v - mean) / spread) for v in values]


@dataclass(frozen=True)
class HeatmapTable:
    title: str
    row_labels: tuple
    column_labels: tuple
    cells: dict
    unit: CellUnit = CellUnit.PERCENT
    metadata: dict = field(default_factory=dict)

    def cell(self, row, column):
        return self.cells[row][column]

    def to_dict(self):
        return {
            "title": self.title,
            "unit": str(self.unit),
            "row_labels": list(self.row_labels),
            "column_labels": list(self.column_labels),
            "cells": {row: {col: asdict(cell) for col, cell in cols.items()} for row, cols in self.cells.items()},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            title=data["title"],
            row_labels=tuple(data["row_labels"]),
            column_labels=tuple(data["column_labels"]),
            cells={row: {col: Cell(**cell) for col, cell in cols.items()} for row, cols in data["cells"].items()},
            unit=CellUnit(data["unit"]),
            metadata=data.get("metadata", {}),
        )


@dataclass(frozen=True)
class RecordTable:
    title: str
    columns: tuple
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "title": self.title,
            "columns": list(self.columns),
            "rows": [dict(r) for r in self.rows],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["title"], tuple(data["columns"]), tuple(data["rows"]), data.get("metadata", {}))


def normalize_rows(cells, baseline=None, mark_best=True):
    """Fill z-scores and the best-in-row flags of every row.

    Best means the lowest defined value outside the baseline column; ties
    are all marked.
    """
    normalized = {}
    for row, by_column in cells.items():
        columns = list(by_column)
        scores = row_z_scores([by_column[c].value for c in columns])
        candidates = [by_column[c].value for c in columns if c != baseline and by_column[c].value is not None]
        best = min(candidates) if candidates and mark_best else None
        normalized[row] = {
            column: replace(
                by_column[column],
                z=score,
                best_in_row=(
                    best is not None
                    and column != baseline
                    and by_column[column].value is not None
                    and bool(np.isclose(by_column[column].value, best))
                ),
            )
            for column, score in zip(columns, scores, strict=True)
        }
    return normalized


def require_rows(table):
    rows = table.row_labels if isinstance(table, HeatmapTable) else table.rows
    if not rows:
        raise RenderingError(f"table {table.title!r} has no rows", title=table.title)
