"""Renderers that turn a pair's shared axioms into ProbeAX reasoning cues."""

import json
import logging
from pathlib import Path

from core.errors import SchemaError
from modules.horn.parser import parse_program

logger = logging.getLogger(__name__)


class ClauseListRenderer:
    """One pretty-printed clause per line, comments dropped."""

    name = "clauses"

    def __call__(self, pair):
        return str(parse_program(pair.shared_axioms))


class ParaphraseRenderer(ClauseListRenderer):
    """Replace clauses with natural-language sentences from a lookup table.

    Clauses missing from the table fall back to their printed form.
    """

    name = "paraphrase"

    def __init__(self, table):
        self.table = dict(table)

    @classmethod
    def from_file(cls, path):
        try:
            table = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read paraphrase table {path}: {exc}", path=str(path)) from exc
        if not isinstance(table, dict):
            raise SchemaError("paraphrase table must map clause text to a sentence", path=str(path))
        return cls(table)

    def __call__(self, pair):
        lines = []
        for clause in parse_program(pair.shared_axioms).clauses:
            printed = str(clause)
            if printed not in self.table:
                logger.debug("No paraphrase for %s", printed)
            lines.append(self.table.get(printed, printed))
        return "\n".join(lines)


def axiom_cues(pair, renderer=None):
    return (renderer or ClauseListRenderer())(pair)
