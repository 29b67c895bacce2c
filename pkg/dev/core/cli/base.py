import json
import sys
from pathlib import Path

from django.core.management.base import BaseCommand

from core.errors import BenchError


class BenchCommand(BaseCommand):
    """Management command that reports domain errors as JSON on stderr.

    Subclasses implement ``run`` instead of ``handle``; a BenchError or an
    I/O failure exits with status 1.
    """

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except BenchError as exc:
            self._fail(exc.as_dict())
        except OSError as exc:
            self._fail({"error": "io_error", "message": str(exc), "details": {"path": exc.filename}})

    def _fail(self, payload):
        self.stderr.write(json.dumps(payload, ensure_ascii=False, default=str))
        sys.exit(1)

    def run(self, *args, **options):
        raise NotImplementedError

    def emit(self, payload):
        self.stdout.write(json.dumps(payload, indent=2, ensure_ascii=False, default=str))

    @staticmethod
    def write_json(path, payload):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False, default=str) + "\n", encoding="utf-8")
        return path
