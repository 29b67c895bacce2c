"""Content-addressed on-disk response cache.

Layout: ``<cache_dir>/<key[:2]>/<key>.json``. Entries are written once via a
temporary file and ``os.replace``; an existing entry is never overwritten.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

from core.errors import DataError

logger = logging.getLogger(__name__)


def cache_key(model_id, bundle, sampling, run_index):
    payload = {
        "model_id": model_id,
        "system": bundle.system_instruction,
        "user": bundle.user_message,
        "phase": str(bundle.phase),
        "sampling": sampling.to_dict(),
        "run_index": run_index,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    def __init__(self, directory):
        self.directory = Path(directory)

    def path_for(self, key):
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key):
        path = self.path_for(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"corrupt cache entry {path}", key=key) from exc

    def put(self, key, entry):
        path = self.path_for(key)
        if path.exists():
            logger.debug("Cache entry %s already present, keeping it", key)
            return False
        path.parent.mkdir(parents=True, exist_ok=True)
        handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(handle, "w", encoding="utf-8") as stream:
                json.dump(entry, stream, sort_keys=True, ensure_ascii=False, indent=2)
            os.replace(temporary, path)
        except BaseException:
            Path(temporary).unlink(missing_ok=True)
            raise
        return True

    def __contains__(self, key):
        return self.path_for(key).exists()
