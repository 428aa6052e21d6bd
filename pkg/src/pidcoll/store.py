"""Embedded ordered key-value store backed by one append-only JSON-lines file.

Values are opaque ``bytes`` (the services keep wire-encoded JSON). The file is
replayed on open; ``checkpoint`` appends everything written since the last
checkpoint. Writes go through a single lock, reads do not take it.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
from pathlib import Path

from .errors import StoreFailure

logger = logging.getLogger(__name__)


class KeyExists(Exception):
    pass


class KVStore:
    def __init__(self, path: str | os.PathLike | None = None, flush_every: int = 0):
        self.path = Path(path) if path is not None else None
        self.flush_every = flush_every
        self._data: dict[str, dict[str, bytes]] = {}
        self._pending: list[tuple[str, str, bytes]] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._replay()

    def _replay(self):
        n = 0
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    self._data.setdefault(row["ns"], {})[row["k"]] = base64.b64decode(row["v"])
                    n += 1
        except (OSError, ValueError, KeyError) as exc:
            raise StoreFailure(f"cannot replay {self.path}: {exc}") from exc
        logger.info("replayed %d records from %s", n, self.path)

    def put_new(self, ns: str, key: str, value: bytes) -> None:
        """Insert ``key``; raise :class:`KeyExists` if it is already present."""
        with self._lock:
            space = self._data.setdefault(ns, {})
            if key in space:
                raise KeyExists(key)
            space[key] = value
            self._log(ns, key, value)

    def put(self, ns: str, key: str, value: bytes) -> None:
        with self._lock:
            self._data.setdefault(ns, {})[key] = value
            self._log(ns, key, value)

    def _log(self, ns, key, value):
        if self.path is None:
            return
        self._pending.append((ns, key, value))
        if self.flush_every and len(self._pending) >= self.flush_every:
            self._flush_locked()

    def get(self, ns: str, key: str) -> bytes | None:
        return self._data.get(ns, {}).get(key)

    def __contains__(self, item: tuple[str, str]) -> bool:
        ns, key = item
        return key in self._data.get(ns, {})

    def keys(self, ns: str) -> list[str]:
        return list(self._data.get(ns, {}))

    def items(self, ns: str) -> list[tuple[str, bytes]]:
        return list(self._data.get(ns, {}).items())

    def count(self, ns: str) -> int:
        return len(self._data.get(ns, {}))

    def checkpoint(self) -> None:
        with self._lock:
            self._flush_locked()

    def _flush_locked(self):
        if self.path is None or not self._pending:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                for ns, key, value in self._pending:
                    row = {"ns": ns, "k": key, "v": base64.b64encode(value).decode("ascii")}
                    fh.write(json.dumps(row, separators=(",", ":")) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StoreFailure(f"cannot write {self.path}: {exc}") from exc
        self._pending.clear()
