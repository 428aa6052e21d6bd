"""Canonical JSON encoding and the timed reply envelope both services return."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable


def dumps(obj) -> bytes:
    """Compact, deterministic JSON bytes. Record size limits are measured on this."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def loads(data: bytes | str):
    return json.loads(data)


def now_ns() -> int:
    return time.perf_counter_ns()


def ns_to_us(ns: int) -> int:
    return ns // 1000


@dataclass
class Reply:
    """A service response: encoded body plus the server-internal processing time.

    ``server_us`` always equals ``store_us + mapping_us`` for the collection
    service; the registry reports everything as store time.
    """

    body: bytes
    server_us: int
    store_us: int = 0
    mapping_us: int = 0
    decoder: Callable[[bytes], Any] | None = field(default=None, repr=False)

    @property
    def value(self):
        data = loads(self.body)
        return self.decoder(data) if self.decoder else data
