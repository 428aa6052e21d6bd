"""Per-request cost models and the seeded sampler that drives simulation mode."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .clients import RequestKind
from .errors import ConfigInvalid

DEFAULT_JITTER_FRACTION = 0.05


@dataclass(frozen=True)
class KindCost:
    server_ms: float = 0.0
    server_jitter_ms: float = 0.0
    comm_ms: float = 0.0
    comm_jitter_ms: float = 0.0

    def __post_init__(self):
        for mean, jitter, what in (
            (self.server_ms, self.server_jitter_ms, "server"),
            (self.comm_ms, self.comm_jitter_ms, "comm"),
        ):
            if mean < 0 or jitter < 0:
                raise ConfigInvalid(f"{what} mean and jitter must be non-negative")
            if jitter and jitter >= mean:
                raise ConfigInvalid(f"{what} jitter {jitter} must be below its mean {mean} (or zero)")


@dataclass(frozen=True)
class CostModel:
    costs: Mapping[RequestKind, KindCost] = field(default_factory=dict)

    def get(self, kind: RequestKind) -> KindCost:
        return self.costs.get(kind, _ZERO)

    @classmethod
    def zero(cls) -> "CostModel":
        return cls({})

    @classmethod
    def from_means(
        cls,
        server: Mapping[str, float],
        comm: Mapping[str, float] | None = None,
        jitter_fraction: float = DEFAULT_JITTER_FRACTION,
    ) -> "CostModel":
        comm = comm or {}
        costs = {}
        for name in set(server) | set(comm):
            kind = RequestKind(name)
            s, c = float(server.get(name, 0.0)), float(comm.get(name, 0.0))
            costs[kind] = KindCost(s, s * jitter_fraction, c, c * jitter_fraction)
        return cls(costs)


_ZERO = KindCost()


class CostSampler:
    """Seeded draws of (server_us, client_us) per request kind.

    Each draw is ``mean + U(-jitter, +jitter)`` for the server part and again
    for the communication part; client time is their sum, so client minus
    server is never negative.
    """

    def __init__(self, model: CostModel, seed: int = 0):
        self.model = model
        self._rng = random.Random(seed)

    def draw(self, kind: RequestKind) -> tuple[int, int]:
        c = self.model.get(kind)
        u1 = self._rng.uniform(-1.0, 1.0)
        u2 = self._rng.uniform(-1.0, 1.0)
        server = max(0, round(1000.0 * (c.server_ms + u1 * c.server_jitter_ms)))
        comm = max(0, round(1000.0 * (c.comm_ms + u2 * c.comm_jitter_ms)))
        return server, server + comm


def simulate_volumes(volumes: Mapping[RequestKind, int], model: CostModel, seed: int = 0) -> dict[RequestKind, int]:
    """Total simulated server time (µs) per kind for a given request mix."""
    sampler = CostSampler(model, seed)
    totals = {}
    for kind in sorted(volumes, key=lambda k: k.value):
        totals[kind] = sum(sampler.draw(kind)[0] for _ in range(volumes[kind]))
    return totals


class Calibration:
    """Means per (case, strategy) plus fallbacks, loaded from YAML."""

    def __init__(self, data: dict):
        for key in ("resolve", "defaults"):
            if key not in data:
                raise ConfigInvalid(f"calibration lacks '{key}' section")
        self.data = data

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Calibration":
        if path is None:
            text = resources.files("pidcoll").joinpath("data/calibration.yaml").read_text()
        else:
            text = Path(path).read_text()
        return cls(yaml.safe_load(text))

    def cell(self, case: str, strategy: str) -> dict:
        try:
            return self.data["resolve"][str(case)][str(strategy)]
        except KeyError:
            raise ConfigInvalid(f"no calibration for {case}/{strategy}") from None

    def model_for(self, case: str, strategy: str, jitter_fraction: float = DEFAULT_JITTER_FRACTION) -> CostModel:
        cell = self.cell(case, strategy)
        server = dict(self.data["defaults"]["server"])
        comm = dict(self.data["defaults"]["comm"])
        server.update(cell.get("server", {}))
        comm.update(cell.get("comm", {}))
        reg = self.data.get("registration", {})
        server.update(reg.get("server", {}))
        comm.update(reg.get("comm", {}))
        return CostModel.from_means(server, comm, jitter_fraction)

    def stage_delays(self) -> dict:
        return self.data.get("stage_delays", {})
