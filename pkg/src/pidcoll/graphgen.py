"""Seeded generators for the four synthetic graph cases.

Layout shared by every case: collection ``i`` is preceded in time by its own
members, so node ``i * (M + 1) + j`` is member ``j`` of collection ``i`` and
node ``i * (M + 1) + M`` is the collection itself. Every edge, membership
included, points from a later object to an earlier one, which makes every
generated graph acyclic by construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParams
from .model import NON_MEMBERSHIP, NodeKind, ObjectGraph, ObjectNode, Pid, ProvenanceEdge, Relation


class Case(str, enum.Enum):
    G1 = "G1"  # linear backbone among collections
    G2 = "G2"  # acyclic backbone among collections
    G3 = "G3"  # G2 plus member-to-member backbone
    G4 = "G4"  # backbone between any objects

    @classmethod
    def parse(cls, text) -> "Case":
        if isinstance(text, Case):
            return text
        try:
            return cls(str(text).upper())
        except ValueError:
            raise InvalidParams(f"unknown graph case {text!r}") from None


@dataclass(frozen=True)
class GenParams:
    case: Case
    num_collections: int
    members_per_collection: int = 4
    max_backbone_out_degree: int = 3
    edge_density: float = 0.05
    seed: int = 0
    num_roots: int | None = 1
    pid_prefix: str = "20.5000"
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "case", Case.parse(self.case))
        for name in ("num_collections", "members_per_collection", "max_backbone_out_degree"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise InvalidParams(f"{name} must be a positive integer, got {value!r}")
        if not 0.0 < float(self.edge_density) <= 1.0:
            raise InvalidParams(f"edge_density must be in (0, 1], got {self.edge_density!r}")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise InvalidParams("seed must fit in 64 bits")
        if self.num_roots is not None and self.num_roots < 1:
            raise InvalidParams("num_roots must be positive or None")
        if self.tag and not all(c.isalnum() or c in "-_." for c in self.tag):
            raise InvalidParams(f"tag {self.tag!r} may only hold [A-Za-z0-9._-]")

    def with_(self, **changes) -> "GenParams":
        return replace(self, **changes)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & (2**64 - 1))


def generate(p: GenParams) -> ObjectGraph:
    """Build the ground-truth graph for ``p``; identical params give identical graphs."""
    rng = _rng(p.seed)
    C, M, K = p.num_collections, p.members_per_collection, p.max_backbone_out_degree
    stride = M + 1
    tag = f"{p.tag}-" if p.tag else ""

    nodes: list[ObjectNode] = []
    for i in range(C):
        for j in range(M):
            pid = Pid(p.pid_prefix, f"{tag}c{i:05d}m{j}")
            nodes.append(ObjectNode(pid, NodeKind.MEMBER, i * stride + j))
        nodes.append(ObjectNode(Pid(p.pid_prefix, f"{tag}c{i:05d}"), NodeKind.COLLECTION, i * stride + M))

    def coll(i: int) -> ObjectNode:
        return nodes[i * stride + M]

    def label() -> Relation:
        return NON_MEMBERSHIP[int(rng.integers(len(NON_MEMBERSHIP)))]

    edges: list[ProvenanceEdge] = []
    for i in range(C):
        c = coll(i)
        for j in range(M):
            edges.append(ProvenanceEdge(c.pid, Relation.HAD_MEMBER, nodes[i * stride + j].pid))

    # collection-level backbone
    for i in range(1, C):
        src = coll(i)
        if p.case is Case.G1:
            edges.append(ProvenanceEdge(src.pid, label(), coll(i - 1).pid))
            continue
        k = min(int(rng.integers(1, K + 1)), i if p.case is not Case.G4 else i * stride)
        if p.case is Case.G4:
            # any earlier object except this collection's own members
            picks = rng.choice(i * stride, size=k, replace=False)
            targets = [nodes[int(t)] for t in np.sort(picks)]
        else:
            picks = rng.choice(i, size=k, replace=False)
            targets = [coll(int(t)) for t in np.sort(picks)]
        for t in targets:
            edges.append(ProvenanceEdge(src.pid, label(), t.pid))

    # member-level backbone
    if p.case in (Case.G3, Case.G4):
        for i in range(C):
            for j in range(M):
                src = nodes[i * stride + j]
                if p.case is Case.G3:
                    n_cand = i * M + j
                else:
                    n_cand = src.timestamp
                if n_cand == 0:
                    continue
                count = min(K, int(rng.binomial(n_cand, p.edge_density)))
                if count == 0:
                    continue
                picks = np.sort(rng.choice(n_cand, size=count, replace=False))
                for t in picks:
                    t = int(t)
                    if p.case is Case.G3:
                        dst = nodes[(t // M) * stride + t % M]
                    else:
                        dst = nodes[t]
                    edges.append(ProvenanceEdge(src.pid, label(), dst.pid))

    has_incoming = {e.dst for e in edges}
    sources = [n for n in nodes if n.pid not in has_incoming]
    sources.sort(key=lambda n: n.timestamp, reverse=True)
    if p.num_roots is not None:
        sources = sources[: p.num_roots]
    return ObjectGraph(tuple(nodes), tuple(edges), tuple(n.pid for n in sources))
