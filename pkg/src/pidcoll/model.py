"""Domain types: identifiers, backbone provenance and the ground-truth object graph."""

from __future__ import annotations

import enum
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import networkx as nx

from .errors import CycleDetected, InvalidGraph, MalformedPid, MalformedRecord

PID_SCHEME = "hdl:"

_PREFIX_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
_SUFFIX_RE = re.compile(r"^[^\s]+$")


class Relation(str, enum.Enum):
    WAS_DERIVED_FROM = "wasDerivedFrom"
    WAS_REVISION_OF = "wasRevisionOf"
    WAS_QUOTED_FROM = "wasQuotedFrom"
    HAS_PRIMARY_SOURCE = "hasPrimarySource"
    ALTERNATE_OF = "alternateOf"
    HAD_MEMBER = "hadMember"
    SPECIALIZATION_OF = "specializationOf"

    @classmethod
    def parse(cls, name: str) -> "Relation":
        """Accept canonical spellings plus the legacy misspellings seen in the wild."""
        try:
            return cls(_RELATION_ALIASES.get(name, name))
        except ValueError:
            raise MalformedRecord(f"unknown backbone relation {name!r}") from None

    @property
    def is_membership(self) -> bool:
        return self is Relation.HAD_MEMBER


_RELATION_ALIASES = {
    "wasDerviedFrom": "wasDerivedFrom",
    "wasQutoedFrom": "wasQuotedFrom",
    "hasMember": "hadMember",
}

# Fixed order; generators index into it and wire output follows it.
NON_MEMBERSHIP: tuple[Relation, ...] = (
    Relation.WAS_DERIVED_FROM,
    Relation.WAS_REVISION_OF,
    Relation.WAS_QUOTED_FROM,
    Relation.HAS_PRIMARY_SOURCE,
    Relation.ALTERNATE_OF,
    Relation.SPECIALIZATION_OF,
)
RELATION_ORDER: tuple[Relation, ...] = tuple(Relation)


class NodeKind(str, enum.Enum):
    COLLECTION = "collection"
    MEMBER = "member"


@dataclass(frozen=True, order=True)
class Pid:
    prefix: str
    suffix: str

    def __post_init__(self):
        if not self.prefix or not _PREFIX_RE.match(self.prefix):
            raise MalformedPid(f"bad naming-authority prefix {self.prefix!r}")
        if not self.suffix or not _SUFFIX_RE.match(self.suffix):
            raise MalformedPid(f"bad local name {self.suffix!r}")

    def __str__(self) -> str:
        return f"{self.prefix}/{self.suffix}"

    @property
    def ref(self) -> str:
        """Reference string used inside provenance blocks."""
        return PID_SCHEME + str(self)

    @classmethod
    def parse(cls, text: str) -> "Pid":
        """Parse ``prefix/suffix`` or ``hdl:prefix/suffix``."""
        if not isinstance(text, str):
            raise MalformedPid(f"pid must be a string, got {type(text).__name__}")
        if text.startswith(PID_SCHEME):
            text = text[len(PID_SCHEME):]
        prefix, sep, suffix = text.partition("/")
        if not sep:
            raise MalformedPid(f"pid {text!r} has no '/' separator")
        return cls(prefix, suffix)


def is_pid_ref(ref: str) -> bool:
    return ref.startswith(PID_SCHEME)


@dataclass(frozen=True)
class ProvenanceBlock:
    """Backbone provenance of one object: relation -> ordered target references.

    Absent relations and empty lists are equivalent; the canonical form drops them,
    so equality is by content.
    """

    entries: tuple[tuple[Relation, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        seen = set()
        for rel, targets in self.entries:
            if rel in seen:
                raise MalformedRecord(f"relation {rel.value} listed twice")
            seen.add(rel)
            if len(set(targets)) != len(targets):
                raise MalformedRecord(f"duplicate target under {rel.value}")

    @classmethod
    def of(cls, mapping: Mapping[Relation | str, Iterable[str]] | None = None) -> "ProvenanceBlock":
        if not mapping:
            return cls()
        collected = {}
        for key, targets in mapping.items():
            rel = key if isinstance(key, Relation) else Relation.parse(key)
            targets = tuple(targets)
            if rel in collected:
                raise MalformedRecord(f"relation {rel.value} listed twice")
            if targets:
                collected[rel] = targets
        return cls(tuple((rel, collected[rel]) for rel in RELATION_ORDER if rel in collected))

    def get(self, rel: Relation) -> tuple[str, ...]:
        for r, targets in self.entries:
            if r is rel:
                return targets
        return ()

    def items(self) -> Iterator[tuple[Relation, tuple[str, ...]]]:
        return iter(self.entries)

    def targets(self) -> Iterator[tuple[Relation, str]]:
        for rel, targets in self.entries:
            for t in targets:
                yield rel, t

    def __len__(self) -> int:
        return sum(len(t) for _, t in self.entries)

    @property
    def is_empty(self) -> bool:
        return not self.entries

    @property
    def has_membership(self) -> bool:
        return bool(self.get(Relation.HAD_MEMBER))

    def to_wire(self) -> dict[str, list[str]]:
        return {rel.value: list(targets) for rel, targets in self.entries}

    @classmethod
    def from_wire(cls, data) -> "ProvenanceBlock":
        if not isinstance(data, dict):
            raise MalformedRecord("provenance block must be a JSON object")
        for key, value in data.items():
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise MalformedRecord(f"provenance values for {key!r} must be a list of strings")
        return cls.of(data)


@dataclass(frozen=True)
class ObjectNode:
    pid: Pid
    kind: NodeKind
    timestamp: int


@dataclass(frozen=True)
class ProvenanceEdge:
    src: Pid
    relation: Relation
    dst: Pid

    def sort_key(self):
        return (str(self.src), RELATION_ORDER.index(self.relation), str(self.dst))

    def to_wire(self) -> dict:
        return {"src": str(self.src), "relation": self.relation.value, "dst": str(self.dst)}

    @classmethod
    def from_wire(cls, d: dict) -> "ProvenanceEdge":
        return cls(Pid.parse(d["src"]), Relation.parse(d["relation"]), Pid.parse(d["dst"]))


@dataclass(frozen=True)
class ObjectGraph:
    """Ground-truth DAG of digital objects.

    ``nodes`` and ``edges`` keep generation order so serialization is stable.
    """

    nodes: tuple[ObjectNode, ...] = ()
    edges: tuple[ProvenanceEdge, ...] = ()
    roots: tuple[Pid, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)
    _out: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "roots", tuple(self.roots))
        object.__setattr__(self, "_index", {n.pid: n for n in self.nodes})
        out = defaultdict(list)
        for e in self.edges:
            out[e.src].append(e)
        object.__setattr__(self, "_out", dict(out))

    def node(self, pid: Pid) -> ObjectNode:
        return self._index[pid]

    def __contains__(self, pid: Pid) -> bool:
        return pid in self._index

    def out_edges(self, pid: Pid) -> list[ProvenanceEdge]:
        return self._out.get(pid, [])

    def members_of(self, pid: Pid) -> list[Pid]:
        return [e.dst for e in self.out_edges(pid) if e.relation is Relation.HAD_MEMBER]

    def backbone_of(self, pid: Pid) -> list[ProvenanceEdge]:
        return [e for e in self.out_edges(pid) if e.relation is not Relation.HAD_MEMBER]

    @property
    def collections(self) -> list[ObjectNode]:
        return [n for n in self.nodes if n.kind is NodeKind.COLLECTION]

    @property
    def members(self) -> list[ObjectNode]:
        return [n for n in self.nodes if n.kind is NodeKind.MEMBER]

    @property
    def membership_edges(self) -> list[ProvenanceEdge]:
        return [e for e in self.edges if e.relation is Relation.HAD_MEMBER]

    @property
    def backbone_edges(self) -> list[ProvenanceEdge]:
        return [e for e in self.edges if e.relation is not Relation.HAD_MEMBER]

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"pid": str(n.pid), "kind": n.kind.value, "timestamp": n.timestamp} for n in self.nodes
            ],
            "edges": [e.to_wire() for e in self.edges],
            "roots": [str(p) for p in self.roots],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def from_json(cls, data: dict) -> "ObjectGraph":
        try:
            nodes = [
                ObjectNode(Pid.parse(n["pid"]), NodeKind(n["kind"]), int(n["timestamp"]))
                for n in data["nodes"]
            ]
            edges = [ProvenanceEdge.from_wire(e) for e in data["edges"]]
            roots = [Pid.parse(r) for r in data.get("roots", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidGraph(f"malformed graph document: {exc}") from exc
        return cls(tuple(nodes), tuple(edges), tuple(roots))

    @classmethod
    def loads(cls, text: str) -> "ObjectGraph":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class Violation:
    kind: str  # cycle | timeliness | dangling | membership-endpoint | self-loop | duplicate-node | ...
    subject: str
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]


def _edge_id(e: ProvenanceEdge) -> str:
    return f"({e.src}, {e.relation.value}, {e.dst})"


def validate_graph(g: ObjectGraph) -> ValidationReport:
    """Report every structural violation in ``g``; an empty report means valid."""
    report = ValidationReport()
    add = report.violations.append

    seen = {}
    for n in g.nodes:
        if n.pid in seen:
            add(Violation("duplicate-node", str(n.pid)))
        seen[n.pid] = n
        if n.timestamp < 0:
            add(Violation("negative-timestamp", str(n.pid), str(n.timestamp)))

    for r in g.roots:
        if r not in seen:
            add(Violation("dangling-root", str(r)))

    edge_seen = set()
    for e in g.edges:
        eid = _edge_id(e)
        if e in edge_seen:
            add(Violation("duplicate-edge", eid))
        edge_seen.add(e)
        if e.src == e.dst:
            add(Violation("self-loop", eid))
        src, dst = seen.get(e.src), seen.get(e.dst)
        if src is None or dst is None:
            missing = [str(p) for p, n in ((e.src, src), (e.dst, dst)) if n is None]
            add(Violation("dangling", eid, "unknown pid " + ", ".join(missing)))
            continue
        if e.relation is Relation.HAD_MEMBER:
            if src.kind is not NodeKind.COLLECTION or dst.kind is not NodeKind.MEMBER:
                add(Violation("membership-endpoint", eid, f"{src.kind.value} -> {dst.kind.value}"))
        elif e.src != e.dst and src.timestamp <= dst.timestamp:
            add(Violation("timeliness", eid, f"t(src)={src.timestamp} <= t(dst)={dst.timestamp}"))

    dg = nx.DiGraph()
    dg.add_edges_from((e.src, e.dst) for e in g.edges if e.src != e.dst)
    for scc in nx.strongly_connected_components(dg):
        if len(scc) > 1:
            members = sorted(str(p) for p in scc)
            inner = sorted(_edge_id(e) for e in g.edges if e.src in scc and e.dst in scc)
            add(Violation("cycle", ", ".join(members), "; ".join(inner)))
    return report


def topological_order(g: ObjectGraph) -> list[Pid]:
    """Order pids so that every edge's target precedes its source.

    Ties break on the serialized pid, so equal graphs give equal orders.
    """
    dg = nx.DiGraph()
    dg.add_nodes_from(n.pid for n in g.nodes)
    # reversed: dst -> src, so a plain topological sort puts dst first
    dg.add_edges_from((e.dst, e.src) for e in g.edges)
    try:
        return list(nx.lexicographical_topological_sort(dg, key=str))
    except nx.NetworkXUnfeasible:
        raise CycleDetected("graph contains a cycle") from None


def reachable(g: ObjectGraph, roots: Sequence[Pid] | None = None) -> set[Pid]:
    """Pids reachable from ``roots`` (default: the graph's roots) along any edge."""
    todo = list(g.roots if roots is None else roots)
    seen = set(p for p in todo if p in g)
    todo = list(seen)
    while todo:
        p = todo.pop()
        for e in g.out_edges(p):
            if e.dst not in seen and e.dst in g:
                seen.add(e.dst)
                todo.append(e.dst)
    return seen
