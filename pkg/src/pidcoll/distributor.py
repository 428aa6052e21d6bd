"""Placement of backbone provenance across the registry and the collection service.

Three strategies:

* ``I1`` keeps all backbone provenance in PID kernel information; the
  collection service holds membership only.
* ``I2`` keeps collection-level provenance in PID kernel information and moves
  member-level provenance into member descriptors, still pointing at pids.
* ``I3`` keeps everything in collection/member descriptors, pointing at
  collection-service URLs; pid records carry identity and location only.

Membership always lives in the collection service.
"""

from __future__ import annotations

import csv
import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Union

import networkx as nx

from .clients import RequestKind
from .collection_service import (
    CollectionDescriptor,
    CollectionService,
    CollectionUrls,
    MemberDescriptor,
    Properties,
    parse_collection_url,
)
from .errors import DepositError, InvalidGraph, PidcollError
from .model import (
    NodeKind,
    ObjectGraph,
    Pid,
    ProvenanceBlock,
    ProvenanceEdge,
    Relation,
    is_pid_ref,
    validate_graph,
)
from .registry import PidKernelRecord, PidRegistry

DEFAULT_COLLECTION_BASE = "http://localhost:5000"


class Strategy(str, enum.Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"

    @classmethod
    def parse(cls, text) -> "Strategy":
        if isinstance(text, Strategy):
            return text
        try:
            return cls(str(text).upper())
        except ValueError:
            raise InvalidGraph(f"unknown strategy {text!r}") from None


@dataclass(frozen=True)
class RegisterPid:
    record: PidKernelRecord
    op = "register_pid"

    def to_wire(self):
        return {"op": self.op, "record": self.record.to_wire()}


@dataclass(frozen=True)
class CreateCollection:
    descriptor: CollectionDescriptor
    op = "create_collection"

    def to_wire(self):
        return {"op": self.op, "descriptor": self.descriptor.to_wire()}


@dataclass(frozen=True)
class AddMember:
    collection_id: str
    descriptor: MemberDescriptor
    op = "add_member"

    def to_wire(self):
        return {"op": self.op, "collection_id": self.collection_id, "descriptor": self.descriptor.to_wire()}


Action = Union[RegisterPid, CreateCollection, AddMember]


def _action_from_wire(d: dict) -> Action:
    op = d.get("op")
    if op == RegisterPid.op:
        return RegisterPid(PidKernelRecord.from_wire(d["record"]))
    if op == CreateCollection.op:
        return CreateCollection(CollectionDescriptor.from_wire(d["descriptor"]))
    if op == AddMember.op:
        return AddMember(d["collection_id"], MemberDescriptor.from_wire(d["descriptor"]))
    raise InvalidGraph(f"unknown plan action {op!r}")


@dataclass(frozen=True)
class DepositPlan:
    strategy: Strategy
    actions: tuple[Action, ...] = ()

    def __len__(self):
        return len(self.actions)

    def counts(self) -> Counter:
        return Counter(a.op for a in self.actions)

    def to_json(self) -> dict:
        return {"strategy": self.strategy.value, "actions": [a.to_wire() for a in self.actions]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def from_json(cls, d: dict) -> "DepositPlan":
        return cls(Strategy.parse(d["strategy"]), tuple(_action_from_wire(a) for a in d["actions"]))


def _home_collections(g: ObjectGraph) -> dict[Pid, Pid]:
    home = {}
    for c in sorted(g.collections, key=lambda n: (n.timestamp, str(n.pid))):
        for m in g.members_of(c.pid):
            home.setdefault(m, c.pid)
    orphans = [str(n.pid) for n in g.members if n.pid not in home]
    if orphans:
        raise InvalidGraph(f"members outside every collection cannot be deposited: {orphans[:5]}")
    return home


def plan(g: ObjectGraph, s: Strategy | str, collection_base: str = DEFAULT_COLLECTION_BASE) -> DepositPlan:
    """Compute the ordered registration actions that deposit ``g`` under strategy ``s``."""
    s = Strategy.parse(s)
    report = validate_graph(g)
    if not report.ok:
        first = report.violations[0]
        raise InvalidGraph(f"{len(report)} violation(s), first: {first.kind} {first.subject}")

    urls = CollectionUrls(collection_base)
    home = _home_collections(g)
    ids = {n.pid: n.pid.suffix for n in g.nodes}
    if len(set(ids.values())) != len(ids):
        raise InvalidGraph("two pids share a local name; collection-service ids would collide")

    def location(p: Pid) -> str:
        node = g.node(p)
        if node.kind is NodeKind.COLLECTION:
            return urls.collection(ids[p])
        return urls.member(ids[home[p]], ids[p])

    def ref(p: Pid) -> str:
        return location(p) if s is Strategy.I3 else p.ref

    def block(p: Pid) -> ProvenanceBlock:
        grouped: dict[Relation, list[str]] = {}
        for e in g.backbone_of(p):
            grouped.setdefault(e.relation, []).append(ref(e.dst))
        return ProvenanceBlock.of(grouped)

    def creates(target_ref: str) -> tuple:
        """Key of the action that makes ``target_ref`` resolvable."""
        if is_pid_ref(target_ref):
            return ("RP", Pid.parse(target_ref))
        kind, cid, mid = parse_collection_url(target_ref)
        if kind == "collection":
            return ("CC", by_id[cid])
        return ("AM", by_id[mid], by_id[cid])

    by_id = {v: k for k, v in ids.items()}
    actions: dict[tuple, Action] = {}
    deps = nx.DiGraph()

    def add(key, action, embedded_refs: Iterable[str] = (), after: Iterable[tuple] = ()):
        actions[key] = action
        deps.add_node(key)
        for r in embedded_refs:
            deps.add_edge(creates(r), key)
        for k in after:
            deps.add_edge(k, key)

    for n in g.nodes:
        p = n.pid
        prov = block(p)
        refs = [t for _, t in prov.targets()]
        if n.kind is NodeKind.COLLECTION:
            keep_in_pid = s in (Strategy.I1, Strategy.I2)
            desc = CollectionDescriptor(
                id=ids[p],
                pid=p,
                properties=Properties(description=f"collection {p}"),
                provenance=prov if s is Strategy.I3 else None,
            )
            add(("CC", p), CreateCollection(desc), refs if s is Strategy.I3 else ())
            record = PidKernelRecord(
                pid=p,
                object_kind=NodeKind.COLLECTION,
                location=location(p),
                had_member_ref=urls.members(ids[p]) if keep_in_pid else None,
                provenance=prov if keep_in_pid else None,
                created_at=n.timestamp,
            )
            add(("RP", p), RegisterPid(record), refs if keep_in_pid else (), after=[("CC", p)])
            for m in g.members_of(p):
                mnode = g.node(m)
                mprov = block(m)
                mrefs = [t for _, t in mprov.targets()]
                in_desc = s in (Strategy.I2, Strategy.I3)
                mdesc = MemberDescriptor(
                    id=ids[m],
                    pid=m,
                    location=location(m),
                    description=f"member {m}",
                    provenance=mprov if in_desc else None,
                )
                add(("AM", m, p), AddMember(ids[p], mdesc), mrefs if in_desc else (), after=[("CC", p)])
                if home[m] == p:
                    mrecord = PidKernelRecord(
                        pid=m,
                        object_kind=NodeKind.MEMBER,
                        location=location(m),
                        provenance=None if in_desc else mprov,
                        created_at=mnode.timestamp,
                    )
                    add(("RP", m), RegisterPid(mrecord), () if in_desc else mrefs, after=[("AM", m, p)])

    ts = {n.pid: n.timestamp for n in g.nodes}
    rank = {"CC": 0, "AM": 1, "RP": 2}

    def priority(key):
        return (ts[key[1]], rank[key[0]], str(key[1]), str(key[2]) if len(key) > 2 else "")

    try:
        order = list(nx.lexicographical_topological_sort(deps, key=priority))
    except nx.NetworkXUnfeasible:
        raise InvalidGraph(f"no dependency-respecting deposit order exists under {s.value}") from None
    return DepositPlan(s, tuple(actions[k] for k in order))


_KIND_OF_OP = {
    RegisterPid.op: RequestKind.REGISTER_PID,
    CreateCollection.op: RequestKind.CREATE_COLLECTION,
    AddMember.op: RequestKind.ADD_MEMBER,
}


@dataclass
class DepositRow:
    index: int
    kind: RequestKind
    target: str
    client_us: int
    server_us: int


@dataclass
class DepositReport:
    rows: list[DepositRow] = field(default_factory=list)

    def counts(self) -> Counter:
        return Counter(r.kind for r in self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "kind", "target", "client_us", "server_us"])
            for r in self.rows:
                w.writerow([r.index, r.kind.value, r.target, r.client_us, r.server_us])


def execute(p: DepositPlan, registry_client, collection_client) -> DepositReport:
    """Apply every action in order; the first failure halts with :class:`DepositError`."""
    report = DepositReport()
    for i, action in enumerate(p.actions):
        try:
            if isinstance(action, RegisterPid):
                ex = registry_client.register(action.record)
            elif isinstance(action, CreateCollection):
                ex = collection_client.create_collection(action.descriptor)
            else:
                ex = collection_client.add_member(action.collection_id, action.descriptor)
        except PidcollError as exc:
            err = DepositError(i, action, exc)
            err.report = report
            raise err from exc
        report.rows.append(DepositRow(i, _KIND_OF_OP[action.op], ex.target, ex.client_us, ex.server_us))
    return report


def decode_deposit(registry: PidRegistry, service: CollectionService) -> Counter:
    """Rebuild the edge multiset from what both stores actually hold."""
    collections = service.collections()
    members = service.members()
    coll_pid = {c.id: c.pid for c in collections}
    member_pid = {m.id: m.pid for m in members}

    def target(ref: str) -> Pid:
        if is_pid_ref(ref):
            return Pid.parse(ref)
        parsed = parse_collection_url(ref)
        if parsed is None:
            raise InvalidGraph(f"unresolvable stored reference {ref!r}")
        kind, cid, mid = parsed
        return coll_pid[cid] if kind == "collection" else member_pid[mid]

    edges: Counter = Counter()

    def take(src: Pid, prov: ProvenanceBlock | None):
        if prov is None:
            return
        for rel, t in prov.targets():
            edges[ProvenanceEdge(src, rel, target(t))] += 1

    for rec in registry.records():
        take(rec.pid, rec.provenance)
    for c in collections:
        take(c.pid, c.provenance)
        for mid in c.membership:
            edges[ProvenanceEdge(c.pid, Relation.HAD_MEMBER, member_pid[mid])] += 1
    for m in members:
        take(m.pid, m.provenance)
    return edges
