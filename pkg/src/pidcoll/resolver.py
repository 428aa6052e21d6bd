"""Recursive provenance resolution across the registry and the collection service.

Starting from one or more root references, the resolver fetches each object,
reads its backbone provenance, records an edge per non-empty value and follows
every target. Which service to ask is decided from the reference itself
(``hdl:`` pids go to the registry, ``/collections`` URLs to the collection
service), and whether provenance lives in the pid record or in a descriptor is
discovered from the data. The resolver is never told the deposit strategy.

Two modes:

``dedup`` (default)
    Every object is expanded at most once. A collection that has already
    been fetched is not requested again. A member reference is requested
    once per distinct incoming edge, but a member that has already been
    expanded is not expanded again.
``naive``
    No memory at all: every arrival re-fetches and re-expands. ``max_depth``
    is mandatory and exceeding it raises :class:`DepthExceeded`.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

from .clients import Exchange, RequestKind
from .collection_service import CollectionDescriptor, MemberDescriptor, parse_collection_url
from .errors import DepthExceeded, NotFound, PidcollError, UnclassifiableReference
from .model import NodeKind, Pid, ProvenanceBlock, ProvenanceEdge, Relation, is_pid_ref
from .registry import PidKernelRecord

logger = logging.getLogger(__name__)


class RefKind(str, enum.Enum):
    PID = "pid"
    COLLECTION_URL = "collection_url"
    MEMBER_URL = "member_url"
    MEMBERS_URL = "members_url"


def classify(ref: str) -> RefKind:
    """Syntactic classification of a reference string."""
    if not isinstance(ref, str):
        raise UnclassifiableReference(f"reference must be a string, got {type(ref).__name__}")
    if is_pid_ref(ref):
        try:
            Pid.parse(ref)
        except PidcollError:
            raise UnclassifiableReference(f"malformed pid reference {ref!r}") from None
        return RefKind.PID
    parsed = parse_collection_url(ref)
    if parsed is None or parsed[0] == "collections":
        raise UnclassifiableReference(f"cannot classify reference {ref!r}")
    return {
        "collection": RefKind.COLLECTION_URL,
        "member": RefKind.MEMBER_URL,
        "members": RefKind.MEMBERS_URL,
    }[parsed[0]]


@dataclass(frozen=True)
class RequestTrace:
    seq: int
    kind: RequestKind
    target: str
    client_us: int
    server_us: int
    bytes: int
    ok: bool = True


@dataclass(frozen=True)
class DanglingRef:
    src: Pid | None
    relation: Relation | None
    ref: str
    reason: str


@dataclass
class ResolvedGraph:
    edges: set[ProvenanceEdge] = field(default_factory=set)
    visited: set[str] = field(default_factory=set)
    traces: list[RequestTrace] = field(default_factory=list)
    dangling: list[DanglingRef] = field(default_factory=list)
    expanded: set[Pid] = field(default_factory=set)

    def volumes(self) -> dict[RequestKind, int]:
        out = {k: 0 for k in (RequestKind.HANDLE, RequestKind.COLLECTION, RequestKind.MEMBER, RequestKind.MEMBERS)}
        for t in self.traces:
            out[t.kind] = out.get(t.kind, 0) + 1
        return out

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seq", "kind", "target", "client_us", "server_us", "bytes"])
            for t in self.traces:
                w.writerow([t.seq, t.kind.value, t.target, t.client_us, t.server_us, t.bytes])

    def edges_json(self) -> str:
        rows = [e.to_wire() for e in sorted(self.edges, key=ProvenanceEdge.sort_key)]
        return json.dumps({"edges": rows, "dangling": [d.ref for d in self.dangling]}, indent=1)


@dataclass(frozen=True)
class _Content:
    """What one fetched object tells us, whatever service it came from."""

    pid: Pid
    kind: NodeKind
    provenance: ProvenanceBlock | None
    members_ref: str | None
    location: str | None = None


def _from_record(r: PidKernelRecord) -> _Content:
    return _Content(r.pid, r.object_kind, r.provenance, r.had_member_ref, r.location)


def _from_collection(d: CollectionDescriptor, ref: str) -> _Content:
    members = ref.rstrip("/") + "/members" if d.membership else None
    return _Content(d.pid, NodeKind.COLLECTION, d.provenance, members)


def _from_member(d: MemberDescriptor) -> _Content:
    return _Content(d.pid, NodeKind.MEMBER, d.provenance, None, d.location)


@dataclass
class _Visit:
    ref: str
    src: Pid | None
    relation: Relation | None
    depth: int


@dataclass
class _Expand:
    content: _Content
    depth: int


class Resolver:
    def __init__(self, registry_client, collection_client):
        self.registry = registry_client
        self.collections = collection_client

    # -- request plumbing ------------------------------------------------------
    def _request(self, ref: str, out: ResolvedGraph):
        kind = classify(ref)
        try:
            if kind is RefKind.PID:
                ex = self.registry.resolve(Pid.parse(ref))
            else:
                _, cid, mid = parse_collection_url(ref)
                if kind is RefKind.COLLECTION_URL:
                    ex = self.collections.get_collection(cid)
                elif kind is RefKind.MEMBER_URL:
                    ex = self.collections.get_member(cid, mid)
                else:
                    ex = self.collections.get_all_members(cid)
        except NotFound as exc:
            self._trace(getattr(exc, "exchange", None), ref, out, ok=False)
            raise
        self._trace(ex, ref, out)
        out.visited.add(ref)
        return kind, ex.value

    def _trace(self, ex: Exchange | None, ref: str, out: ResolvedGraph, ok: bool = True):
        if ex is None:
            return
        out.traces.append(RequestTrace(len(out.traces), ex.kind, ref, ex.client_us, ex.server_us, ex.bytes, ok))

    def _fetch(self, ref: str, out: ResolvedGraph) -> _Content:
        kind, value = self._request(ref, out)
        if kind is RefKind.PID:
            content = _from_record(value)
            if content.provenance is None and content.location:
                # identity-only record: provenance lives where the record points
                kind2, value2 = self._request(content.location, out)
                if kind2 is RefKind.COLLECTION_URL:
                    return _from_collection(value2, content.location)
                if kind2 is RefKind.MEMBER_URL:
                    return _from_member(value2)
            return content
        if kind is RefKind.COLLECTION_URL:
            return _from_collection(value, ref)
        if kind is RefKind.MEMBER_URL:
            return _from_member(value)
        raise UnclassifiableReference(f"{ref!r} names a listing, not an object")

    # -- traversal -------------------------------------------------------------
    def resolve_provenance(
        self,
        roots: str | Sequence[str],
        mode: str = "dedup",
        max_depth: int | None = None,
    ) -> ResolvedGraph:
        if mode not in ("dedup", "naive"):
            raise ValueError(f"mode must be 'dedup' or 'naive', got {mode!r}")
        if mode == "naive" and max_depth is None:
            raise ValueError("naive mode needs max_depth")
        dedup = mode == "dedup"
        if isinstance(roots, str):
            roots = [roots]

        out = ResolvedGraph()
        known_collections: dict[str, Pid] = {}
        stack: list[_Visit | _Expand] = [_Visit(r, None, None, 0) for r in reversed(list(roots))]

        def link(src, rel, dst):
            if src is not None:
                out.edges.add(ProvenanceEdge(src, rel, dst))

        while stack:
            item = stack.pop()
            if max_depth is not None and item.depth > max_depth:
                raise DepthExceeded(f"depth {item.depth} exceeds max_depth={max_depth}", partial=out)

            if isinstance(item, _Visit):
                if dedup and item.ref in known_collections:
                    link(item.src, item.relation, known_collections[item.ref])
                    continue
                try:
                    content = self._fetch(item.ref, out)
                except NotFound as exc:
                    logger.debug("dangling reference %s: %s", item.ref, exc)
                    out.dangling.append(DanglingRef(item.src, item.relation, item.ref, str(exc)))
                    continue
                link(item.src, item.relation, content.pid)
                if content.kind is NodeKind.COLLECTION:
                    known_collections[item.ref] = content.pid
                    known_collections[content.pid.ref] = content.pid
                    if content.location:
                        known_collections[content.location] = content.pid
                stack.append(_Expand(content, item.depth))
                continue

            content = item.content
            if dedup and content.pid in out.expanded:
                continue
            out.expanded.add(content.pid)

            children: list[_Visit | _Expand] = []
            if content.members_ref:
                try:
                    _, listing = self._request(content.members_ref, out)
                except NotFound as exc:
                    out.dangling.append(DanglingRef(content.pid, Relation.HAD_MEMBER, content.members_ref, str(exc)))
                    listing = []
                for d in listing:
                    link(content.pid, Relation.HAD_MEMBER, d.pid)
                    if d.provenance is None:
                        # descriptor carries no provenance: the pid record does
                        children.append(_Visit(d.pid.ref, None, None, item.depth + 1))
                    else:
                        children.append(_Expand(_from_member(d), item.depth + 1))
            if content.provenance is not None:
                for rel, target in content.provenance.targets():
                    if rel is Relation.HAD_MEMBER:
                        continue
                    children.append(_Visit(target, content.pid, rel, item.depth + 1))
            stack.extend(reversed(children))
        return out
