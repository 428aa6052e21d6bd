"""Miniature Collection API service: collections, members and three query granularities.

Every query is accounted in two stages, mirroring a store-plus-mapping-layer
architecture: the store stage (record fetches) and the mapping stage
(converting stored records into API descriptors). Optional synthetic delays
per stage let the harness emulate a slower backing stack.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Mapping
from urllib.parse import quote, unquote, urlsplit

from . import wire
from .errors import (
    DuplicateId,
    DuplicateMemberId,
    MalformedRecord,
    MaxLengthExceeded,
    UnknownCollection,
    UnknownMember,
    UnknownMemberRef,
    UnsupportedOperation,
)
from .model import Pid, ProvenanceBlock
from .store import KeyExists, KVStore

NS_COLLECTION = "collection"
NS_MEMBER = "member"

COLLECTIONS_PATH = "/collections"

OPS = ("get_collection", "get_member", "get_all_members", "create_collection", "add_member")


@dataclass(frozen=True)
class Capabilities:
    is_ordered: bool = True
    appends_only: bool = True
    max_length: int | None = None


@dataclass(frozen=True)
class Properties:
    description: str = ""
    model_kind: str = "provenance-collection"


@dataclass(frozen=True)
class CollectionDescriptor:
    id: str
    pid: Pid
    capabilities: Capabilities = Capabilities()
    properties: Properties = Properties()
    membership: tuple[str, ...] = ()
    provenance: ProvenanceBlock | None = None

    def to_wire(self) -> dict:
        d = {
            "id": self.id,
            "pid": str(self.pid),
            "capabilities": {
                "isOrdered": self.capabilities.is_ordered,
                "appendsOnly": self.capabilities.appends_only,
                "maxLength": self.capabilities.max_length,
            },
            "properties": {
                "description": self.properties.description,
                "modelType": self.properties.model_kind,
            },
            "membership": list(self.membership),
        }
        if self.provenance is not None:
            d["provenance"] = self.provenance.to_wire()
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "CollectionDescriptor":
        try:
            caps = d.get("capabilities", {})
            props = d.get("properties", {})
            prov = d.get("provenance")
            return cls(
                id=str(d["id"]),
                pid=Pid.parse(d["pid"]),
                capabilities=Capabilities(
                    bool(caps.get("isOrdered", True)),
                    bool(caps.get("appendsOnly", True)),
                    caps.get("maxLength"),
                ),
                properties=Properties(props.get("description", ""), props.get("modelType", "")),
                membership=tuple(d.get("membership", ())),
                provenance=ProvenanceBlock.from_wire(prov) if prov is not None else None,
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedRecord(f"bad collection descriptor: {exc}") from exc


@dataclass(frozen=True)
class MemberDescriptor:
    id: str
    pid: Pid
    location: str
    description: str = ""
    data_type: str = "application/octet-stream"
    ontology: str | None = None
    provenance: ProvenanceBlock | None = None

    def to_wire(self) -> dict:
        d = {
            "id": self.id,
            "pid": str(self.pid),
            "location": self.location,
            "description": self.description,
            "datatype": self.data_type,
        }
        if self.ontology is not None:
            d["ontology"] = self.ontology
        if self.provenance is not None:
            d["provenance"] = self.provenance.to_wire()
        return d

    @classmethod
    def from_wire(cls, d: dict) -> "MemberDescriptor":
        try:
            prov = d.get("provenance")
            return cls(
                id=str(d["id"]),
                pid=Pid.parse(d["pid"]),
                location=d["location"],
                description=d.get("description", ""),
                data_type=d.get("datatype", ""),
                ontology=d.get("ontology"),
                provenance=ProvenanceBlock.from_wire(prov) if prov is not None else None,
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedRecord(f"bad member descriptor: {exc}") from exc


def _decode_members(d) -> list[MemberDescriptor]:
    return [MemberDescriptor.from_wire(m) for m in d["contents"]]


def _decode_ack(d) -> str:
    return d["id"]


class CollectionUrls:
    """Builds and parses collection-service references under one base URL."""

    def __init__(self, base: str):
        self.base = base.rstrip("/")

    def collection(self, cid: str) -> str:
        return f"{self.base}{COLLECTIONS_PATH}/{quote(cid, safe='')}"

    def members(self, cid: str) -> str:
        return self.collection(cid) + "/members"

    def member(self, cid: str, mid: str) -> str:
        return self.members(cid) + "/" + quote(mid, safe="")


def parse_collection_path(path: str) -> tuple[str, str | None, str | None] | None:
    """Split a ``/collections/...`` path into ``(kind, cid, mid)``.

    ``kind`` is ``collections`` (the bare listing root), ``collection``,
    ``members`` or ``member``; returns ``None`` for anything else.
    """
    if not path.startswith(COLLECTIONS_PATH):
        return None
    rest = path[len(COLLECTIONS_PATH):]
    if rest in ("", "/"):
        return ("collections", None, None)
    if not rest.startswith("/"):
        return None
    parts = rest[1:].split("/")
    if parts and parts[-1] == "":
        parts.pop()
    if len(parts) == 1 and parts[0]:
        return ("collection", unquote(parts[0]), None)
    if len(parts) == 2 and parts[0] and parts[1] == "members":
        return ("members", unquote(parts[0]), None)
    if len(parts) == 3 and parts[0] and parts[1] == "members" and parts[2]:
        return ("member", unquote(parts[0]), unquote(parts[2]))
    return None


def parse_collection_url(url: str):
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        return None
    return parse_collection_path(parts.path)


@dataclass(frozen=True)
class Delay:
    mean_ms: float = 0.0
    jitter_ms: float = 0.0


@dataclass
class StageDelays:
    """Synthetic sleep per (operation, stage); absent operations cost nothing extra."""

    store: Mapping[str, Delay] = field(default_factory=dict)
    mapping: Mapping[str, Delay] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self._rng = random.Random(self.seed)
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, cfg: Mapping | None, scale: float = 1.0, seed: int = 0) -> "StageDelays":
        """Build from ``{op: {"store": [mean, jitter], "mapping": [mean, jitter]}}`` in ms."""
        store, mapping = {}, {}
        for op, stages in (cfg or {}).items():
            if op not in OPS:
                raise ValueError(f"unknown collection-service operation {op!r}")
            for name, target in (("store", store), ("mapping", mapping)):
                if name in stages:
                    mean, jitter = stages[name]
                    target[op] = Delay(mean * scale, jitter * scale)
        return cls(store, mapping, seed)

    def _draw(self, table, op) -> float:
        d = table.get(op)
        if d is None or d.mean_ms <= 0:
            return 0.0
        with self._lock:
            u = self._rng.uniform(-d.jitter_ms, d.jitter_ms)
        return max(0.0, d.mean_ms + u) / 1000.0

    def store_delay(self, op: str) -> float:
        return self._draw(self.store, op)

    def mapping_delay(self, op: str) -> float:
        return self._draw(self.mapping, op)


class _Stages:
    """Accumulates store-stage and mapping-stage time for one request."""

    def __init__(self, delays: StageDelays | None, op: str):
        self.delays = delays
        self.op = op
        self.store_ns = 0
        self.mapping_ns = 0
        self._t = 0

    def begin(self):
        self._t = wire.now_ns()

    def end_store(self):
        if self.delays:
            extra = self.delays.store_delay(self.op)
            if extra:
                time.sleep(extra)
        now = wire.now_ns()
        self.store_ns += now - self._t
        self._t = now

    def end_mapping(self):
        if self.delays:
            extra = self.delays.mapping_delay(self.op)
            if extra:
                time.sleep(extra)
        now = wire.now_ns()
        self.mapping_ns += now - self._t
        self._t = now

    def reply(self, body: bytes, decoder=None) -> wire.Reply:
        s, m = wire.ns_to_us(self.store_ns), wire.ns_to_us(self.mapping_ns)
        return wire.Reply(body, s + m, store_us=s, mapping_us=m, decoder=decoder)


class CollectionService:
    def __init__(
        self,
        store: KVStore | None = None,
        delays: StageDelays | None = None,
        strict: bool = True,
    ):
        self.store = store if store is not None else KVStore()
        self.delays = delays
        self.strict = strict
        self._write = threading.Lock()

    # -- helpers -------------------------------------------------------------
    def _collection(self, cid: str) -> CollectionDescriptor:
        raw = self.store.get(NS_COLLECTION, cid)
        if raw is None:
            raise UnknownCollection(f"collection {cid!r} does not exist")
        return CollectionDescriptor.from_wire(wire.loads(raw))

    def _member(self, mid: str) -> MemberDescriptor | None:
        raw = self.store.get(NS_MEMBER, mid)
        return None if raw is None else MemberDescriptor.from_wire(wire.loads(raw))

    # -- writes --------------------------------------------------------------
    def create_collection(self, c: CollectionDescriptor) -> wire.Reply:
        st = _Stages(self.delays, "create_collection")
        st.begin()
        with self._write:
            if self.strict:
                for mid in c.membership:
                    if (NS_MEMBER, mid) not in self.store:
                        raise UnknownMemberRef(f"collection {c.id!r} lists unknown member {mid!r}")
            if len(set(c.membership)) != len(c.membership):
                raise MalformedRecord(f"collection {c.id!r} lists a member twice")
            try:
                self.store.put_new(NS_COLLECTION, c.id, wire.dumps(c.to_wire()))
            except KeyExists:
                raise DuplicateId(f"collection {c.id!r} already exists") from None
        st.end_store()
        body = wire.dumps({"id": c.id})
        st.end_mapping()
        return st.reply(body, _decode_ack)

    def add_member(self, collection_id: str, m: MemberDescriptor) -> wire.Reply:
        st = _Stages(self.delays, "add_member")
        st.begin()
        with self._write:
            coll = self._collection(collection_id)
            if m.id in coll.membership:
                raise DuplicateMemberId(f"{m.id!r} is already a member of {collection_id!r}")
            max_len = coll.capabilities.max_length
            if max_len is not None and len(coll.membership) >= max_len:
                raise MaxLengthExceeded(f"collection {collection_id!r} is full ({max_len})")
            existing = self._member(m.id)
            if existing is None:
                self.store.put_new(NS_MEMBER, m.id, wire.dumps(m.to_wire()))
            elif existing != m:
                raise DuplicateMemberId(f"member id {m.id!r} is registered with different content")
            updated = replace(coll, membership=coll.membership + (m.id,))
            self.store.put(NS_COLLECTION, collection_id, wire.dumps(updated.to_wire()))
        st.end_store()
        body = wire.dumps({"id": m.id})
        st.end_mapping()
        return st.reply(body, _decode_ack)

    def remove_member(self, collection_id: str, member_id: str) -> None:
        with self._write:
            coll = self._collection(collection_id)
            if coll.capabilities.appends_only:
                raise UnsupportedOperation(f"collection {collection_id!r} is append-only")
            if member_id not in coll.membership:
                raise UnknownMember(f"{member_id!r} is not a member of {collection_id!r}")
            membership = tuple(x for x in coll.membership if x != member_id)
            self.store.put(NS_COLLECTION, collection_id, wire.dumps(replace(coll, membership=membership).to_wire()))

    # -- queries -------------------------------------------------------------
    def get_collection(self, collection_id: str) -> wire.Reply:
        st = _Stages(self.delays, "get_collection")
        st.begin()
        raw = self.store.get(NS_COLLECTION, collection_id)
        if raw is None:
            raise UnknownCollection(f"collection {collection_id!r} does not exist")
        st.end_store()
        body = wire.dumps(CollectionDescriptor.from_wire(wire.loads(raw)).to_wire())
        st.end_mapping()
        return st.reply(body, CollectionDescriptor.from_wire)

    def get_member(self, collection_id: str, member_id: str) -> wire.Reply:
        st = _Stages(self.delays, "get_member")
        st.begin()
        raw_c = self.store.get(NS_COLLECTION, collection_id)
        if raw_c is None:
            raise UnknownCollection(f"collection {collection_id!r} does not exist")
        membership = wire.loads(raw_c).get("membership", [])
        raw_m = self.store.get(NS_MEMBER, member_id) if member_id in membership else None
        if raw_m is None:
            raise UnknownMember(f"{member_id!r} is not a member of {collection_id!r}")
        st.end_store()
        body = wire.dumps(MemberDescriptor.from_wire(wire.loads(raw_m)).to_wire())
        st.end_mapping()
        return st.reply(body, MemberDescriptor.from_wire)

    def get_all_members(self, collection_id: str) -> wire.Reply:
        st = _Stages(self.delays, "get_all_members")
        st.begin()
        raw_c = self.store.get(NS_COLLECTION, collection_id)
        if raw_c is None:
            raise UnknownCollection(f"collection {collection_id!r} does not exist")
        raws = []
        for mid in wire.loads(raw_c).get("membership", []):
            raw_m = self.store.get(NS_MEMBER, mid)
            if raw_m is None:
                raise UnknownMember(f"membership of {collection_id!r} lists missing {mid!r}")
            raws.append(raw_m)
        st.end_store()
        contents = [MemberDescriptor.from_wire(wire.loads(r)).to_wire() for r in raws]
        body = wire.dumps({"contents": contents})
        st.end_mapping()
        return st.reply(body, _decode_members)

    # -- enumeration (not part of the query API) ------------------------------
    def collections(self) -> list[CollectionDescriptor]:
        return [CollectionDescriptor.from_wire(wire.loads(v)) for _, v in self.store.items(NS_COLLECTION)]

    def members(self) -> list[MemberDescriptor]:
        return [MemberDescriptor.from_wire(wire.loads(v)) for _, v in self.store.items(NS_MEMBER)]

    def collection_count(self) -> int:
        return self.store.count(NS_COLLECTION)

    def member_count(self) -> int:
        return self.store.count(NS_MEMBER)
