"""Local handle service analogue: stores and resolves PID kernel-information records."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import wire
from .errors import DuplicatePid, MalformedRecord, NotFound, RecordTooLarge
from .model import NON_MEMBERSHIP, NodeKind, Pid, ProvenanceBlock, Relation
from .store import KeyExists, KVStore

logger = logging.getLogger(__name__)

DEFAULT_SIZE_CAP = 4096
NAMESPACE = "handle"

T_KIND = "KI.kind"
T_CREATED = "KI.createdAt"
T_LOCATION = "KI.location"
T_MEMBERS = "KI.hadMemberRef"
T_PROV = "KI.prov."

_PROV_INDEX_BASE = 100


@dataclass(frozen=True)
class PidKernelRecord:
    """Kernel information kept in one handle record.

    ``provenance`` is ``None`` when the object's provenance is not kept in the
    record at all (the client must follow ``location``); an empty block means
    "kept here, and there is none".
    """

    pid: Pid
    object_kind: NodeKind
    location: str | None = None
    had_member_ref: str | None = None
    provenance: ProvenanceBlock | None = None
    created_at: int = 0

    def __post_init__(self):
        if self.provenance is not None and self.provenance.has_membership:
            raise MalformedRecord("membership never lives in PID kernel information")

    def to_wire(self) -> dict:
        values = [
            {"index": 1, "type": T_KIND, "data": self.object_kind.value},
            {"index": 2, "type": T_CREATED, "data": self.created_at},
        ]
        if self.location is not None:
            values.append({"index": 3, "type": T_LOCATION, "data": self.location})
        if self.had_member_ref is not None:
            values.append({"index": 4, "type": T_MEMBERS, "data": self.had_member_ref})
        if self.provenance is not None:
            # every kind is written, even when empty, so "kept here" survives the round trip
            for i, rel in enumerate(NON_MEMBERSHIP):
                values.append(
                    {"index": _PROV_INDEX_BASE + i, "type": T_PROV + rel.value,
                     "data": list(self.provenance.get(rel))}
                )
        return {"handle": str(self.pid), "values": values}

    def encode(self) -> bytes:
        return wire.dumps(self.to_wire())

    @classmethod
    def from_wire(cls, data: dict) -> "PidKernelRecord":
        try:
            pid = Pid.parse(data["handle"])
            values = data["values"]
        except (KeyError, TypeError) as exc:
            raise MalformedRecord(f"handle record missing field: {exc}") from exc
        kind = location = members = None
        created = 0
        prov: dict[Relation, list[str]] | None = None
        for v in values:
            vtype, vdata = v.get("type"), v.get("data")
            if vtype == T_KIND:
                try:
                    kind = NodeKind(vdata)
                except ValueError:
                    raise MalformedRecord(f"bad object kind {vdata!r}") from None
            elif vtype == T_CREATED:
                created = int(vdata)
            elif vtype == T_LOCATION:
                location = vdata
            elif vtype == T_MEMBERS:
                members = vdata
            elif isinstance(vtype, str) and vtype.startswith(T_PROV):
                rel = Relation.parse(vtype[len(T_PROV):])
                if rel is Relation.HAD_MEMBER:
                    raise MalformedRecord("membership never lives in PID kernel information")
                if not isinstance(vdata, list):
                    raise MalformedRecord(f"{vtype} must hold a list")
                prov = prov if prov is not None else {}
                prov[rel] = vdata
        if kind is None:
            raise MalformedRecord(f"record {pid} carries no {T_KIND}")
        block = ProvenanceBlock.of(prov) if prov is not None else None
        return cls(pid, kind, location, members, block, created)

    @classmethod
    def decode(cls, data: bytes) -> "PidKernelRecord":
        return cls.from_wire(wire.loads(data))


@dataclass(frozen=True)
class Ack:
    pid: Pid

    @classmethod
    def from_wire(cls, data: dict) -> "Ack":
        return cls(Pid.parse(data["handle"]))


def _decode_ack(d):
    return Ack.from_wire(d)


class PidRegistry:
    """Register/resolve PID kernel-information records in an embedded store.

    The reported server cost covers size checking, serialization and the store
    access, nothing else.
    """

    def __init__(self, store: KVStore | None = None, size_cap: int = DEFAULT_SIZE_CAP):
        self.store = store if store is not None else KVStore()
        self.size_cap = size_cap

    def register(self, record: PidKernelRecord) -> wire.Reply:
        t0 = wire.now_ns()
        body = record.encode()
        if len(body) > self.size_cap:
            raise RecordTooLarge(f"{record.pid}: {len(body)} bytes exceeds cap of {self.size_cap}")
        try:
            self.store.put_new(NAMESPACE, str(record.pid), body)
        except KeyExists:
            raise DuplicatePid(str(record.pid)) from None
        ack = wire.dumps({"handle": str(record.pid)})
        us = wire.ns_to_us(wire.now_ns() - t0)
        return wire.Reply(ack, us, store_us=us, decoder=_decode_ack)

    def resolve(self, pid: Pid | str) -> wire.Reply:
        t0 = wire.now_ns()
        if not isinstance(pid, Pid):
            pid = Pid.parse(pid)
        body = self.store.get(NAMESPACE, str(pid))
        if body is None:
            raise NotFound(f"handle {pid} is not registered")
        us = wire.ns_to_us(wire.now_ns() - t0)
        return wire.Reply(body, us, store_us=us, decoder=PidKernelRecord.from_wire)

    def __len__(self) -> int:
        return self.store.count(NAMESPACE)

    def records(self) -> list[PidKernelRecord]:
        return [PidKernelRecord.decode(v) for _, v in self.store.items(NAMESPACE)]
