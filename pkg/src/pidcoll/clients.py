"""Client-side access to both services, in-process or over HTTP.

Every call returns an :class:`Exchange` carrying the decoded value and the two
durations the harness cares about: ``client_us`` (end to end, as the caller saw
it) and ``server_us`` (as the service reported it). Passing a
:class:`~pidcoll.costmodel.CostSampler` replaces both durations with draws from
a cost model, which is how simulation mode runs on a virtual clock.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Any
from urllib.parse import quote

import requests

from . import wire
from .collection_service import (
    COLLECTIONS_PATH,
    CollectionDescriptor,
    CollectionService,
    MemberDescriptor,
    _decode_members,
)
from .errors import PidcollError, ServiceUnreachable, error_from_name
from .model import Pid
from .registry import Ack, PidKernelRecord, PidRegistry

logger = logging.getLogger(__name__)

SERVER_COST_HEADER = "X-Server-Cost-Micros"
STORE_STAGE_HEADER = "X-Store-Stage-Micros"
MAPPING_STAGE_HEADER = "X-Mapping-Stage-Micros"


class RequestKind(str, enum.Enum):
    HANDLE = "Handle"
    COLLECTION = "Collection"
    MEMBER = "Member"
    MEMBERS = "Members"
    REGISTER_PID = "RegisterPid"
    CREATE_COLLECTION = "CreateCollection"
    ADD_MEMBER = "AddMember"


RESOLVE_KINDS = (RequestKind.HANDLE, RequestKind.COLLECTION, RequestKind.MEMBER, RequestKind.MEMBERS)
DEPOSIT_KINDS = (RequestKind.REGISTER_PID, RequestKind.CREATE_COLLECTION, RequestKind.ADD_MEMBER)


@dataclass
class Exchange:
    kind: RequestKind
    target: str
    value: Any
    client_us: int
    server_us: int
    bytes: int = 0
    store_us: int = 0
    mapping_us: int = 0


class _Timed:
    def __init__(self, sampler=None):
        self.sampler = sampler

    def _run(self, kind: RequestKind, target: str, call):
        t0 = wire.now_ns()
        try:
            reply = call()
            value = reply.value
        except PidcollError as exc:
            client_us = wire.ns_to_us(wire.now_ns() - t0)
            exc.exchange = self._finish(Exchange(kind, target, None, client_us, 0))
            raise
        client_us = wire.ns_to_us(wire.now_ns() - t0)
        ex = Exchange(kind, target, value, client_us, reply.server_us, len(reply.body),
                      reply.store_us, reply.mapping_us)
        return self._finish(ex)

    def _finish(self, ex: Exchange) -> Exchange:
        if self.sampler is not None:
            ex.server_us, ex.client_us = self.sampler.draw(ex.kind)
            ex.store_us = ex.mapping_us = 0
        return ex


def _coll_path(cid: str, *rest: str) -> str:
    return "/".join([COLLECTIONS_PATH, quote(cid, safe="")] + [quote(r, safe="") for r in rest])


class LocalRegistryClient(_Timed):
    def __init__(self, registry: PidRegistry, sampler=None):
        super().__init__(sampler)
        self.registry = registry

    def register(self, record: PidKernelRecord) -> Exchange:
        return self._run(RequestKind.REGISTER_PID, record.pid.ref, lambda: self.registry.register(record))

    def resolve(self, pid: Pid) -> Exchange:
        return self._run(RequestKind.HANDLE, pid.ref, lambda: self.registry.resolve(pid))


class LocalCollectionClient(_Timed):
    def __init__(self, service: CollectionService, sampler=None):
        super().__init__(sampler)
        self.service = service

    def create_collection(self, c: CollectionDescriptor) -> Exchange:
        return self._run(RequestKind.CREATE_COLLECTION, _coll_path(c.id), lambda: self.service.create_collection(c))

    def add_member(self, cid: str, m: MemberDescriptor) -> Exchange:
        return self._run(RequestKind.ADD_MEMBER, _coll_path(cid, "members", m.id),
                         lambda: self.service.add_member(cid, m))

    def get_collection(self, cid: str) -> Exchange:
        return self._run(RequestKind.COLLECTION, _coll_path(cid), lambda: self.service.get_collection(cid))

    def get_member(self, cid: str, mid: str) -> Exchange:
        return self._run(RequestKind.MEMBER, _coll_path(cid, "members", mid),
                         lambda: self.service.get_member(cid, mid))

    def get_all_members(self, cid: str) -> Exchange:
        return self._run(RequestKind.MEMBERS, _coll_path(cid, "members"),
                         lambda: self.service.get_all_members(cid))


class _HttpReply:
    """Adapter so HTTP responses flow through the same timing path as local replies."""

    def __init__(self, resp: requests.Response, decoder):
        self.body = resp.content
        h = resp.headers
        self.server_us = int(h.get(SERVER_COST_HEADER, 0))
        self.store_us = int(h.get(STORE_STAGE_HEADER, 0))
        self.mapping_us = int(h.get(MAPPING_STAGE_HEADER, 0))
        self._decoder = decoder

    @property
    def value(self):
        data = wire.loads(self.body)
        return self._decoder(data) if self._decoder else data


class _HttpBase(_Timed):
    def __init__(self, base_url: str, sampler=None, timeout: float = 30.0):
        super().__init__(sampler)
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.session = requests.Session()
        self.session.trust_env = False  # never route localhost through a proxy

    def _send(self, method: str, path: str, body=None, decoder=None) -> _HttpReply:
        url = self.base_url + path
        try:
            resp = self.session.request(
                method, url,
                data=wire.dumps(body) if body is not None else None,
                headers={"Content-Type": "application/json"} if body is not None else None,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ServiceUnreachable(f"{method} {url}: {exc}") from exc
        if resp.status_code >= 400:
            try:
                err = resp.json()
            except ValueError:
                raise PidcollError(f"{method} {url}: HTTP {resp.status_code}") from None
            raise error_from_name(err.get("error", ""), err.get("message", resp.text))
        return _HttpReply(resp, decoder)

    def close(self):
        self.session.close()


class HttpRegistryClient(_HttpBase):
    @staticmethod
    def _path(pid: Pid) -> str:
        return f"/api/handles/{quote(pid.prefix, safe='')}/{quote(pid.suffix, safe='')}"

    def register(self, record: PidKernelRecord) -> Exchange:
        return self._run(RequestKind.REGISTER_PID, record.pid.ref,
                         lambda: self._send("PUT", self._path(record.pid), record.to_wire(), Ack.from_wire))

    def resolve(self, pid: Pid) -> Exchange:
        return self._run(RequestKind.HANDLE, pid.ref,
                         lambda: self._send("GET", self._path(pid), None, PidKernelRecord.from_wire))


class HttpCollectionClient(_HttpBase):
    def create_collection(self, c: CollectionDescriptor) -> Exchange:
        return self._run(RequestKind.CREATE_COLLECTION, self.base_url + _coll_path(c.id),
                         lambda: self._send("POST", COLLECTIONS_PATH, c.to_wire(), lambda d: d["id"]))

    def add_member(self, cid: str, m: MemberDescriptor) -> Exchange:
        return self._run(RequestKind.ADD_MEMBER, self.base_url + _coll_path(cid, "members", m.id),
                         lambda: self._send("POST", _coll_path(cid, "members"), m.to_wire(), lambda d: d["id"]))

    def get_collection(self, cid: str) -> Exchange:
        path = _coll_path(cid)
        return self._run(RequestKind.COLLECTION, self.base_url + path,
                         lambda: self._send("GET", path, None, CollectionDescriptor.from_wire))

    def get_member(self, cid: str, mid: str) -> Exchange:
        path = _coll_path(cid, "members", mid)
        return self._run(RequestKind.MEMBER, self.base_url + path,
                         lambda: self._send("GET", path, None, MemberDescriptor.from_wire))

    def get_all_members(self, cid: str) -> Exchange:
        path = _coll_path(cid, "members")
        return self._run(RequestKind.MEMBERS, self.base_url + path,
                         lambda: self._send("GET", path, None, _decode_members))
