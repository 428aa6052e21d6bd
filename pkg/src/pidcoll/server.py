"""HTTP front ends for the registry and the collection service (stdlib ``http.server``)."""

from __future__ import annotations

import json
import logging
import signal
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote, urlsplit

from . import wire
from .clients import MAPPING_STAGE_HEADER, SERVER_COST_HEADER, STORE_STAGE_HEADER
from .collection_service import (
    CollectionDescriptor,
    CollectionService,
    MemberDescriptor,
    parse_collection_path,
)
from .errors import MalformedRecord, PidcollError
from .model import Pid
from .registry import PidKernelRecord, PidRegistry

logger = logging.getLogger(__name__)

HANDLES_PATH = "/api/handles/"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out in separate writes
    server_version = "pidcoll"

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes, reply: wire.Reply | None = None, elapsed_ns: int = 0):
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        if reply is not None:
            self.send_header(SERVER_COST_HEADER, str(reply.server_us))
            self.send_header(STORE_STAGE_HEADER, str(reply.store_us))
            self.send_header(MAPPING_STAGE_HEADER, str(reply.mapping_us))
        else:
            self.send_header(SERVER_COST_HEADER, str(wire.ns_to_us(elapsed_ns)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, name: str, message: str, elapsed_ns: int = 0):
        self._send(status, wire.dumps({"error": name, "message": message}), elapsed_ns=elapsed_ns)

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            return json.loads(raw)
        except ValueError:
            raise MalformedRecord("request body is not JSON") from None

    def _dispatch(self, method: str):
        t0 = wire.now_ns()
        try:
            result = self.route(method, urlsplit(self.path).path)
        except PidcollError as exc:
            self._error(exc.status, type(exc).__name__, str(exc), wire.now_ns() - t0)
            return
        except Exception as exc:  # keep the server alive on handler bugs
            logger.exception("unhandled error for %s %s", method, self.path)
            self._error(500, "PidcollError", str(exc), wire.now_ns() - t0)
            return
        if result is None:
            self._error(404, "NotFound", f"no route for {method} {self.path}")
            return
        status, reply = result
        self._send(status, reply.body, reply)

    def do_GET(self):
        self._dispatch("GET")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_POST(self):
        self._dispatch("POST")

    def route(self, method, path):
        raise NotImplementedError


def registry_handler(registry: PidRegistry):
    class RegistryHandler(_Handler):
        def route(self, method, path):
            if not path.startswith(HANDLES_PATH):
                return None
            prefix, sep, suffix = path[len(HANDLES_PATH):].partition("/")
            if not sep:
                return None
            pid = Pid(unquote(prefix), unquote(suffix))
            if method == "GET":
                return 200, registry.resolve(pid)
            if method == "PUT":
                record = PidKernelRecord.from_wire(self._body())
                if record.pid != pid:
                    raise MalformedRecord(f"body handle {record.pid} does not match path {pid}")
                return 201, registry.register(record)
            return None

    return RegistryHandler


def collection_handler(service: CollectionService):
    class CollectionHandler(_Handler):
        def route(self, method, path):
            parsed = parse_collection_path(path)
            if parsed is None:
                return None
            kind, cid, mid = parsed
            if method == "POST" and kind == "collections":
                return 201, service.create_collection(CollectionDescriptor.from_wire(self._body()))
            if method == "POST" and kind == "members":
                return 201, service.add_member(cid, MemberDescriptor.from_wire(self._body()))
            if method == "GET" and kind == "collection":
                return 200, service.get_collection(cid)
            if method == "GET" and kind == "members":
                return 200, service.get_all_members(cid)
            if method == "GET" and kind == "member":
                return 200, service.get_member(cid, mid)
            return None

    return CollectionHandler


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


class ServiceThread:
    """Run one HTTP service in a background thread; usable as a context manager."""

    def __init__(self, handler_cls, host: str = "127.0.0.1", port: int = 0):
        self.httpd = _Server((host, port), handler_cls)
        self.thread = threading.Thread(target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ServiceThread":
        self.thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        self.thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(handler_cls, host: str, port: int, on_stop=None):
    """Serve in the foreground until interrupted."""
    httpd = _Server((host, port), handler_cls)

    def _term(signum, frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, _term)
    logger.info("listening on http://%s:%d", host, httpd.server_address[1])
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
        if on_stop:
            on_stop()
