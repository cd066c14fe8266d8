"""Loopback verification service over HTTP with JSON bodies.

    POST /enroll  {"v": 1, "cred_id": ..., "uri": "tkey://enroll?..."}
    POST /verify  {"v": 1, "cred_id": ..., "otp": <26 base32 chars>, "client_time": <optional>}

Responses carry {"v": 1, "status": ..., "reason": ..., "t_accepted": ...}.
The server slot is floor(clock() / I) with I taken from the credential; the
clock is injectable so tests can drive virtual time. ``client_time`` is only
logged: accepting a client's idea of the time would let it widen the window.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional

from .encoding import base32_to_password, uri_to_enrollment
from .errors import (
    BadAlphabet, BadLength, DuplicateCredential, Malformed, TKeyError, UnknownCredential,
    UnsupportedAlg, UnsupportedVersion, VerificationError,
)
from .store import CredentialStore
from .verifier import SkewPolicy, Verifier

logger = logging.getLogger(__name__)

WIRE_VERSION = 1
MAX_BODY = 4096

STATUS_FOR_REASON = {
    "bad_password": HTTPStatus.UNAUTHORIZED,
    "unknown_credential": HTTPStatus.UNAUTHORIZED,
    "replay_or_stale": HTTPStatus.CONFLICT,
    "duplicate": HTTPStatus.CONFLICT,
    "expired": HTTPStatus.GONE,
    "malformed": HTTPStatus.BAD_REQUEST,
    "unsupported_version": HTTPStatus.BAD_REQUEST,
    "unsupported_alg": HTTPStatus.BAD_REQUEST,
}


class _Reject(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason


class TKeyService:
    """Transport-free request handling; the HTTP layer only moves JSON."""

    def __init__(self, verifier: Verifier, clock: Callable[[], float] = time.time):
        self.verifier = verifier
        self.clock = clock

    def handle(self, path: str, body: dict) -> tuple[int, dict]:
        try:
            if not isinstance(body, dict) or body.get("v") != WIRE_VERSION:
                raise _Reject("unsupported_version" if isinstance(body, dict) and "v" in body else "malformed")
            if path == "/enroll":
                return HTTPStatus.OK, self._enroll(body)
            if path == "/verify":
                return HTTPStatus.OK, self._verify(body)
            return HTTPStatus.NOT_FOUND, {"v": WIRE_VERSION, "status": "rejected", "reason": "not_found"}
        except _Reject as rej:
            return STATUS_FOR_REASON[rej.reason], {"v": WIRE_VERSION, "status": "rejected", "reason": rej.reason}

    @staticmethod
    def _cred_id(body: dict) -> str:
        cred_id = body.get("cred_id")
        if not isinstance(cred_id, str) or not 0 < len(cred_id) <= 128:
            raise _Reject("malformed", "cred_id")
        return cred_id

    def _enroll(self, body: dict) -> dict:
        cred_id = self._cred_id(body)
        try:
            payload = uri_to_enrollment(str(body.get("uri", "")))
            self.verifier.enroll(cred_id, payload, replace_existing=bool(body.get("replace", False)))
        except UnsupportedVersion:
            raise _Reject("unsupported_version")
        except UnsupportedAlg:
            raise _Reject("unsupported_alg")
        except Malformed:
            raise _Reject("malformed")
        except DuplicateCredential:
            raise _Reject("duplicate")
        return {"v": WIRE_VERSION, "status": "enrolled", "cred_id": cred_id, "t_init": payload.t_init}

    def _verify(self, body: dict) -> dict:
        cred_id = self._cred_id(body)
        otp = body.get("otp")
        if not isinstance(otp, str):
            raise _Reject("malformed", "otp")
        try:
            p = base32_to_password(otp)
        except (BadLength, BadAlphabet):
            raise _Reject("malformed")
        try:
            cred = self.verifier.get(cred_id)
        except UnknownCredential:
            raise _Reject("unknown_credential")
        t_server = cred.params.slot(self.clock())
        if "client_time" in body:
            logger.info("verify %s: client_time=%r server_slot=%d", cred_id, body["client_time"], t_server)
        try:
            accepted = self.verifier.verify(cred_id, p, t_server)
        except VerificationError as exc:
            raise _Reject(exc.reason)
        return {"v": WIRE_VERSION, "status": "accepted", "t_accepted": accepted.slot}


class _Handler(BaseHTTPRequestHandler):
    service: TKeyService  # set on the subclass built by make_server

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        if not 0 < length <= MAX_BODY:
            return self._send(HTTPStatus.BAD_REQUEST, {"v": WIRE_VERSION, "status": "rejected", "reason": "malformed"})
        try:
            body = json.loads(self.rfile.read(length))
        except ValueError:
            return self._send(HTTPStatus.BAD_REQUEST, {"v": WIRE_VERSION, "status": "rejected", "reason": "malformed"})
        try:
            status, resp = self.service.handle(self.path, body)
        except TKeyError:
            logger.exception("unhandled error")
            status, resp = HTTPStatus.BAD_REQUEST, {"v": WIRE_VERSION, "status": "rejected", "reason": "malformed"}
        self._send(status, resp)

    def _send(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        logger.debug("%s " + fmt, self.address_string(), *args)


def make_server(bind: tuple[str, int], store_path, policy: SkewPolicy = SkewPolicy(),
                clock: Callable[[], float] = time.time, store: Optional[CredentialStore] = None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server. Port 0 picks a free port."""
    store = store if store is not None else CredentialStore(store_path)
    service = TKeyService(Verifier(store, policy), clock)
    handler = type("TKeyHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer(bind, handler)
    server.daemon_threads = True
    server.tkey_service = service
    return server


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    th = threading.Thread(target=server.serve_forever, daemon=True)
    th.start()
    return th
