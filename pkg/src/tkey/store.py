"""Append-only credential log.

Each record is one line ``<crc32 hex> <json>\\n``. A put is written, flushed and
fsynced before it returns, so a caller that reports success after ``put`` never
reports state that a restart would lose. On open the log is replayed; a torn
or corrupt tail (a crash mid-write) is cut off and everything before it kept.
When dead records outnumber live ones the log is rewritten to a temp file and
atomically renamed over the original.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import zlib
from pathlib import Path
from typing import Callable, Optional

from .verifier import VerifierCredential

logger = logging.getLogger(__name__)


class CrashInjected(BaseException):
    """Raised by fault hooks to imitate the process dying at a given point."""


def _frame(rec: dict) -> bytes:
    body = json.dumps(rec, sort_keys=True, separators=(",", ":")).encode()
    return b"%08x " % zlib.crc32(body) + body + b"\n"


def _unframe(line: bytes) -> Optional[dict]:
    if not line.endswith(b"\n") or len(line) < 10 or line[8:9] != b" ":
        return None
    body = line[9:-1]
    try:
        if int(line[:8], 16) != zlib.crc32(body):
            return None
        return json.loads(body)
    except ValueError:
        return None


class CredentialStore:
    def __init__(self, path, compact_ratio: int = 4, fault: Optional[Callable[[str], None]] = None):
        self.path = Path(path)
        self.compact_ratio = compact_ratio
        self._fault = fault or (lambda point: None)
        self._lock = threading.Lock()
        self._creds: dict[str, VerifierCredential] = {}
        self._records = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._load()
        self._fh = open(self.path, "ab")

    def _load(self) -> None:
        if not self.path.exists():
            self.path.touch()
            return
        good_end = 0
        with open(self.path, "rb") as fh:
            for line in fh:
                rec = _unframe(line)
                if rec is None:
                    break
                self._apply(rec)
                self._records += 1
                good_end += len(line)
        if good_end != self.path.stat().st_size:
            logger.warning("discarding torn tail of %s after byte %d", self.path, good_end)
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
                os.fsync(fh.fileno())

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "put":
            cred = VerifierCredential.from_record(rec["cred"])
            self._creds[cred.cred_id] = cred
        elif rec["op"] == "del":
            self._creds.pop(rec["cred_id"], None)

    def _append(self, rec: dict) -> None:
        data = _frame(rec)
        self._fault("before_write")
        half = len(data) // 2
        self._fh.write(data[:half])
        self._fh.flush()
        self._fault("mid_write")
        self._fh.write(data[half:])
        self._fh.flush()
        self._fault("before_fsync")
        os.fsync(self._fh.fileno())
        self._fault("after_fsync")
        self._records += 1

    def __contains__(self, cred_id: str) -> bool:
        return cred_id in self._creds

    def __len__(self) -> int:
        return len(self._creds)

    def get(self, cred_id: str) -> VerifierCredential:
        return self._creds[cred_id]

    def put(self, cred: VerifierCredential) -> None:
        with self._lock:
            self._append({"op": "put", "cred": cred.to_record()})
            self._creds[cred.cred_id] = cred
            if self._records > self.compact_ratio * max(1, len(self._creds)):
                self._compact()

    def delete(self, cred_id: str) -> None:
        with self._lock:
            self._append({"op": "del", "cred_id": cred_id})
            self._creds.pop(cred_id, None)

    def _compact(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            for cred in self._creds.values():
                fh.write(_frame({"op": "put", "cred": cred.to_record()}))
            fh.flush()
            os.fsync(fh.fileno())
        self._fh.close()
        os.replace(tmp, self.path)
        dir_fd = os.open(self.path.parent, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)
        self._fh = open(self.path, "ab")
        self._records = len(self._creds)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
