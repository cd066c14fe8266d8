"""Server side verification.

The server keeps, per credential, the last accepted password and its slot.
Nothing it stores is secret: every field is visible to anyone who watched a
successful login.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

from . import chain
from .chain import ChainValue, HashCounter, Params
from .errors import (
    BadPassword, DuplicateCredential, ExpiredChain, Malformed, MalformedPassword, ReplayOrStale,
    UnknownCredential, UnsupportedAlg, UnsupportedVersion,
)
from .prover import ENROLLMENT_VERSION, Enrollment


@dataclass(frozen=True)
class SkewPolicy:
    """How many slots behind the server clock a password may be.

    ``accept_head_after_expiry`` lets the head of an expired chain through. It
    is off by default: every slot past expiry widens the window in which a
    leaked head is still usable.
    """

    w_back: int = 2
    accept_head_after_expiry: bool = False

    def __post_init__(self):
        if self.w_back < 0:
            raise ValueError("w_back must be >= 0")


@dataclass(frozen=True)
class VerifierCredential:
    cred_id: str
    salt: int
    params: Params
    t_init: int
    p_prev: ChainValue

    @property
    def t_prev(self) -> int:
        return self.p_prev.at

    @property
    def t_max(self) -> int:
        return self.t_init + self.params.k

    def to_record(self) -> dict:
        p = self.params
        return {
            "cred_id": self.cred_id, "salt": format(self.salt, "x"), "t_init": self.t_init,
            "p_prev": format(self.p_prev.value, "x"), "t_prev": self.t_prev,
            "params": {"n": p.n, "s": p.s, "c": p.c, "m": p.m, "k": p.k, "I": p.I, "hash_id": p.hash_id},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "VerifierCredential":
        return cls(rec["cred_id"], int(rec["salt"], 16), Params(**rec["params"]), int(rec["t_init"]),
                   ChainValue(int(rec["p_prev"], 16), int(rec["t_prev"])))


def enroll(payload: Enrollment, cred_id: str) -> VerifierCredential:
    if payload.version != ENROLLMENT_VERSION:
        raise UnsupportedVersion(f"enrollment version {payload.version}")
    if payload.hash_id not in chain.HASHES:
        raise UnsupportedAlg(payload.hash_id)
    try:
        params = payload.params()
    except ValueError as exc:
        raise Malformed(str(exc)) from exc
    if payload.p_init.at != payload.t_init or not 0 <= payload.p_init.value < 2 ** params.n:
        raise Malformed("p_init does not match t_init or has the wrong length")
    if not 0 <= payload.salt < 2 ** params.s:
        raise Malformed("salt has the wrong length")
    if payload.t_init < 0 or payload.t_init + params.k > 2 ** params.c:
        raise Malformed("chain does not fit the time tag")
    return VerifierCredential(cred_id, payload.salt, params, payload.t_init, payload.p_init)


def candidate_slots(cred: VerifierCredential, t_server: int, policy: SkewPolicy) -> list[int]:
    """Slots to try, newest first. Raises when there are none."""
    hi = min(t_server, cred.t_max)
    lo = max(cred.t_prev + 1, t_server - policy.w_back)
    if t_server - policy.w_back > cred.t_max:
        if policy.accept_head_after_expiry and cred.t_prev < cred.t_max:
            return [cred.t_max]
        raise ExpiredChain(f"chain expired at slot {cred.t_max}")
    if hi < lo:
        raise ReplayOrStale(f"no slot in window is after t_prev={cred.t_prev}")
    return list(range(hi, lo - 1, -1))


def verify(cred: VerifierCredential, p: int, t_server: int, policy: SkewPolicy = SkewPolicy(),
           counter: Optional[HashCounter] = None) -> VerifierCredential:
    """Return the updated credential on success; raise a :class:`VerificationError` otherwise."""
    if not isinstance(p, int) or p < 0 or p >> cred.params.n:
        raise MalformedPassword(f"password must be {cred.params.n} bits")
    prev = cred.p_prev
    for t_c in candidate_slots(cred, t_server, policy):
        got = chain.walk(cred.params, cred.salt, ChainValue(p, t_c), prev.at, t_init=cred.t_init, counter=counter)
        if got.value == prev.value:
            return VerifierCredential(cred.cred_id, cred.salt, cred.params, cred.t_init, ChainValue(p, t_c))
    if _already_used(cred, p, t_server, policy, counter):
        raise ReplayOrStale("password was already accepted or is older than the last accepted one")
    raise BadPassword("password does not chain to the last accepted one")


def _old_slots(cred: VerifierCredential, t_server: int, policy: SkewPolicy) -> range:
    return range(max(t_server - policy.w_back, cred.t_init), cred.t_prev)


def _already_used(cred, p, t_server, policy, counter) -> bool:
    """Is ``p`` the last accepted password or a node below it inside the window?"""
    if p == cred.p_prev.value:
        return True
    old = _old_slots(cred, t_server, policy)
    if not old:
        return False
    _, seen = chain.walk_collect(cred.params, cred.salt, cred.p_prev, old.start, old,
                                 t_init=cred.t_init, counter=counter)
    return any(cv.value == p for cv in seen.values())


def verification_cost(cred: VerifierCredential, t_server: int, policy: SkewPolicy = SkewPolicy()) -> int:
    """Hashes spent by :func:`verify` when every candidate is tried (the reject path)."""
    try:
        slots = candidate_slots(cred, t_server, policy)
    except (ExpiredChain, ReplayOrStale):
        return 0
    old = _old_slots(cred, t_server, policy)
    return sum(t_c - cred.t_prev for t_c in slots) + (cred.t_prev - old.start if old else 0)


def audit(cred: VerifierCredential, history: list[ChainValue]) -> bool:
    """Check that consecutive accepted passwords chain into each other."""
    for newer, older in zip(history[1:], history):
        if chain.walk(cred.params, cred.salt, newer, older.at, t_init=cred.t_init) != older:
            return False
    return True


@dataclass(frozen=True)
class Accepted:
    slot: int
    credential: VerifierCredential


class Verifier:
    """Credential registry over a durable store, one writer per credential.

    ``store`` needs ``get(cred_id)``, ``put(cred)`` (durable on return) and
    ``__contains__``. ``fault`` is a test hook called at named points.
    """

    def __init__(self, store, policy: SkewPolicy = SkewPolicy(),
                 fault: Optional[Callable[[str], None]] = None):
        self.store = store
        self.policy = policy
        self._fault = fault or (lambda point: None)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, cred_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(cred_id, threading.Lock())

    def enroll(self, cred_id: str, payload: Enrollment, replace_existing: bool = False) -> VerifierCredential:
        cred = enroll(payload, cred_id)
        with self._lock(cred_id):
            if cred_id in self.store and not replace_existing:
                raise DuplicateCredential(cred_id)
            self.store.put(cred)
        return cred

    def get(self, cred_id: str) -> VerifierCredential:
        if cred_id not in self.store:
            raise UnknownCredential(cred_id)
        return self.store.get(cred_id)

    def verify(self, cred_id: str, p: int, t_server: int, counter: Optional[HashCounter] = None) -> Accepted:
        with self._lock(cred_id):
            cred = self.get(cred_id)
            updated = verify(cred, p, t_server, self.policy, counter)
            self._fault("matched")
            self.store.put(updated)
            self._fault("persisted")
            return Accepted(updated.t_prev, updated)
