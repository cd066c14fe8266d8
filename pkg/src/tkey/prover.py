"""Client side: enrollment, password generation and checkpoint upkeep.

Checkpoint plans are computed in tail-relative offsets (see
:mod:`tkey.checkpoints`); this module translates them to absolute slots by
adding the slot of the last login.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import chain
from .chain import ChainValue, HashCounter, Params
from .checkpoints import AdaptiveRate, ExponentialModel, make_plan
from .errors import (
    ClockRegression, Expired, InvalidParams, MalformedState, NotYetValid, UnsupportedVersion,
)

ENROLLMENT_VERSION = 1
STATE_MAGIC = b"TKEYP"
STATE_VERSION = 1


@dataclass(frozen=True)
class PlanConfig:
    scheme: str = "mixed"
    q_total: int = 20
    q_worst: int = 8
    mean_gap: float = 20160.0
    adaptive: bool = False

    def __post_init__(self):
        if self.scheme not in ("naive", "recursive", "expectation_optimal", "mixed"):
            raise InvalidParams(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.q_worst <= self.q_total:
            raise InvalidParams("need 0 <= q_worst <= q_total")
        if self.mean_gap <= 0:
            raise InvalidParams("mean gap must be positive")


@dataclass(frozen=True)
class Enrollment:
    """Everything the server needs; contains no secret."""

    salt: int
    p_init: ChainValue
    t_init: int
    k: int
    I: int
    n: int = 130
    hash_id: str = "sha256"
    version: int = ENROLLMENT_VERSION

    def params(self) -> Params:
        return Params(n=self.n, k=self.k, I=self.I, hash_id=self.hash_id)


@dataclass
class ProverState:
    sk: int
    salt: int
    params: Params
    t_init: int
    checkpoints: tuple[ChainValue, ...] = ()
    plan_config: PlanConfig = field(default_factory=PlanConfig)
    last_emitted: Optional[int] = None
    mean_gap: Optional[float] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def t_max(self) -> int:
        return self.t_init + self.params.k

    @property
    def head(self) -> ChainValue:
        return ChainValue(self.sk, self.t_max)

    def model(self) -> ExponentialModel:
        gap = self.mean_gap if self.plan_config.adaptive and self.mean_gap else self.plan_config.mean_gap
        return ExponentialModel(1.0 / gap)

    def cover(self, slot: int) -> ChainValue:
        """Lowest stored node at or above ``slot`` (the head if none)."""
        for cp in self.checkpoints:
            if cp.at >= slot:
                return cp
        return self.head


def _plan_slots(state: ProverState, now: int) -> list[int]:
    ell = state.t_max - now
    if ell < 1:
        return []
    cfg = state.plan_config
    plan = make_plan(cfg.scheme, ell, cfg.q_total, state.model(), q_worst=cfg.q_worst)
    # the head itself is always available
    return [now + c for c in plan.positions if now + c < state.t_max]


def init(params: Params, rng=None, now: int = 0, plan_config: PlanConfig = PlanConfig(),
         counter: Optional[HashCounter] = None) -> tuple[ProverState, Enrollment]:
    """Fresh chain starting at slot ``now``; checkpoints are captured during the one traversal."""
    if not (0 <= now and now + params.k <= 2 ** params.c):
        raise InvalidParams(f"slot {now} leaves no room for a chain of {params.k} slots")
    sk, salt = chain.keygen(params, rng)
    state = ProverState(sk, salt, params, now, plan_config=plan_config,
                        mean_gap=plan_config.mean_gap if plan_config.adaptive else None)
    slots = _plan_slots(state, now)
    p_init, seen = chain.walk_collect(params, salt, state.head, now, slots, t_init=now, counter=counter)
    state.checkpoints = tuple(seen[s] for s in sorted(seen))
    enrollment = Enrollment(salt, p_init, now, params.k, params.I, params.n, params.hash_id)
    return state, enrollment


def gen_password(state: ProverState, now: int, counter: Optional[HashCounter] = None) -> ChainValue:
    """Password for slot ``now`` (read from the local clock, never from a server)."""
    if now > state.t_max:
        raise Expired(f"chain expired at slot {state.t_max}")
    if now <= state.t_init:
        raise NotYetValid(f"slot {now} is not after t_init={state.t_init}")
    with state._lock:
        if state.last_emitted is not None and now <= state.last_emitted:
            raise ClockRegression(f"slot {now} <= last emitted slot {state.last_emitted}")
        start = state.cover(now)
        value = chain.walk(state.params, state.salt, start, now, t_init=state.t_init, counter=counter)
        if state.plan_config.adaptive:
            rate = AdaptiveRate(state.mean_gap or state.plan_config.mean_gap)
            rate.observe(now - (state.last_emitted if state.last_emitted is not None else state.t_init))
            state.mean_gap = rate.mean_gap
        state.last_emitted = now
    return value


def reposition(state: ProverState, now: int, counter: Optional[HashCounter] = None) -> ProverState:
    """Replace the checkpoint set with a fresh plan for the remaining chain.

    New values are filled by walking down from the nearest known node above
    each new slot. On any failure the old set stays in place.
    """
    if not state.t_init <= now <= state.t_max:
        raise InvalidParams(f"slot {now} outside the chain")
    old = state.checkpoints
    slots = sorted(set(_plan_slots(state, now)), reverse=True)
    known = {cp.at: cp for cp in old if cp.at >= now}
    known[state.t_max] = state.head
    new: list[ChainValue] = []
    for slot in slots:
        if slot in known:
            new.append(known[slot])
            continue
        src_slot = min(s for s in known if s > slot)
        cv = chain.walk(state.params, state.salt, known[src_slot], slot, t_init=state.t_init, counter=counter)
        known[slot] = cv
        new.append(cv)
    with state._lock:
        state.checkpoints = tuple(sorted(new, key=lambda cv: cv.at))
    return state


def reposition_in_background(state: ProverState, now: int) -> threading.Thread:
    """Run :func:`reposition` on a thread; gen_password keeps using the old set until the swap."""
    t = threading.Thread(target=reposition, args=(state, now), daemon=True)
    t.start()
    return t


# -- state file ------------------------------------------------------------------

def serialize(state: ProverState) -> bytes:
    with state._lock:
        body = {
            "sk": format(state.sk, "x"),
            "salt": format(state.salt, "x"),
            "params": asdict(state.params),
            "t_init": state.t_init,
            "checkpoints": [[cp.at, format(cp.value, "x")] for cp in state.checkpoints],
            "plan_config": asdict(state.plan_config),
            "last_emitted": state.last_emitted,
            "mean_gap": state.mean_gap,
        }
    return STATE_MAGIC + bytes([STATE_VERSION]) + json.dumps(body, sort_keys=True).encode()


def deserialize(blob: bytes) -> ProverState:
    if len(blob) < len(STATE_MAGIC) + 1 or not blob.startswith(STATE_MAGIC):
        raise MalformedState("not a tkey prover state")
    version = blob[len(STATE_MAGIC)]
    if version != STATE_VERSION:
        raise UnsupportedVersion(f"state version {version} not supported")
    try:
        body = json.loads(blob[len(STATE_MAGIC) + 1:])
        params = Params(**body["params"])
        state = ProverState(
            sk=int(body["sk"], 16),
            salt=int(body["salt"], 16),
            params=params,
            t_init=int(body["t_init"]),
            checkpoints=tuple(ChainValue(int(v, 16), int(at)) for at, v in body["checkpoints"]),
            plan_config=PlanConfig(**body["plan_config"]),
            last_emitted=body["last_emitted"],
            mean_gap=body["mean_gap"],
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedState(str(exc)) from exc
    slots = [cp.at for cp in state.checkpoints]
    if slots != sorted(set(slots)) or any(not state.t_init <= s <= state.t_max for s in slots):
        raise MalformedState("checkpoint slots out of order or outside the chain")
    if state.sk >= 2 ** params.n or state.salt >= 2 ** params.s:
        raise MalformedState("key material has the wrong length")
    return state
