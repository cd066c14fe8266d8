"""Time-tagged hash chain primitives.

Every node of a chain lives at a slot time ``t``. Stepping down from the node
at slot ``t`` gives the node at ``t - 1``::

    value(t - 1) = H(<t - 1>_c || salt || value(t))|_n

so the tag hashed into each step is the slot of the node it produces. The
head of the chain (slot ``t_max``) is the secret key, the tail (slot
``t_init``) is the public initial password.

Bit packing: the ``c + s + n`` message bits are laid out MSB first and the
final partial byte is zero-padded on the right. With the default sizes that is
a 242-bit message hashed as 31 bytes. Truncation keeps the leading ``n`` bits
of the digest.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional

from .errors import InvalidParams, RngFailure, StepBelowTail, TargetOutOfRange

# hash_id -> (constructor, output bits)
HASHES: dict[str, tuple[Callable, int]] = {
    "sha256": (hashlib.sha256, 256),
}

SecretKey = int
Salt = int
SlotTime = int


def register_hash(hash_id: str, constructor: Callable, bits: int) -> None:
    HASHES[hash_id] = (constructor, bits)


@dataclass(frozen=True)
class Params:
    """Public scheme parameters; defaults are the typical deployment values."""

    n: int = 130
    s: int = 80
    c: int = 32
    m: int = 256
    k: int = 2_000_000
    I: int = 30
    hash_id: str = "sha256"

    def __post_init__(self):
        if self.hash_id not in HASHES:
            raise InvalidParams(f"unknown hash {self.hash_id!r}")
        if HASHES[self.hash_id][1] != self.m:
            raise InvalidParams(f"{self.hash_id} outputs {HASHES[self.hash_id][1]} bits, not m={self.m}")
        if min(self.n, self.s, self.c) < 1:
            raise InvalidParams("n, s and c must be positive")
        if self.n + self.s + self.c > self.m:
            raise InvalidParams("n + s + c must not exceed m")
        if not 1 <= self.k < 2 ** self.c:
            raise InvalidParams("k must satisfy 1 <= k < 2^c")
        if self.I < 1:
            raise InvalidParams("slot length I must be >= 1 second")

    @property
    def message_bits(self) -> int:
        return self.c + self.s + self.n

    def slot(self, unix_time: float) -> SlotTime:
        return int(unix_time // self.I)


@dataclass(frozen=True)
class ChainValue:
    value: int
    at: SlotTime


class HashCounter:
    """Per-call tally of hash evaluations. Pass one in; never share across threads."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def __repr__(self):
        return f"HashCounter({self.count})"


def pack_message(params: Params, tag: int, salt: Salt, value: int) -> bytes:
    """Bit-exact hash input for one chain step (reference, slow path)."""
    if not 0 <= tag < 2 ** params.c:
        raise InvalidParams(f"slot {tag} not representable in {params.c} bits")
    bits = params.message_bits
    nbytes = -(-bits // 8)
    word = (((tag << params.s) | salt) << params.n) | value
    return (word << (8 * nbytes - bits)).to_bytes(nbytes, "big")


@lru_cache(maxsize=256)
def _stepper(params: Params, salt: Salt) -> Callable[[int, int], int]:
    """Return ``f(tag, value) -> next value`` specialised for these params.

    Callers check that every tag fits in ``c`` bits (see :func:`_check_span`).
    """
    ctor = HASHES[params.hash_id][0]
    n = params.n
    out_bytes = -(-n // 8)
    out_shift = 8 * out_bytes - n
    if params.c % 8 == 0 and params.s % 8 == 0:
        salt_b = salt.to_bytes(params.s // 8, "big")
        tag_len = params.c // 8
        val_pad = out_shift

        def f(tag: int, value: int) -> int:
            d = ctor(tag.to_bytes(tag_len, "big") + salt_b + (value << val_pad).to_bytes(out_bytes, "big")).digest()
            return int.from_bytes(d[:out_bytes], "big") >> out_shift

    else:
        m = params.m

        def f(tag: int, value: int) -> int:
            d = ctor(pack_message(params, tag, salt, value)).digest()
            return int.from_bytes(d, "big") >> (m - n)

    return f


def _check_value(params: Params, v: ChainValue) -> None:
    if v.value < 0 or v.value >> params.n:
        raise InvalidParams(f"chain value does not fit in {params.n} bits")


def _check_span(params: Params, top: SlotTime, bottom: SlotTime) -> None:
    """Tags bottom..top-1 must be representable in c bits."""
    if bottom < 0 or top > 2 ** params.c:
        raise InvalidParams(f"slots {bottom}..{top} not representable in {params.c} bits")


def step_down(params: Params, salt: Salt, v: ChainValue, t_init: SlotTime = 0,
              counter: Optional[HashCounter] = None) -> ChainValue:
    """One hash: the node at ``v.at - 1``."""
    if v.at <= t_init:
        raise StepBelowTail(f"node at slot {v.at} is the tail (t_init={t_init})")
    _check_value(params, v)
    _check_span(params, v.at, v.at - 1)
    nxt = _stepper(params, salt)(v.at - 1, v.value)
    if counter is not None:
        counter.count += 1
    return ChainValue(nxt, v.at - 1)


def walk(params: Params, salt: Salt, v: ChainValue, target: SlotTime, t_init: SlotTime = 0,
         counter: Optional[HashCounter] = None) -> ChainValue:
    """Walk down from ``v`` to the node at slot ``target`` (``v.at - target`` hashes)."""
    if not t_init <= target <= v.at:
        raise TargetOutOfRange(f"target {target} outside [{t_init}, {v.at}]")
    _check_value(params, v)
    _check_span(params, v.at, target)
    f = _stepper(params, salt)
    x = v.value
    for tag in range(v.at - 1, target - 1, -1):
        x = f(tag, x)
    if counter is not None:
        counter.count += v.at - target
    return ChainValue(x, target)


def walk_collect(params: Params, salt: Salt, v: ChainValue, target: SlotTime,
                 slots: Iterable[SlotTime], t_init: SlotTime = 0,
                 counter: Optional[HashCounter] = None) -> tuple[ChainValue, dict[SlotTime, ChainValue]]:
    """Like :func:`walk`, also recording the nodes passed at ``slots`` in the same pass."""
    if not t_init <= target <= v.at:
        raise TargetOutOfRange(f"target {target} outside [{t_init}, {v.at}]")
    _check_value(params, v)
    _check_span(params, v.at, target)
    wanted = {t for t in slots if target <= t <= v.at}
    f = _stepper(params, salt)
    seen: dict[SlotTime, ChainValue] = {}
    if v.at in wanted:
        seen[v.at] = v
    x = v.value
    for tag in range(v.at - 1, target - 1, -1):
        x = f(tag, x)
        if tag in wanted:
            seen[tag] = ChainValue(x, tag)
    if counter is not None:
        counter.count += v.at - target
    return ChainValue(x, target), seen


def keygen(params: Params, rng=None) -> tuple[SecretKey, Salt]:
    """Fresh ``(sk, salt)``. ``rng`` needs ``getrandbits``; defaults to the OS CSPRNG."""
    source = rng if rng is not None else secrets.SystemRandom()
    try:
        sk = source.getrandbits(params.n)
        salt = source.getrandbits(params.s)
    except Exception as exc:  # noqa: BLE001 - any entropy failure is fatal here
        raise RngFailure(str(exc)) from exc
    return sk, salt


def chain_tail(params: Params, salt: Salt, sk: SecretKey, t_init: SlotTime,
               counter: Optional[HashCounter] = None) -> ChainValue:
    """The public initial password ``p_init`` (exactly ``k`` hashes)."""
    return walk(params, salt, ChainValue(sk, t_init + params.k), t_init, t_init=t_init, counter=counter)
