"""Text forms of passwords and enrollment payloads.

Passwords (130 bits) and salts (80 bits) are whole multiples of 5 bits, so
they map onto unpadded RFC 4648 base32 with no padding ambiguity. Output is
lowercase; input is accepted in either case.

Word encoding puts two zero bits above the password to reach 132 bits, then
cuts that into 11-bit indices (2048-word list, 12 words) or 12-bit indices
(4096-word list, 11 words), most significant first.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union
from urllib.parse import parse_qsl, urlsplit

from . import chain
from .chain import ChainValue
from .errors import (
    BadAlphabet, BadCount, BadLength, BadPadBits, Malformed, UnknownWord, UnsupportedAlg,
    UnsupportedVersion,
)
from .prover import ENROLLMENT_VERSION, Enrollment

PASSWORD_BITS = 130
SALT_BITS = 80
_B32_CHARS = re.compile(r"[A-Za-z2-7]*")
_WORD = re.compile(r"[a-z]{1,6}")
_DECIMAL = re.compile(r"0|[1-9][0-9]*")

# sha256 of the shipped list files, one word per line with LF endings
WORDLIST_DIGESTS = {
    11: "fe1859fda7889ec30def0b8624046787c3f2842deaefaac49f4ed0b51850510c",
    12: "df68b6a59fd0d5c6aa4d124720e24db125359620e689f21d4c1df74b1473176e",
}


# -- base32 ---------------------------------------------------------------------

def int_to_base32(value: int, bits: int) -> str:
    if bits % 5 or not 0 <= value < 1 << bits:
        raise BadLength(f"value does not fit {bits} bits (a multiple of 5)")
    # left-pad to a whole number of 40-bit groups so the stdlib codec emits no '='
    width = -(-bits // 40) * 40
    text = base64.b32encode(value.to_bytes(width // 8, "big")).decode().lower()
    return text[(width - bits) // 5:]


def base32_to_int(text: str, bits: int) -> int:
    chars = bits // 5
    if len(text) != chars:
        raise BadLength(f"expected {chars} base32 characters, got {len(text)}")
    if not _B32_CHARS.fullmatch(text):
        raise BadAlphabet("base32 accepts only a-z and 2-7")
    width = -(-bits // 40) * 40
    try:
        raw = base64.b32decode("A" * ((width - bits) // 5) + text.upper())
    except binascii.Error as exc:  # pragma: no cover - regex already screens input
        raise BadAlphabet(str(exc)) from exc
    return int.from_bytes(raw, "big")


def password_to_base32(p: int) -> str:
    return int_to_base32(p, PASSWORD_BITS)


def base32_to_password(text: str) -> int:
    return base32_to_int(text, PASSWORD_BITS)


# -- word lists -----------------------------------------------------------------

@dataclass(frozen=True)
class WordList:
    words: tuple[str, ...]

    def __post_init__(self):
        n = len(self.words)
        if n not in (2 ** 11, 2 ** 12):
            raise ValueError(f"word list must hold 2048 or 4096 words, not {n}")
        bad = [w for w in self.words if not _WORD.fullmatch(w)]
        if bad:
            raise ValueError(f"words must match [a-z]{{1,6}}: {bad[:3]}")
        if len(set(self.words)) != n:
            raise ValueError("word list has duplicates")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    @property
    def bits(self) -> int:
        return len(self.words).bit_length() - 1

    @property
    def count(self) -> int:
        """Words per password."""
        return -(-PASSWORD_BITS // self.bits)

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise UnknownWord(word) from None

    @classmethod
    def from_text(cls, text: str, expected_digest: Optional[str] = None) -> "WordList":
        if expected_digest is not None:
            got = hashlib.sha256(text.encode()).hexdigest()
            if got != expected_digest:
                raise ValueError(f"word list digest {got} != expected {expected_digest}")
        if "\r" in text or not text.endswith("\n"):
            raise ValueError("word list must use LF line endings and end with a newline")
        return cls(tuple(text[:-1].split("\n")))

    @classmethod
    def from_file(cls, path: Union[str, Path], expected_digest: Optional[str] = None) -> "WordList":
        return cls.from_text(Path(path).read_bytes().decode("utf-8"), expected_digest)


@lru_cache(maxsize=None)
def builtin_wordlist(bits: int = 11) -> WordList:
    if bits not in WORDLIST_DIGESTS:
        raise ValueError("built-in lists exist for 11 and 12 bits")
    text = resources.files("tkey").joinpath(f"data/words{2 ** bits}.txt").read_text("utf-8")
    return WordList.from_text(text, WORDLIST_DIGESTS[bits])


def password_to_words(p: int, wordlist: Optional[WordList] = None) -> list[str]:
    wl = wordlist or builtin_wordlist(11)
    if not 0 <= p < 1 << PASSWORD_BITS:
        raise BadLength("password must be 130 bits")
    b, n = wl.bits, wl.count
    mask = (1 << b) - 1
    return [wl.words[(p >> (b * (n - 1 - i))) & mask] for i in range(n)]


def words_to_password(words: Union[str, Iterable[str]], wordlist: Optional[WordList] = None) -> int:
    wl = wordlist or builtin_wordlist(11)
    if isinstance(words, str):
        words = words.split()
    words = [w.lower() for w in words]
    if len(words) != wl.count:
        raise BadCount(f"expected {wl.count} words, got {len(words)}")
    acc = 0
    for w in words:
        acc = (acc << wl.bits) | wl.index(w)
    if acc >> PASSWORD_BITS:
        raise BadPadBits("leading pad bits must be zero")
    return acc


# -- enrollment URI -------------------------------------------------------------

URI_KEYS = ("v", "alg", "id", "p", "t0", "k", "i")


def enrollment_to_uri(e: Enrollment) -> str:
    if e.n != PASSWORD_BITS:
        raise Malformed("the v=1 URI carries 130-bit passwords only")
    return (f"tkey://enroll?v={e.version}&alg={e.hash_id}&id={int_to_base32(e.salt, SALT_BITS)}"
            f"&p={password_to_base32(e.p_init.value)}&t0={e.t_init}&k={e.k}&i={e.I}")


def uri_to_enrollment(uri: str) -> Enrollment:
    parts = urlsplit(uri)
    if parts.scheme != "tkey" or parts.netloc != "enroll" or parts.path not in ("", "/") or parts.fragment:
        raise Malformed("expected tkey://enroll?...")
    try:
        pairs = parse_qsl(parts.query, keep_blank_values=True, strict_parsing=True)
    except ValueError as exc:
        raise Malformed(str(exc)) from exc
    fields: dict[str, str] = {}
    for key, val in pairs:
        if key in fields:
            raise Malformed(f"repeated key {key!r}")
        fields[key] = val
    if "v" not in fields:
        raise Malformed("missing v")
    if fields["v"] != str(ENROLLMENT_VERSION):
        raise UnsupportedVersion(f"enrollment URI version {fields['v']!r}")
    unknown = set(fields) - set(URI_KEYS)
    missing = set(URI_KEYS) - set(fields)
    if unknown or missing:
        raise Malformed(f"unknown keys {sorted(unknown)}, missing keys {sorted(missing)}")
    if fields["alg"] not in chain.HASHES:
        raise UnsupportedAlg(fields["alg"])
    nums = {}
    for key in ("t0", "k", "i"):
        if not _DECIMAL.fullmatch(fields[key]):
            raise Malformed(f"{key} must be a canonical decimal")
        nums[key] = int(fields[key])
    try:
        salt = base32_to_int(fields["id"], SALT_BITS)
        p = base32_to_password(fields["p"])
    except (BadLength, BadAlphabet) as exc:
        raise Malformed(str(exc)) from exc
    e = Enrollment(salt, ChainValue(p, nums["t0"]), nums["t0"], nums["k"], nums["i"],
                   PASSWORD_BITS, fields["alg"])
    try:
        e.params()
    except ValueError as exc:
        raise Malformed(str(exc)) from exc
    if e.t_init + e.k > 2 ** e.params().c:
        raise Malformed("chain does not fit the time tag")
    return e


# -- QR capacity ------------------------------------------------------------------

# data codewords per (version, error correction level), versions 1-4
QR_DATA_CODEWORDS = {
    1: {"L": 19, "M": 16, "Q": 13, "H": 9},
    2: {"L": 34, "M": 28, "Q": 22, "H": 16},
    3: {"L": 55, "M": 44, "Q": 34, "H": 26},
    4: {"L": 80, "M": 64, "Q": 48, "H": 36},
}
_QR_ALNUM = set("0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ $%*+-./:")


def qr_segment_bits(payload: Union[str, bytes], mode: str) -> int:
    """Bits of a single-segment QR bit stream (mode indicator, count, data), versions 1-9."""
    n = len(payload)
    if mode == "numeric":
        if not (isinstance(payload, str) and payload.isdigit()):
            raise ValueError("numeric mode needs decimal digits")
        return 4 + 10 + 10 * (n // 3) + (0, 4, 7)[n % 3]
    if mode == "alphanumeric":
        if not (isinstance(payload, str) and set(payload) <= _QR_ALNUM):
            raise ValueError("alphanumeric mode needs 0-9, A-Z and ' $%*+-./:'")
        return 4 + 9 + 11 * (n // 2) + 6 * (n % 2)
    if mode == "byte":
        return 4 + 8 + 8 * n
    raise ValueError(f"unknown mode {mode!r}")


def qr_fits(payload: Union[str, bytes], mode: str, version: int = 1, ecc: str = "L") -> bool:
    return qr_segment_bits(payload, mode) <= 8 * QR_DATA_CODEWORDS[version][ecc]


def password_qr_payload(p: int) -> bytes:
    """17 raw bytes: the form of a 130-bit password that fits a 21x21 code."""
    if not 0 <= p < 1 << PASSWORD_BITS:
        raise BadLength("password must be 130 bits")
    return p.to_bytes(17, "big")
