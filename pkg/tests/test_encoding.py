import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from tkey.chain import ChainValue
from tkey.encoding import (
    QR_DATA_CODEWORDS, WordList, base32_to_int, base32_to_password, builtin_wordlist,
    enrollment_to_uri, int_to_base32, password_qr_payload, password_to_base32, password_to_words,
    qr_fits, uri_to_enrollment, words_to_password,
)
from tkey.errors import (
    BadAlphabet, BadCount, BadLength, BadPadBits, Malformed, UnknownWord, UnsupportedAlg,
    UnsupportedVersion,
)
from tkey.prover import Enrollment

ALPHA = "abcdefghijklmnopqrstuvwxyz234567"
passwords = st.integers(0, 2 ** 130 - 1)


def b32_oracle(value, bits):
    return "".join(ALPHA[(value >> (bits - 5 * (i + 1))) & 31] for i in range(bits // 5))


def test_zero_password():
    assert password_to_base32(0) == "a" * 26
    assert password_to_base32(2 ** 130 - 1) == "7" * 26


@given(passwords)
def test_base32_matches_digit_oracle(p):
    assert password_to_base32(p) == b32_oracle(p, 130)


def test_base32_round_trip_10k():
    rng = random.Random(11)
    for _ in range(10_000):
        p = rng.getrandbits(130)
        s = password_to_base32(p)
        assert len(s) == 26 and base32_to_password(s) == p
        assert base32_to_password(s.upper()) == p


@pytest.mark.parametrize("text", ["a" * 25, "a" * 27, ""])
def test_base32_bad_length(text):
    with pytest.raises(BadLength):
        base32_to_password(text)


@pytest.mark.parametrize("ch", ["0", "1", "8", "9", "=", " ", "-", "é"])
def test_base32_bad_alphabet(ch):
    with pytest.raises(BadAlphabet):
        base32_to_password("a" * 25 + ch)


@given(st.text(min_size=26, max_size=26))
def test_base32_decoder_rejects_outside_image(text):
    try:
        p = base32_to_password(text)
    except BadAlphabet:
        assert any(c not in ALPHA for c in text.lower())
    else:
        assert password_to_base32(p) == text.lower()


def test_salt_is_sixteen_chars():
    assert len(int_to_base32(2 ** 80 - 1, 80)) == 16
    assert base32_to_int(int_to_base32(12345, 80), 80) == 12345


# word lists

def test_builtin_lists_are_frozen():
    for bits, size in ((11, 2048), (12, 4096)):
        wl = builtin_wordlist(bits)
        assert len(wl.words) == size and wl.bits == bits
        assert list(wl.words) == sorted(set(wl.words))


def test_word_counts():
    rng = random.Random(3)
    for _ in range(100):
        p = rng.getrandbits(130)
        assert len(password_to_words(p, builtin_wordlist(11))) == 12
        assert len(password_to_words(p, builtin_wordlist(12))) == 11


def test_word_round_trip_10k():
    rng = random.Random(4)
    w11, w12 = builtin_wordlist(11), builtin_wordlist(12)
    for _ in range(10_000):
        p = rng.getrandbits(130)
        assert words_to_password(password_to_words(p, w11), w11) == p
        assert words_to_password(" ".join(password_to_words(p, w12)).upper(), w12) == p


@given(passwords)
def test_word_indices_are_msb_first(p):
    wl = builtin_wordlist(11)
    idx = [wl.index(w) for w in password_to_words(p, wl)]
    padded = format(p, "0132b")
    assert idx == [int(padded[11 * i:11 * i + 11], 2) for i in range(12)]


def test_nonzero_pad_rejected():
    for bits in (11, 12):
        wl = builtin_wordlist(bits)
        ws = password_to_words(2 ** 129 + 5, wl)
        first = wl.index(ws[0])
        for pad in (1, 2, 3):
            ws[0] = wl.words[first | (pad << (bits - 2))]
            with pytest.raises(BadPadBits):
                words_to_password(ws, wl)


def test_word_errors():
    wl = builtin_wordlist(11)
    ws = password_to_words(99, wl)
    with pytest.raises(BadCount):
        words_to_password(ws[:-1], wl)
    with pytest.raises(BadCount):
        words_to_password(ws + ws[:1], wl)
    with pytest.raises(UnknownWord):
        words_to_password(ws[:-1] + ["zzzzzzz"], wl)


def test_wordlist_validation(tmp_path):
    good = builtin_wordlist(11)
    with pytest.raises(ValueError):
        WordList(good.words[:-1])
    with pytest.raises(ValueError):
        WordList(good.words[:-1] + (good.words[0],))
    with pytest.raises(ValueError):
        WordList(good.words[:-1] + ("Upper",))
    text = "\n".join(good.words) + "\n"
    path = tmp_path / "w.txt"
    path.write_text(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    assert WordList.from_file(path, digest) == good
    with pytest.raises(ValueError):
        WordList.from_file(path, "0" * 64)
    path.write_bytes(text.replace("\n", "\r\n").encode())
    with pytest.raises(ValueError):
        WordList.from_file(path)


# enrollment URI

enrollments = st.builds(
    lambda salt, p, t0, k, i: Enrollment(salt, ChainValue(p, t0), t0, k, i),
    st.integers(0, 2 ** 80 - 1), passwords, st.integers(0, 2 ** 31), st.integers(1, 2 ** 31 - 1),
    st.integers(1, 3600),
)


@given(enrollments)
def test_uri_round_trip(e):
    uri = enrollment_to_uri(e)
    assert uri_to_enrollment(uri) == e


def test_uri_shape():
    e = Enrollment(0, ChainValue(1, 57000000), 57000000, 2 ** 21, 30)
    assert enrollment_to_uri(e) == (
        "tkey://enroll?v=1&alg=sha256&id=aaaaaaaaaaaaaaaa&p=aaaaaaaaaaaaaaaaaaaaaaaaab"
        "&t0=57000000&k=2097152&i=30")


def mutate(uri, key, value=None):
    base, query = uri.split("?")
    pairs = [kv.split("=") for kv in query.split("&")]
    if value is None:
        pairs = [kv for kv in pairs if kv[0] != key]
    else:
        pairs = [[k, value if k == key else v] for k, v in pairs]
    return base + "?" + "&".join(f"{k}={v}" for k, v in pairs)


GOOD = enrollment_to_uri(Enrollment(77, ChainValue(5, 100), 100, 1000, 30))


@pytest.mark.parametrize("bad", [
    mutate(GOOD, "k"),
    mutate(GOOD, "t0", "+100"),
    mutate(GOOD, "k", "010"),
    mutate(GOOD, "k", "0"),
    mutate(GOOD, "p", "a" * 25),
    mutate(GOOD, "id", "1" * 16),
    GOOD + "&x=1",
    GOOD + "&k=5",
    GOOD.replace("tkey://enroll", "tkey://other"),
    GOOD.replace("tkey:", "http:"),
    GOOD + "#frag",
])
def test_uri_malformed(bad):
    with pytest.raises(Malformed):
        uri_to_enrollment(bad)


def test_uri_version_and_alg():
    with pytest.raises(UnsupportedVersion):
        uri_to_enrollment(mutate(GOOD, "v", "2"))
    with pytest.raises(UnsupportedAlg):
        uri_to_enrollment(mutate(GOOD, "alg", "md5"))


# QR capacity, checked against the published character-capacity table

@pytest.mark.parametrize("version,ecc,numeric,alnum,byte", [
    (1, "L", 41, 25, 17), (1, "M", 34, 20, 14), (1, "Q", 27, 16, 11), (1, "H", 17, 10, 7),
    (2, "L", 77, 47, 32), (3, "M", 101, 61, 42), (4, "H", 82, 50, 34),
])
def test_qr_budget_matches_capacity_table(version, ecc, numeric, alnum, byte):
    assert qr_fits("9" * numeric, "numeric", version, ecc)
    assert not qr_fits("9" * (numeric + 1), "numeric", version, ecc)
    assert qr_fits("A" * alnum, "alphanumeric", version, ecc)
    assert not qr_fits("A" * (alnum + 1), "alphanumeric", version, ecc)
    assert qr_fits(b"x" * byte, "byte", version, ecc)
    assert not qr_fits(b"x" * (byte + 1), "byte", version, ecc)
    assert set(QR_DATA_CODEWORDS[version]) == {"L", "M", "Q", "H"}


def test_password_fits_21x21_code():
    p = 2 ** 130 - 1
    assert len(password_qr_payload(p)) == 17
    assert qr_fits(password_qr_payload(p), "byte", 1, "L")
    assert qr_fits(str(p), "numeric", 1, "L")
    # the 26-character text form is one character over the version 1 budget
    assert not qr_fits(password_to_base32(p).upper(), "alphanumeric", 1, "L")
    assert qr_fits(password_to_base32(p).upper(), "alphanumeric", 2, "L")
