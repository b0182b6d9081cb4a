"""Canonical encoding primitives.

Every hash in the toolkit depends on these byte layouts staying fixed, so the
expected values below are frozen literals computed by hand.
"""

import hashlib
import json
import random

import pytest

from starlock.serialize import (
    canonical_json,
    enc_bytes,
    enc_int,
    enc_str,
    hex_to_int,
    int_to_bytes,
    int_to_hex,
    sha256,
    sha256_hex,
)


def test_int_to_bytes_minimal_big_endian() -> None:
    assert int_to_bytes(0) == b"\x00"
    assert int_to_bytes(1) == b"\x01"
    assert int_to_bytes(255) == b"\xff"
    assert int_to_bytes(256) == b"\x01\x00"
    assert int_to_bytes(2**64) == b"\x01" + b"\x00" * 8


def test_int_to_bytes_rejects_negative() -> None:
    with pytest.raises(ValueError):
        int_to_bytes(-1)


def test_length_prefixed_encodings_frozen() -> None:
    # 4-byte big-endian length, then the payload
    assert enc_bytes(b"").hex() == "00000000"
    assert enc_bytes(b"\xab").hex() == "00000001ab"
    assert enc_int(0).hex() == "0000000100"
    assert enc_int(255).hex() == "00000001ff"
    assert enc_int(256).hex() == "000000020100"
    assert enc_str("ab").hex() == "000000026162"


def test_field_sequences_cannot_collide() -> None:
    # without length prefixes ("ab","c") and ("a","bc") would be the same bytes
    assert enc_str("ab") + enc_str("c") != enc_str("a") + enc_str("bc")
    rng = random.Random(1)
    seen = {}
    for _ in range(300):
        pair = (
            "".join(rng.choice("abc") for _ in range(rng.randrange(4))),
            "".join(rng.choice("abc") for _ in range(rng.randrange(4))),
        )
        blob = enc_str(pair[0]) + enc_str(pair[1])
        assert seen.setdefault(blob, pair) == pair


def test_sha256_matches_hashlib() -> None:
    for payload in (b"", b"x", b"starlock", bytes(range(200))):
        assert sha256(payload) == hashlib.sha256(payload).digest()
        assert sha256_hex(payload) == hashlib.sha256(payload).hexdigest()


def test_int_hex_round_trip() -> None:
    rng = random.Random(2)
    for _ in range(100):
        n = rng.randrange(2**rng.randrange(1, 256))
        assert hex_to_int(int_to_hex(n)) == n
    assert int_to_hex(0) == "00"
    assert int_to_hex(255) == "ff"
    assert int_to_hex(256) == "0100"


def test_canonical_json_is_sorted_and_compact() -> None:
    a = canonical_json({"b": 1, "a": [2, 3], "c": {"y": "z"}})
    b = canonical_json({"c": {"y": "z"}, "a": [2, 3], "b": 1})
    assert a == b == '{"a":[2,3],"b":1,"c":{"y":"z"}}'
    assert json.loads(a) == {"a": [2, 3], "b": 1, "c": {"y": "z"}}
