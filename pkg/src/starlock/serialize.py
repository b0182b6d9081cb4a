"""Canonical encodings shared by every hashing and signing path.

Byte layout: each field is a 4-byte big-endian length prefix followed by the
field's bytes; integers contribute their minimal big-endian magnitude (zero
encodes as a single zero byte). Structures concatenate their fields in
declared order, and a nested structure is embedded as a single length-prefixed
bytes field. All digests are SHA-256, rendered as lowercase hex.

Keeping this in one module is what lets independent readers of the public
artifacts (verifier, auditors, receipt checkers) reproduce every hash
bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def int_to_bytes(x: int) -> bytes:
    """Minimal big-endian magnitude of a nonnegative integer."""
    if x < 0:
        raise ValueError("negative integers have no canonical encoding")
    return x.to_bytes((x.bit_length() + 7) // 8 or 1, "big")


def enc_bytes(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def enc_int(x: int) -> bytes:
    return enc_bytes(int_to_bytes(x))


def enc_str(s: str) -> bytes:
    return enc_bytes(s.encode("utf-8"))


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def int_to_hex(x: int) -> str:
    """Group elements travel through JSON as lowercase hex of the magnitude."""
    return int_to_bytes(x).hex()


def hex_to_int(s: str) -> int:
    return int(s, 16)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON: lexicographic keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
