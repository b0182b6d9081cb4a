"""Public hash-chain and receipt formats.

These are format-level definitions shared by the polling place that produces
records and by independent programs (verifier, receipt checkers) that
recompute them from published files. Nothing here touches polling-place
state.
"""

from __future__ import annotations

import base64
import random

from .ballot import EncryptedBallot, WellFormednessProof
from .fiatshamir import DOMAIN_CHAIN_SEED
from .group import GroupParams
from .serialize import enc_bytes, enc_int, enc_str, sha256

RECEIPT_CODE_LENGTH = 20  # base32 chars; 5 bits each = first 100 bits of z
SERIAL_LENGTH = 26  # base32 chars for a 128-bit serial


def initial_chain_seed(
    election_id: str, gp: GroupParams, joint_key: int, salt: bytes, terminal_id: str
) -> bytes:
    """Per-terminal z_0: hash of all election parameters, a public random
    salt, and the terminal id."""
    return sha256(
        DOMAIN_CHAIN_SEED
        + enc_str(election_id)
        + enc_bytes(gp.canonical_bytes())
        + enc_int(joint_key)
        + enc_bytes(salt)
        + enc_str(terminal_id)
    )


def chain_hash(
    ballot: EncryptedBallot,
    proof: WellFormednessProof,
    terminal_id: str,
    z_prev: bytes,
) -> bytes:
    """z_i over the canonical bytes of (c_v, p_v, m, z_prev)."""
    return sha256(
        enc_bytes(ballot.canonical_bytes())
        + enc_bytes(proof.canonical_bytes())
        + enc_str(terminal_id)
        + enc_bytes(z_prev)
    )


def receipt_code(z: bytes) -> str:
    """First 100 bits of z as 20 base32 characters."""
    return base64.b32encode(z[:15]).decode("ascii")[:RECEIPT_CODE_LENGTH]


def encode_serial(value: int) -> str:
    return base64.b32encode(value.to_bytes(16, "big")).decode("ascii").rstrip("=")


def new_serial(rng: random.Random) -> str:
    """Random non-sequential 128-bit serial, 26 base32 characters."""
    return encode_serial(rng.getrandbits(128))
