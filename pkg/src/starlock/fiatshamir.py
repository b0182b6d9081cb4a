"""Fiat-Shamir challenge derivation.

Every non-interactive proof and signature in the toolkit hashes a domain tag
followed by its full transcript; the digest is read big-endian and reduced
mod q. Distinct domain tags keep a transcript valid for one proof type only.
"""

from __future__ import annotations

from .group import GroupParams
from .serialize import sha256

DOMAIN_EQ_DLOG = b"starlock/v1/eq-dlog"
DOMAIN_ZERO_ONE = b"starlock/v1/zero-or-one"
DOMAIN_CONTEST_SUM = b"starlock/v1/contest-sum"
DOMAIN_DECRYPT_SHARE = b"starlock/v1/decrypt-share"
DOMAIN_SIGNATURE = b"starlock/v1/signature"
DOMAIN_NONCE = b"starlock/v1/nonce"
DOMAIN_CHAIN_SEED = b"starlock/v1/chain-seed"
DOMAIN_COMMITMENT = b"starlock/v1/cvr-commitment"


def challenge_bytes(domain_tag: bytes, transcript: bytes) -> bytes:
    return sha256(domain_tag + transcript)


def fiat_shamir_challenge(domain_tag: bytes, transcript: bytes, gp: GroupParams) -> int:
    """SHA-256(domain_tag || transcript), big-endian, reduced mod q."""
    return int.from_bytes(challenge_bytes(domain_tag, transcript), "big") % gp.q
