"""Ballot styles, plaintext encoding, encryption, and well-formedness proofs.

A contest with selection limit L gets one 0/1 ciphertext per option plus L
padding columns that absorb undervotes, so the homomorphic contest sum always
encrypts exactly L and a single equality proof replaces a range proof. A
contest with a write-in slot carries one extra 0/1 counter column that sits
outside the sum and does not consume a selection; registered write-in
candidates are ordinary option columns.

Every Fiat-Shamir transcript is bound to (election_id, style_id, contest_id,
column id), so no proof can be replayed for a different column, contest,
style, or election.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .chaum_pedersen import (
    ChaumPedersenProof,
    ZeroOneProof,
    prove_eq_dlog,
    prove_zero_or_one,
    verify_eq_dlog,
    verify_zero_or_one,
)
from .elgamal import Ciphertext, add_many, encrypt_exp
from .errors import OvervoteRejected, UnknownOption
from .fiatshamir import DOMAIN_CONTEST_SUM
from .group import GroupParams
from .serialize import enc_int, enc_str

# Reserved column labels; option ids may not collide with these.
WRITE_IN_COLUMN = "(write-in)"
ABSTAIN_COLUMN = "(abstain)"
SUM_COLUMN = "(sum)"


def pad_column(j: int) -> str:
    return f"(pad{j})"


@dataclass(frozen=True)
class Contest:
    contest_id: str
    options: tuple
    limit: int = 1
    writein_slot: bool = False

    def __post_init__(self):
        if not self.contest_id:
            raise ValueError("contest_id must be nonempty")
        if len(self.options) < 1:
            raise ValueError(f"contest {self.contest_id} has no options")
        if len(set(self.options)) != len(self.options):
            raise ValueError(f"contest {self.contest_id} has duplicate options")
        for opt in self.options:
            if not opt or opt.startswith("("):
                raise ValueError(f"option id {opt!r} is reserved or empty")
        if not 1 <= self.limit <= len(self.options):
            raise ValueError(
                f"contest {self.contest_id}: limit {self.limit} outside [1, {len(self.options)}]"
            )
        object.__setattr__(self, "options", tuple(self.options))

    def to_json(self) -> dict:
        return {
            "contest_id": self.contest_id,
            "options": list(self.options),
            "limit": self.limit,
            "writein_slot": self.writein_slot,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Contest":
        return cls(
            contest_id=obj["contest_id"],
            options=tuple(obj["options"]),
            limit=int(obj["limit"]),
            writein_slot=bool(obj["writein_slot"]),
        )


@dataclass(frozen=True)
class BallotStyle:
    style_id: str
    contests: tuple

    def __post_init__(self):
        if not self.style_id:
            raise ValueError("style_id must be nonempty")
        ids = [c.contest_id for c in self.contests]
        if len(set(ids)) != len(ids):
            raise ValueError(f"style {self.style_id} repeats a contest id")
        object.__setattr__(self, "contests", tuple(self.contests))

    def contest(self, contest_id: str) -> Contest:
        for c in self.contests:
            if c.contest_id == contest_id:
                return c
        raise KeyError(contest_id)

    def to_json(self) -> dict:
        return {"style_id": self.style_id, "contests": [c.to_json() for c in self.contests]}

    @classmethod
    def from_json(cls, obj: dict) -> "BallotStyle":
        return cls(
            style_id=obj["style_id"],
            contests=tuple(Contest.from_json(c) for c in obj["contests"]),
        )


@dataclass(frozen=True)
class PlaintextBallot:
    """The voter's selections: real option ids per contest, plus the set of
    contests where the write-in slot was used."""

    style_id: str
    selections: dict
    writeins: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = {cid: tuple(sorted(set(opts))) for cid, opts in self.selections.items()}
        object.__setattr__(self, "selections", norm)
        object.__setattr__(self, "writeins", frozenset(self.writeins))

    def __eq__(self, other):
        if not isinstance(other, PlaintextBallot):
            return NotImplemented
        mine = {c: o for c, o in self.selections.items() if o}
        theirs = {c: o for c, o in other.selections.items() if o}
        return (
            self.style_id == other.style_id
            and mine == theirs
            and self.writeins == other.writeins
        )

    def to_json(self) -> dict:
        return {
            "style_id": self.style_id,
            "selections": {cid: list(opts) for cid, opts in sorted(self.selections.items())},
            "writeins": sorted(self.writeins),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlaintextBallot":
        return cls(
            style_id=obj["style_id"],
            selections={cid: tuple(opts) for cid, opts in obj["selections"].items()},
            writeins=frozenset(obj.get("writeins", [])),
        )

    @classmethod
    def from_raw_selections(cls, style_id: str, raw: dict) -> "PlaintextBallot":
        """Build from scenario-style selections where the write-in slot is the
        sentinel "(write-in)" inside a contest's selection list."""
        selections, writeins = {}, set()
        for cid, opts in raw.items():
            kept = []
            for opt in opts:
                if opt == WRITE_IN_COLUMN:
                    writeins.add(cid)
                else:
                    kept.append(opt)
            selections[cid] = tuple(kept)
        return cls(style_id=style_id, selections=selections, writeins=frozenset(writeins))


@dataclass(frozen=True)
class ContestRow:
    """Plaintext 0/1 encoding of one contest: options, padding, write-in."""

    option_bits: tuple
    padding_bits: tuple
    writein_bit: int | None


def encode(pb: PlaintextBallot, style: BallotStyle) -> dict:
    """Selection matrix per contest; padding absorbs undervotes so every row
    sums to exactly the contest limit."""
    if pb.style_id != style.style_id:
        raise UnknownOption(f"ballot for style {pb.style_id!r} against {style.style_id!r}")
    known = {c.contest_id for c in style.contests}
    for cid in pb.selections:
        if cid not in known and pb.selections[cid]:
            raise UnknownOption(f"selections name unknown contest {cid!r}")
    for cid in pb.writeins:
        if cid not in known:
            raise UnknownOption(f"write-in names unknown contest {cid!r}")

    rows = {}
    for contest in style.contests:
        chosen = set(pb.selections.get(contest.contest_id, ()))
        for opt in chosen:
            if opt not in contest.options:
                raise UnknownOption(f"contest {contest.contest_id}: unknown option {opt!r}")
        if len(chosen) > contest.limit:
            raise OvervoteRejected(
                f"contest {contest.contest_id}: {len(chosen)} selections exceed limit {contest.limit}"
            )
        writein_used = contest.contest_id in pb.writeins
        if writein_used and not contest.writein_slot:
            raise UnknownOption(f"contest {contest.contest_id} has no write-in slot")
        option_bits = tuple(1 if opt in chosen else 0 for opt in contest.options)
        undervotes = contest.limit - len(chosen)
        padding_bits = tuple(1 if j < undervotes else 0 for j in range(contest.limit))
        rows[contest.contest_id] = ContestRow(
            option_bits=option_bits,
            padding_bits=padding_bits,
            writein_bit=(1 if writein_used else 0) if contest.writein_slot else None,
        )
    return rows


@dataclass(frozen=True)
class EncryptedContest:
    contest_id: str
    option_cts: tuple
    padding_cts: tuple
    writein_ct: Ciphertext | None

    def all_columns(self, contest: Contest):
        """(column id, ciphertext) pairs in canonical order."""
        cols = list(zip(contest.options, self.option_cts))
        cols += [(pad_column(j), ct) for j, ct in enumerate(self.padding_cts)]
        if self.writein_ct is not None:
            cols.append((WRITE_IN_COLUMN, self.writein_ct))
        return cols

    def canonical_bytes(self) -> bytes:
        out = enc_str(self.contest_id)
        out += enc_int(len(self.option_cts))
        for ct in self.option_cts:
            out += ct.canonical_bytes()
        out += enc_int(len(self.padding_cts))
        for ct in self.padding_cts:
            out += ct.canonical_bytes()
        if self.writein_ct is None:
            out += enc_int(0)
        else:
            out += enc_int(1) + self.writein_ct.canonical_bytes()
        return out

    def to_json(self) -> dict:
        return {
            "contest_id": self.contest_id,
            "options": [ct.to_json() for ct in self.option_cts],
            "padding": [ct.to_json() for ct in self.padding_cts],
            "writein": self.writein_ct.to_json() if self.writein_ct else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EncryptedContest":
        return cls(
            contest_id=obj["contest_id"],
            option_cts=tuple(Ciphertext.from_json(c) for c in obj["options"]),
            padding_cts=tuple(Ciphertext.from_json(c) for c in obj["padding"]),
            writein_ct=Ciphertext.from_json(obj["writein"]) if obj.get("writein") else None,
        )


@dataclass(frozen=True)
class EncryptedBallot:
    style_id: str
    contests: tuple

    def contest(self, contest_id: str) -> EncryptedContest:
        for c in self.contests:
            if c.contest_id == contest_id:
                return c
        raise KeyError(contest_id)

    def canonical_bytes(self) -> bytes:
        out = enc_str(self.style_id) + enc_int(len(self.contests))
        for c in self.contests:
            out += c.canonical_bytes()
        return out

    def to_json(self) -> dict:
        return {"style_id": self.style_id, "contests": [c.to_json() for c in self.contests]}

    @classmethod
    def from_json(cls, obj: dict) -> "EncryptedBallot":
        return cls(
            style_id=obj["style_id"],
            contests=tuple(EncryptedContest.from_json(c) for c in obj["contests"]),
        )


@dataclass(frozen=True)
class ContestProof:
    contest_id: str
    option_proofs: tuple
    padding_proofs: tuple
    writein_proof: ZeroOneProof | None
    sum_proof: ChaumPedersenProof

    def canonical_bytes(self) -> bytes:
        out = enc_str(self.contest_id)
        out += enc_int(len(self.option_proofs))
        for pr in self.option_proofs:
            out += pr.canonical_bytes()
        out += enc_int(len(self.padding_proofs))
        for pr in self.padding_proofs:
            out += pr.canonical_bytes()
        if self.writein_proof is None:
            out += enc_int(0)
        else:
            out += enc_int(1) + self.writein_proof.canonical_bytes()
        out += self.sum_proof.canonical_bytes()
        return out

    def to_json(self) -> dict:
        return {
            "contest_id": self.contest_id,
            "options": [p.to_json() for p in self.option_proofs],
            "padding": [p.to_json() for p in self.padding_proofs],
            "writein": self.writein_proof.to_json() if self.writein_proof else None,
            "sum": self.sum_proof.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContestProof":
        return cls(
            contest_id=obj["contest_id"],
            option_proofs=tuple(ZeroOneProof.from_json(p) for p in obj["options"]),
            padding_proofs=tuple(ZeroOneProof.from_json(p) for p in obj["padding"]),
            writein_proof=ZeroOneProof.from_json(obj["writein"]) if obj.get("writein") else None,
            sum_proof=ChaumPedersenProof.from_json(obj["sum"]),
        )


@dataclass(frozen=True)
class WellFormednessProof:
    contests: tuple

    def canonical_bytes(self) -> bytes:
        out = enc_int(len(self.contests))
        for c in self.contests:
            out += c.canonical_bytes()
        return out

    def to_json(self) -> dict:
        return {"contests": [c.to_json() for c in self.contests]}

    @classmethod
    def from_json(cls, obj: dict) -> "WellFormednessProof":
        return cls(contests=tuple(ContestProof.from_json(c) for c in obj["contests"]))


def column_context(election_id: str, style_id: str, contest_id: str, column: str) -> bytes:
    return enc_str(election_id) + enc_str(style_id) + enc_str(contest_id) + enc_str(column)


def encrypt_ballot(
    pb: PlaintextBallot,
    style: BallotStyle,
    K: int,
    gp: GroupParams,
    rng: random.Random,
    election_id: str,
):
    """Encrypt column by column with fresh randomness, prove each column is a
    0/1 encryption, and prove each contest sum (options + padding) encrypts
    exactly the selection limit. Returns (EncryptedBallot, WellFormednessProof)."""
    rows = encode(pb, style)
    enc_contests, proof_contests = [], []
    for contest in style.contests:
        row = rows[contest.contest_id]
        sum_randomness = 0
        option_cts, option_proofs = [], []
        for opt, bit in zip(contest.options, row.option_bits):
            r = rng.randrange(1, gp.q)
            ct = encrypt_exp(bit, r, K, gp)
            ctx = column_context(election_id, style.style_id, contest.contest_id, opt)
            option_proofs.append(prove_zero_or_one(bit, r, ct, K, gp, rng, ctx))
            option_cts.append(ct)
            sum_randomness = (sum_randomness + r) % gp.q
        padding_cts, padding_proofs = [], []
        for j, bit in enumerate(row.padding_bits):
            r = rng.randrange(1, gp.q)
            ct = encrypt_exp(bit, r, K, gp)
            ctx = column_context(election_id, style.style_id, contest.contest_id, pad_column(j))
            padding_proofs.append(prove_zero_or_one(bit, r, ct, K, gp, rng, ctx))
            padding_cts.append(ct)
            sum_randomness = (sum_randomness + r) % gp.q
        writein_ct = writein_proof = None
        if row.writein_bit is not None:
            r = rng.randrange(1, gp.q)
            writein_ct = encrypt_exp(row.writein_bit, r, K, gp)
            ctx = column_context(
                election_id, style.style_id, contest.contest_id, WRITE_IN_COLUMN
            )
            writein_proof = prove_zero_or_one(row.writein_bit, r, writein_ct, K, gp, rng, ctx)

        # The options+padding product encrypts exactly the limit; prove it.
        total = add_many(option_cts + padding_cts, gp)
        target_b = total.b * pow(pow(gp.g, contest.limit, gp.p), -1, gp.p) % gp.p
        ctx = column_context(election_id, style.style_id, contest.contest_id, SUM_COLUMN)
        sum_proof = prove_eq_dlog(
            sum_randomness, gp.g, total.a, K, target_b, gp, rng,
            context=ctx, domain=DOMAIN_CONTEST_SUM,
        )

        enc_contests.append(
            EncryptedContest(
                contest_id=contest.contest_id,
                option_cts=tuple(option_cts),
                padding_cts=tuple(padding_cts),
                writein_ct=writein_ct,
            )
        )
        proof_contests.append(
            ContestProof(
                contest_id=contest.contest_id,
                option_proofs=tuple(option_proofs),
                padding_proofs=tuple(padding_proofs),
                writein_proof=writein_proof,
                sum_proof=sum_proof,
            )
        )
    eb = EncryptedBallot(style_id=style.style_id, contests=tuple(enc_contests))
    proof = WellFormednessProof(contests=tuple(proof_contests))
    return eb, proof


def verify_ballot(
    eb: EncryptedBallot,
    proof: WellFormednessProof,
    style: BallotStyle,
    K: int,
    gp: GroupParams,
    election_id: str,
) -> bool:
    """Recompute every Fiat-Shamir transcript and check every equation.

    Shape mismatches (wrong contest list, missing columns) are failures, not
    exceptions: a verifier must never crash on adversarial input.
    """
    if eb.style_id != style.style_id:
        return False
    if len(eb.contests) != len(style.contests) or len(proof.contests) != len(style.contests):
        return False
    for contest, enc, cpr in zip(style.contests, eb.contests, proof.contests):
        if enc.contest_id != contest.contest_id or cpr.contest_id != contest.contest_id:
            return False
        if len(enc.option_cts) != len(contest.options) or len(cpr.option_proofs) != len(contest.options):
            return False
        if len(enc.padding_cts) != contest.limit or len(cpr.padding_proofs) != contest.limit:
            return False
        if contest.writein_slot != (enc.writein_ct is not None):
            return False
        if contest.writein_slot != (cpr.writein_proof is not None):
            return False

        for opt, ct, pr in zip(contest.options, enc.option_cts, cpr.option_proofs):
            ctx = column_context(election_id, style.style_id, contest.contest_id, opt)
            if not verify_zero_or_one(pr, ct, K, gp, ctx):
                return False
        for j, (ct, pr) in enumerate(zip(enc.padding_cts, cpr.padding_proofs)):
            ctx = column_context(election_id, style.style_id, contest.contest_id, pad_column(j))
            if not verify_zero_or_one(pr, ct, K, gp, ctx):
                return False
        if contest.writein_slot:
            ctx = column_context(
                election_id, style.style_id, contest.contest_id, WRITE_IN_COLUMN
            )
            if not verify_zero_or_one(cpr.writein_proof, enc.writein_ct, K, gp, ctx):
                return False

        total = add_many(list(enc.option_cts) + list(enc.padding_cts), gp)
        target_b = total.b * pow(pow(gp.g, contest.limit, gp.p), -1, gp.p) % gp.p
        ctx = column_context(election_id, style.style_id, contest.contest_id, SUM_COLUMN)
        if not verify_eq_dlog(
            cpr.sum_proof, gp.g, total.a, K, target_b, gp,
            context=ctx, domain=DOMAIN_CONTEST_SUM,
        ):
            return False
    return True
