"""The public bulletin board.

An append-only JSON-lines file. Every line carries the SHA-256 of the
previous line, so truncation or in-place edits are detectable independently
of the per-terminal ballot chains. Ballot records are published without
serial numbers. Status never mutates a published entry: changes are new
supersession lines referencing the entry index. The election office signs
the hash of the final line, which transitively covers every byte above it.

Line kinds: header, entry, status, decryption, terminal_close, tally,
signature.
"""

from __future__ import annotations

import json
import random

from .ballot import (
    ABSTAIN_COLUMN,
    WRITE_IN_COLUMN,
    BallotStyle,
    EncryptedBallot,
    WellFormednessProof,
    verify_ballot,
)
from .elgamal import Keypair, add_many, identity_ciphertext
from .errors import NotSpoiled, RejectInvalidProof, StarlockError
from .group import GroupParams
from .pollsite import CAST, SPOILED, EncryptedBallotRecord
from .schnorr import SchnorrSignature, sign
from .serialize import canonical_json, enc_bytes, enc_int, enc_str, sha256_hex
from .trustees import DecryptionShare, JointPublicKey, combine_shares, partial_decrypt

UNTALLIED = "UNTALLIED"
GENESIS_HASH = "0" * 64


def tally_context(election_id: str, contest_id: str, column: str) -> bytes:
    return enc_str(election_id) + enc_str("tally") + enc_str(contest_id) + enc_str(column)


def spoiled_context(election_id: str, entry_index: int, contest_id: str, column: str) -> bytes:
    return (
        enc_str(election_id)
        + enc_str("spoiled")
        + enc_int(entry_index)
        + enc_str(contest_id)
        + enc_str(column)
    )


class Board:
    """Single-writer append-only board. Readers get copies, never references."""

    def __init__(self, election_id: str):
        self.election_id = election_id
        self._lines = []  # (line_dict, line_hash)
        self._entry_lines = []  # line positions of ballot entries, by entry index
        self._append({"kind": "header", "election_id": election_id, "version": "1"})

    # -- low-level chain ------------------------------------------------------

    def _append(self, obj: dict) -> int:
        prev = self._lines[-1][1] if self._lines else GENESIS_HASH
        line = dict(obj)
        line["prev"] = prev
        text = canonical_json(line)
        self._lines.append((line, sha256_hex(text.encode("utf-8"))))
        return len(self._lines) - 1

    @property
    def last_hash(self) -> str:
        return self._lines[-1][1]

    def lines(self):
        """Deep copies of every line, in order."""
        return [json.loads(canonical_json(line)) for line, _ in self._lines]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line, _ in self._lines:
                fh.write(canonical_json(line) + "\n")

    @classmethod
    def load(cls, path) -> "Board":
        """Reload a board file, refusing files whose line chain is broken.
        (The independent verifier has its own parser; this loader is for the
        officials' tally tooling.)"""
        board = cls.__new__(cls)
        board._lines = []
        board._entry_lines = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh):
                line = json.loads(raw)
                prev = board._lines[-1][1] if board._lines else GENESIS_HASH
                if line.get("prev") != prev:
                    raise StarlockError(f"board line {lineno}: broken hash chain")
                text = canonical_json(line)
                if text != raw.rstrip("\n"):
                    raise StarlockError(f"board line {lineno}: not in canonical form")
                board._lines.append((line, sha256_hex(text.encode("utf-8"))))
                if line["kind"] == "entry":
                    board._entry_lines.append(len(board._lines) - 1)
        if not board._lines or board._lines[0][0]["kind"] != "header":
            raise StarlockError("board file missing header line")
        board.election_id = board._lines[0][0]["election_id"]
        return board

    # -- publication -----------------------------------------------------------

    def publish_entry(
        self,
        record: EncryptedBallotRecord,
        status: str,
        style: BallotStyle,
        joint_key: int,
        gp: GroupParams,
        reason: str | None = None,
    ) -> int:
        """Append a ballot record (serial never present). Returns the entry
        index used by status/decryption supersession lines."""
        if status not in (CAST, SPOILED, UNTALLIED):
            raise ValueError(f"cannot publish entry with status {status!r}")
        if not verify_ballot(
            record.ballot, record.proof, style, joint_key, gp, self.election_id
        ):
            raise RejectInvalidProof("ballot record failed proof verification")
        index = len(self._entry_lines)
        line = {
            "kind": "entry",
            "index": str(index),
            "terminal": record.terminal_id,
            "timestamp": str(record.timestamp),
            "status": status,
            "z": record.z.hex(),
            "ballot": record.ballot.to_json(),
            "proof": record.proof.to_json(),
        }
        if reason is not None:
            line["reason"] = reason
        pos = self._append(line)
        self._entry_lines.append(pos)
        return index

    def append_status(self, entry_index: int, status: str, reason: str | None = None) -> int:
        if not 0 <= entry_index < len(self._entry_lines):
            raise StarlockError(f"no entry {entry_index}")
        line = {"kind": "status", "ref": str(entry_index), "status": status}
        if reason is not None:
            line["reason"] = reason
        return self._append(line)

    def append_decryption(self, entry_index: int, columns: list, plaintext: dict) -> int:
        if not 0 <= entry_index < len(self._entry_lines):
            raise StarlockError(f"no entry {entry_index}")
        return self._append(
            {
                "kind": "decryption",
                "ref": str(entry_index),
                "columns": columns,
                "plaintext": plaintext,
            }
        )

    def append_terminal_close(self, terminal_id: str, final_z_hex: str, produced: int) -> int:
        return self._append(
            {
                "kind": "terminal_close",
                "terminal": terminal_id,
                "final_z": final_z_hex,
                "produced": str(produced),
            }
        )

    def append_tally(self, tally: "TallyRecord") -> int:
        return self._append(tally.to_line())

    def sign_board(self, office: Keypair, gp: GroupParams) -> int:
        """Sign the running chain head; transitively covers the whole file."""
        message = enc_str(self.election_id) + enc_bytes(bytes.fromhex(self.last_hash))
        sig = sign(message, office, gp)
        line = {"kind": "signature", "signer": "election-office", "sig": sig.to_json()}
        return self._append(line)

    # -- reading ------------------------------------------------------------------

    def entries(self):
        """(entry_index, line dict) pairs in publication order."""
        return [(i, json.loads(canonical_json(self._lines[pos][0])))
                for i, pos in enumerate(self._entry_lines)]

    def effective_status(self, entry_index: int) -> str:
        pos = self._entry_lines[entry_index]
        status = self._lines[pos][0]["status"]
        for line, _ in self._lines:
            if line["kind"] == "status" and int(line["ref"]) == entry_index:
                status = line["status"]
        return status

    def entry_record(self, entry_index: int):
        line = self._lines[self._entry_lines[entry_index]][0]
        return (
            EncryptedBallot.from_json(line["ballot"]),
            WellFormednessProof.from_json(line["proof"]),
        )


# -- aggregation and decryption ----------------------------------------------------


def contest_columns(style_map: dict):
    """Canonical tally columns per contest across all styles: options in
    contest order, then "(abstain)", then "(write-in)" when the slot exists.
    Contests shared between styles must be defined identically."""
    contests = {}
    order = []
    for style in style_map.values():
        for contest in style.contests:
            seen = contests.get(contest.contest_id)
            if seen is None:
                contests[contest.contest_id] = contest
                order.append(contest.contest_id)
            elif seen != contest:
                raise StarlockError(
                    f"contest {contest.contest_id} defined differently across styles"
                )
    out = {}
    for cid in order:
        contest = contests[cid]
        columns = list(contest.options) + [ABSTAIN_COLUMN]
        if contest.writein_slot:
            columns.append(WRITE_IN_COLUMN)
        out[cid] = (contest, columns)
    return out


def aggregate(board: Board, style_map: dict, gp: GroupParams):
    """Componentwise homomorphic fold over effective-CAST entries.

    Returns {contest_id: {"columns": {column: Ciphertext}, "cast_count": int,
    "contest": Contest}}. All padding columns fold into one "(abstain)"
    ciphertext. Zero cast ballots leave the identity encryption (1, 1)."""
    layout = contest_columns(style_map)
    agg = {
        cid: {
            "contest": contest,
            "columns": {col: identity_ciphertext() for col in columns},
            "cast_count": 0,
        }
        for cid, (contest, columns) in layout.items()
    }
    for index, line in board.entries():
        if board.effective_status(index) != CAST:
            continue
        ballot = EncryptedBallot.from_json(line["ballot"])
        style = style_map[ballot.style_id]
        for contest, enc in zip(style.contests, ballot.contests):
            bucket = agg[contest.contest_id]
            bucket["cast_count"] += 1
            cols = bucket["columns"]
            for opt, ct in zip(contest.options, enc.option_cts):
                cols[opt] = add_many([cols[opt], ct], gp)
            for ct in enc.padding_cts:
                cols[ABSTAIN_COLUMN] = add_many([cols[ABSTAIN_COLUMN], ct], gp)
            if contest.writein_slot:
                cols[WRITE_IN_COLUMN] = add_many([cols[WRITE_IN_COLUMN], enc.writein_ct], gp)
    return agg


class TallyRecord:
    """Aggregate ciphertexts, decryption shares with proofs, and counts."""

    def __init__(self, columns: list, result: dict, cast_counts: dict):
        self.columns = columns  # dicts: contest, column, ciphertext, shares, count
        self.result = result  # {contest: {column: int}}
        self.cast_counts = cast_counts  # {contest: int}

    def to_line(self) -> dict:
        return {
            "kind": "tally",
            "columns": self.columns,
            "result": {
                cid: {col: str(n) for col, n in sorted(cols.items())}
                for cid, cols in sorted(self.result.items())
            },
            "cast": {cid: str(n) for cid, n in sorted(self.cast_counts.items())},
        }

    @classmethod
    def from_line(cls, line: dict) -> "TallyRecord":
        return cls(
            columns=line["columns"],
            result={
                cid: {col: int(n) for col, n in cols.items()}
                for cid, cols in line["result"].items()
            },
            cast_counts={cid: int(n) for cid, n in line["cast"].items()},
        )


def decrypt_tally(
    board: Board,
    style_map: dict,
    trustee_shares,
    jpk: JointPublicKey,
    gp: GroupParams,
    rng: random.Random,
) -> TallyRecord:
    """Partial-decrypt every aggregate column with each supplied trustee
    share and combine. InsufficientShares/BadShareProof propagate from the
    combine step."""
    agg = aggregate(board, style_map, gp)
    columns, result, cast_counts = [], {}, {}
    for cid, bucket in agg.items():
        contest = bucket["contest"]
        n_cast = bucket["cast_count"]
        cast_counts[cid] = n_cast
        result[cid] = {}
        for column, ct in bucket["columns"].items():
            context = tally_context(board.election_id, cid, column)
            shares = [
                partial_decrypt(ct, ts, gp, rng, context) for ts in trustee_shares
            ]
            bound = n_cast * contest.limit if column == ABSTAIN_COLUMN else n_cast
            count = combine_shares(ct, shares, jpk, bound, gp, context)
            result[cid][column] = count
            columns.append(
                {
                    "contest": cid,
                    "column": column,
                    "ciphertext": ct.to_json(),
                    "shares": [s.to_json() for s in shares],
                    "count": str(count),
                }
            )
    return TallyRecord(columns=columns, result=result, cast_counts=cast_counts)


def decrypt_spoiled(
    board: Board,
    entry_index: int,
    style_map: dict,
    trustee_shares,
    jpk: JointPublicKey,
    gp: GroupParams,
    rng: random.Random,
):
    """Column-by-column verifiable decryption of a spoiled (or untallied)
    entry. Returns (columns, plaintext summary) ready for a decryption line."""
    status = board.effective_status(entry_index)
    if status not in (SPOILED, UNTALLIED):
        raise NotSpoiled(f"entry {entry_index} is {status}")
    ballot, _ = board.entry_record(entry_index)
    style = style_map[ballot.style_id]
    columns = []
    selections, writeins = {}, []
    for contest, enc in zip(style.contests, ballot.contests):
        chosen = []
        for column, ct in enc.all_columns(contest):
            context = spoiled_context(board.election_id, entry_index, contest.contest_id, column)
            shares = [partial_decrypt(ct, ts, gp, rng, context) for ts in trustee_shares]
            bit = combine_shares(ct, shares, jpk, 1, gp, context)
            columns.append(
                {
                    "contest": contest.contest_id,
                    "column": column,
                    "ciphertext": ct.to_json(),
                    "shares": [s.to_json() for s in shares],
                    "bit": str(bit),
                }
            )
            if bit == 1 and column in contest.options:
                chosen.append(column)
            if bit == 1 and column == WRITE_IN_COLUMN:
                writeins.append(contest.contest_id)
        selections[contest.contest_id] = sorted(chosen)
    plaintext = {
        "style_id": ballot.style_id,
        "selections": selections,
        "writeins": sorted(writeins),
    }
    return columns, plaintext


def verify_board_signature(lines: list, office_pk: int, gp: GroupParams, election_id: str) -> bool:
    """Check the last line is a signature over the chain head. Works on
    parsed line dicts (the public file format)."""
    from .schnorr import verify_sig

    if not lines or lines[-1].get("kind") != "signature":
        return False
    prev_hash = lines[-1]["prev"]
    message = enc_str(election_id) + enc_bytes(bytes.fromhex(prev_hash))
    sig = SchnorrSignature.from_json(lines[-1]["sig"])
    return verify_sig(message, sig, office_pk, gp)
