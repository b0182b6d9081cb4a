"""Shared builders for the test suite.

Everything here is deterministic: fixed seeds in, identical artifacts out.
The demo election is cached per test session and must be treated as
read-only; tests that tamper with it must copy its lines first.
"""

from __future__ import annotations

import random

from starlock.audit import build_cvrs
from starlock.ballot import BallotStyle, Contest, PlaintextBallot, encrypt_ballot
from starlock.board import Board
from starlock.chain import chain_hash, initial_chain_seed
from starlock.elgamal import keygen
from starlock.group import TEST_GROUP
from starlock.manifest import ElectionManifest
from starlock.pollsite import CAST, EncryptedBallotRecord
from starlock.scenario import (
    Scenario,
    Voter,
    finish_election,
    make_demo_scenario,
    run_scenario,
)
from starlock.schnorr import sign
from starlock.serialize import canonical_json, enc_bytes, enc_str, sha256_hex
from starlock.trustees import dkg

_cache = {}


def finish(result, seed=0):
    """Run the officials' post-close pipeline on a run_scenario result."""
    return finish_election(
        result["board"],
        result["manifest"],
        result["trustee_shares"],
        result["office"],
        result["cvrs"],
        result["papers"],
        random.Random(seed),
    )


def demo_run():
    """One finished demo election, shared read-only across tests."""
    if "demo" not in _cache:
        result = run_scenario(make_demo_scenario())
        outcome = finish(result, seed=99)
        _cache["demo"] = (result, outcome)
    return _cache["demo"]


def board_raw_lines(board):
    """The board file's text lines, as the verifier would read them."""
    return [canonical_json(line) for line in board.lines()]


def rechain(lines, election_id, office, gp):
    """Rebuild the prev-hash chain over edited line dicts and re-sign, so only
    the deeper checks (terminal chains, proofs, tally) can notice the edit.
    Drops any trailing signature line and appends a fresh one."""
    body = [dict(line) for line in lines]
    while body and body[-1].get("kind") == "signature":
        body = body[:-1]
    out = []
    prev = "0" * 64
    for line in body:
        line["prev"] = prev
        text = canonical_json(line)
        prev = sha256_hex(text.encode("utf-8"))
        out.append(text)
    message = enc_str(election_id) + enc_bytes(bytes.fromhex(prev))
    sig = sign(message, office, gp)
    out.append(
        canonical_json(
            {"kind": "signature", "signer": "election-office", "sig": sig.to_json(), "prev": prev}
        )
    )
    return out


def synthetic_comparison_record(n=100, winner_votes=55, flips=0, cvr_seed=4242):
    """A minimal published record for exercising the audit layer alone.

    n CAST entries over one two-option contest "race": the first winner_votes
    records vote A, the rest B, and the reported tally says so. The paper
    summaries agree except that the first `flips` A-voters' papers read B.
    Returns (board lines, manifest, cvr store, papers)."""
    gp = TEST_GROUP
    rng = random.Random(1)
    jpk, _ = dkg(1, 1, gp, rng)
    office = keygen(gp, rng)
    style = BallotStyle(
        style_id="s", contests=(Contest(contest_id="race", options=("A", "B"), limit=1),)
    )
    manifest = ElectionManifest(
        election_id="audit-lab",
        gp=gp,
        jpk=jpk,
        office_pk=office.pk,
        styles=(style,),
        terminal_seeds={},
        salt=b"\x00" * 16,
        ttl=600,
    )
    records, papers = [], []
    for i in range(n):
        reported = "A" if i < winner_votes else "B"
        on_paper = "B" if i < flips else reported
        serial = f"S{i:04d}"
        records.append(
            {
                "serial": serial,
                "index": i,
                "plaintext": {"style_id": "s", "selections": {"race": [reported]}, "writeins": []},
            }
        )
        papers.append(
            {"serial": serial, "contests": {"race": {"selections": [on_paper], "writein": False}}}
        )
    cvrs = build_cvrs(records, manifest, random.Random(cvr_seed))
    lines = [{"kind": "entry", "index": str(i), "status": "CAST"} for i in range(n)]
    lines.append(
        {
            "kind": "tally",
            "result": {
                "race": {"A": str(winner_votes), "B": str(n - winner_votes), "(abstain)": "0"}
            },
        }
    )
    return lines, manifest, cvrs, papers


def margin_scenario(trial, rng):
    """Ten honest cast ballots over one or two two-option contests, winner
    margin at least six, every column count at most ten."""
    n_contests = rng.randint(1, 2)
    contests, decks = [], {}
    for c in range(n_contests):
        cid = f"race{c}"
        contests.append(Contest(contest_id=cid, options=(f"r{c}a", f"r{c}b"), limit=1))
        w = rng.randint(8, 10)
        deck = [f"r{c}a"] * w + [f"r{c}b"] * (10 - w)
        rng.shuffle(deck)
        decks[cid] = deck
    style = BallotStyle(style_id="m", contests=tuple(contests))
    voters = tuple(
        Voter("m", {cid: [decks[cid][i]] for cid in decks}) for i in range(10)
    )
    return Scenario(
        election_id=f"margin-{trial}",
        group="test",
        trustees=(3, 2),
        seed=rng.randrange(2**32),
        styles=(style,),
        terminals=("T1", "T2"),
        voters=voters,
    )


def hundred_entry_board():
    """A signed publication-stage board with 100 CAST entries on one terminal
    (11 options so no tally column could exceed ten), plus its manifest and
    the office keypair for re-signing tampered variants."""
    if "hundred" in _cache:
        return _cache["hundred"]
    gp = TEST_GROUP
    rng = random.Random(404)
    jpk, _ = dkg(1, 1, gp, rng)
    office = keygen(gp, rng)
    contest = Contest(contest_id="race", options=tuple(f"o{j}" for j in range(11)), limit=1)
    style = BallotStyle(style_id="s", contests=(contest,))
    salt = b"\x42" * 16
    board = Board("tamper-lab")
    z = initial_chain_seed("tamper-lab", gp, jpk.K, salt, "T1")
    seeds = {"T1": z.hex()}
    for i in range(100):
        pb = PlaintextBallot(style_id="s", selections={"race": (f"o{i % 11}",)})
        eb, proof = encrypt_ballot(pb, style, jpk.K, gp, rng, "tamper-lab")
        z = chain_hash(eb, proof, "T1", z)
        record = EncryptedBallotRecord(
            ballot=eb, proof=proof, terminal_id="T1", z=z, timestamp=i + 1
        )
        board.publish_entry(record, CAST, style, jpk.K, gp)
    board.append_terminal_close("T1", z.hex(), 100)
    board.sign_board(office, gp)
    manifest = ElectionManifest(
        election_id="tamper-lab",
        gp=gp,
        jpk=jpk,
        office_pk=office.pk,
        styles=(style,),
        terminal_seeds=seeds,
        salt=salt,
        ttl=600,
    )
    _cache["hundred"] = (board, manifest, office)
    return _cache["hundred"]
