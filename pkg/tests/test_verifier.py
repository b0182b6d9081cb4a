"""Independent verification of a published election record.

Most cases start from the finished demo election. Tampered variants are
rebuilt with a fresh line chain and office signature, so only the deeper
checks (terminal chains, proofs, tally recomputation) can catch the edit.
"""

import json

import pytest

from helpers import board_raw_lines, demo_run, rechain
from starlock.ballot import PlaintextBallot
from starlock.errors import AmbiguousReceipt
from starlock.serialize import canonical_json
from starlock.verifier import (
    FOUND_CAST,
    FOUND_SPOILED,
    NOT_FOUND,
    check_line_chain,
    lookup_receipt,
    parse_lines,
    verify_board,
)

ALL_CHECKS = {
    "line_chain",
    "signature",
    "terminal_chain",
    "ballot_proofs",
    "decryptions",
    "tally",
    "sum_check",
}


def demo_board():
    result, _ = demo_run()
    return result, board_raw_lines(result["board"])


def retamper(result, mutate):
    """Parse the demo lines, apply mutate(lines) in place, rechain, re-sign."""
    lines = result["board"].lines()
    mutate(lines)
    return rechain(
        lines, result["manifest"].election_id, result["office"], result["manifest"].gp
    )


def failing_checks(report):
    return {item.check for item in report.failures()}


def test_honest_board_passes_every_check() -> None:
    result, raw = demo_board()
    report = verify_board(raw, result["manifest"])
    assert report.overall
    assert {item.check for item in report.items} == ALL_CHECKS
    text = report.summary()
    assert "PASS overall" in text
    assert "FAIL" not in text


def test_edited_line_breaks_the_chain_at_the_next_line() -> None:
    result, raw = demo_board()
    target = 3
    line = json.loads(raw[target])
    line["timestamp"] = str(int(line["timestamp"]) + 1)
    raw = raw[:target] + [canonical_json(line)] + raw[target + 1 :]
    items = check_line_chain(raw)
    assert not items[0].ok
    assert items[0].line == target + 1
    assert not verify_board(raw, result["manifest"]).overall


def test_deleted_and_reordered_lines_break_the_chain() -> None:
    result, raw = demo_board()
    deleted = raw[:5] + raw[6:]
    items = check_line_chain(deleted)
    assert not items[0].ok and items[0].line == 5
    swapped = raw[:]
    swapped[2], swapped[3] = swapped[3], swapped[2]
    items = check_line_chain(swapped)
    assert not items[0].ok and items[0].line == 2


def test_non_canonical_or_unparseable_lines_are_rejected() -> None:
    _, raw = demo_board()
    pretty = raw[:]
    pretty[1] = json.dumps(json.loads(raw[1]), sort_keys=True, separators=(", ", ": "))
    items = check_line_chain(pretty)
    assert not items[0].ok and "canonical" in items[0].detail
    garbage = raw[:]
    garbage[4] = "not json {"
    items = check_line_chain(garbage)
    assert not items[0].ok and items[0].line == 4


def test_rechained_substitution_is_caught_by_the_terminal_chain() -> None:
    result, _ = demo_board()
    entry_lines = [l for l in result["board"].lines() if l["kind"] == "entry"]
    same_terminal = [l for l in entry_lines if l["terminal"] == entry_lines[0]["terminal"]]
    assert len(same_terminal) >= 2
    donor, victim = same_terminal[0], same_terminal[1]
    victim_index = int(victim["index"])

    def mutate(lines):
        for line in lines:
            if line.get("kind") == "entry" and line["index"] == victim["index"]:
                line["ballot"] = donor["ballot"]
                line["proof"] = donor["proof"]

    raw = retamper(result, mutate)
    report = verify_board(raw, result["manifest"])
    assert not report.overall
    assert "line_chain" not in failing_checks(report)  # the rechain hid the edit there
    chain_fails = [i for i in report.failures() if i.check == "terminal_chain"]
    assert chain_fails and chain_fails[0].entry == victim_index


def test_forged_signature_key_is_rejected() -> None:
    result, raw = demo_board()
    import dataclasses

    manifest = dataclasses.replace(result["manifest"], office_pk=result["jpk"].K)
    report = verify_board(raw, manifest)
    assert "signature" in failing_checks(report)


def test_demotion_without_decryption_fails() -> None:
    result, _ = demo_board()
    cast_entry = next(
        i for i, line in result["board"].entries()
        if result["board"].effective_status(i) == "CAST"
    )

    def mutate(lines):
        lines.append({"kind": "status", "ref": str(cast_entry), "status": "UNTALLIED"})

    raw = retamper(result, mutate)
    report = verify_board(raw, result["manifest"])
    fails = failing_checks(report)
    assert "decryptions" in fails
    # the tally no longer matches the effective-CAST set either
    assert "tally" in fails


def test_forged_decryption_plaintext_fails() -> None:
    result, _ = demo_board()

    def mutate(lines):
        for line in lines:
            if line.get("kind") == "decryption":
                plain = line["plaintext"]
                cid = sorted(plain["selections"])[0]
                style = result["manifest"].style_map[plain["style_id"]]
                contest = style.contest(cid)
                current = set(plain["selections"][cid])
                plain["selections"][cid] = sorted(
                    set(list(current)[:-1]) | {next(o for o in contest.options if o not in current)}
                )
                return

    raw = retamper(result, mutate)
    report = verify_board(raw, result["manifest"])
    fails = [i for i in report.failures() if i.check == "decryptions"]
    assert fails and "plaintext summary mismatch" in fails[0].detail


def test_tally_tampering_fails() -> None:
    result, _ = demo_board()

    def bump_result(lines):
        for line in lines:
            if line.get("kind") == "tally":
                cid = sorted(line["result"])[0]
                col = sorted(line["result"][cid])[0]
                line["result"][cid][col] = str(int(line["result"][cid][col]) + 1)

    report = verify_board(retamper(result, bump_result), result["manifest"])
    assert "tally" in failing_checks(report)

    def bump_cast(lines):
        for line in lines:
            if line.get("kind") == "tally":
                cid = sorted(line["cast"])[0]
                line["cast"][cid] = str(int(line["cast"][cid]) + 1)

    report = verify_board(retamper(result, bump_cast), result["manifest"])
    assert "tally" in failing_checks(report)


def test_terminal_bookkeeping_failures() -> None:
    result, _ = demo_board()

    def unknown_terminal(lines):
        for line in lines:
            if line.get("kind") == "entry":
                line["terminal"] = "TX"
                return

    report = verify_board(retamper(result, unknown_terminal), result["manifest"])
    fails = [i for i in report.failures() if i.check == "terminal_chain"]
    assert fails and "unknown terminal" in fails[0].detail

    def double_close(lines):
        close = next(l for l in lines if l.get("kind") == "terminal_close")
        lines.append(dict(close))

    report = verify_board(retamper(result, double_close), result["manifest"])
    fails = [i for i in report.failures() if i.check == "terminal_chain"]
    assert fails and "closed twice" in fails[0].detail

    def drop_close(lines):
        idx = next(
            i for i, l in enumerate(lines) if l.get("kind") == "terminal_close"
        )
        del lines[idx]

    report = verify_board(retamper(result, drop_close), result["manifest"])
    fails = [i for i in report.failures() if i.check == "terminal_chain"]
    assert fails and "never closed" in fails[0].detail

    def wrong_final_z(lines):
        close = next(l for l in lines if l.get("kind") == "terminal_close")
        close["final_z"] = "00" * 32

    report = verify_board(retamper(result, wrong_final_z), result["manifest"])
    fails = [i for i in report.failures() if i.check == "terminal_chain"]
    assert fails and "final z mismatch" in fails[0].detail

    def wrong_produced(lines):
        close = next(l for l in lines if l.get("kind") == "terminal_close")
        close["produced"] = str(int(close["produced"]) + 1)

    report = verify_board(retamper(result, wrong_produced), result["manifest"])
    fails = [i for i in report.failures() if i.check == "terminal_chain"]
    assert fails and "produced count mismatch" in fails[0].detail


def test_every_scripted_receipt_resolves_to_its_status() -> None:
    result, raw = demo_board()
    lines = parse_lines(raw)
    manifest = result["manifest"]
    scenario = result["scenario"]
    assert result["receipts"], "demo must hand out receipts"
    for row in result["receipts"]:
        status, plaintext = lookup_receipt(lines, manifest, row["terminal"], row["code"])
        if row["status"] == "CAST":
            assert status == FOUND_CAST
            assert plaintext is None
        else:
            assert status == FOUND_SPOILED
            voter = scenario.voters[row["voter"]]
            raw_sel = voter.selections if row["session"] == "primary" else voter.revote
            intended = PlaintextBallot.from_raw_selections(voter.style, raw_sel)
            assert PlaintextBallot.from_json(plaintext) == intended


def test_receipt_misses() -> None:
    result, raw = demo_board()
    lines = parse_lines(raw)
    manifest = result["manifest"]
    row = result["receipts"][0]
    other_terminal = "T2" if row["terminal"] == "T1" else "T1"
    assert lookup_receipt(lines, manifest, other_terminal, row["code"]) == (NOT_FOUND, None)
    assert lookup_receipt(lines, manifest, row["terminal"], "A" * 20) == (NOT_FOUND, None)


def test_colliding_receipts_are_flagged_ambiguous() -> None:
    result, raw = demo_board()
    manifest = result["manifest"]
    z = "ab" * 32
    entry = {
        "kind": "entry", "index": "0", "terminal": "T1", "timestamp": "1",
        "status": "CAST", "z": z,
    }
    twin = dict(entry, index="1", timestamp="2")
    from starlock.chain import receipt_code

    code = receipt_code(bytes.fromhex(z))
    with pytest.raises(AmbiguousReceipt):
        lookup_receipt([entry, twin], manifest, "T1", code)
