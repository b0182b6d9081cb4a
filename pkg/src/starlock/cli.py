"""Operator command suite.

Subcommands mirror the election lifecycle:

  keygen        trustee key ceremony + election-office signing key
  simulate      run a scenario file; emits every election-day artifact
  tally         compliance reconciliation, decryptions, tally, re-sign
  verify        the independent observer's full board check
  audit         ballot-level comparison risk-limiting audit
  receipt-check resolve one take-home receipt against the board

Exit codes: 0 pass, 1 internal failure, 2 verification/audit failure,
3 usage or scenario-file error. The only environment variable consulted is
STARLOCK_GROUP (default group for keygen when --group is omitted).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys

from . import audit as audit_mod
from . import verifier as verifier_mod
from .board import Board
from .elgamal import Keypair, keygen
from .errors import (
    AmbiguousReceipt,
    CommitmentMismatch,
    MarginNotPositive,
    ScenarioError,
    StarlockError,
)
from .group import GROUPS, resolve_group
from .manifest import ElectionManifest
from .scenario import finish_election, load_scenario, run_scenario, write_artifacts
from .serialize import hex_to_int, int_to_hex
from .trustees import JointPublicKey, TrusteeShare, dkg

PASS, INTERNAL, FAIL, USAGE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse with the uniform usage-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE)


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- keygen ---------------------------------------------------------------------


def cmd_keygen(args) -> int:
    gp = resolve_group(args.group)
    rng = random.Random(args.seed)
    jpk, shares = dkg(args.n, args.k, gp, rng)
    office = keygen(gp, rng)
    os.makedirs(args.outdir, exist_ok=True)
    joint_path = os.path.join(args.outdir, "joint_key.json")
    _dump_json({**jpk.to_json(), "group": args.group}, joint_path)
    for share in shares:
        _dump_json(
            share.to_json(),
            os.path.join(args.outdir, f"trustee_share_{share.trustee_id}.json"),
        )
    office_path = os.path.join(args.outdir, "office_key.json")
    _dump_json(
        {"group": args.group, "sk": int_to_hex(office.sk), "pk": int_to_hex(office.pk)},
        office_path,
    )
    print(f"joint key ({args.k}-of-{args.n}, {args.group} group): {joint_path}")
    print(f"{len(shares)} trustee share file(s) and {office_path} written")
    return PASS


def _load_keys(keydir, expected_group):
    joint = _load_json(os.path.join(keydir, "joint_key.json"))
    if joint.get("group") != expected_group:
        raise StarlockError(
            f"key files are for group {joint.get('group')!r}, scenario wants "
            f"{expected_group!r}"
        )
    jpk = JointPublicKey.from_json(joint)
    office_obj = _load_json(os.path.join(keydir, "office_key.json"))
    office = Keypair(sk=hex_to_int(office_obj["sk"]), pk=hex_to_int(office_obj["pk"]))
    shares = []
    for i in range(1, jpk.n + 1):
        path = os.path.join(keydir, f"trustee_share_{i}.json")
        if os.path.exists(path):
            shares.append(TrusteeShare.from_json(_load_json(path)))
    return {"jpk": jpk, "office": office, "trustee_shares": shares}


# -- simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    keys = _load_keys(args.keys, scenario.group) if args.keys else None
    result = run_scenario(scenario, keys=keys)
    paths = write_artifacts(result, args.outdir)
    site = result["site"]
    counts = {"CAST": 0, "SPOILED": 0}
    for record in site.records.values():
        counts[record.status] = counts.get(record.status, 0) + 1
    print(f"simulated {len(scenario.voters)} voter(s): "
          f"{len(site.records)} ballot(s) produced, "
          f"{counts.get('CAST', 0)} cast, {counts.get('SPOILED', 0)} spoiled")
    print(f"board: {paths['board.jsonl']}")
    return PASS


# -- tally ------------------------------------------------------------------------


def cmd_tally(args) -> int:
    manifest = ElectionManifest.load(args.manifest)
    board = Board.load(args.board)
    shares = [TrusteeShare.from_json(_load_json(p)) for p in args.shares]
    office_obj = _load_json(args.office)
    office = Keypair(sk=hex_to_int(office_obj["sk"]), pk=hex_to_int(office_obj["pk"]))
    if office.pk != manifest.office_pk:
        raise StarlockError("office key does not match the election manifest")
    cvrs = _load_json(args.cvrs)
    papers = _load_json(args.papers)
    outcome = finish_election(
        board, manifest, shares, office, cvrs, papers, random.Random(args.seed)
    )
    board.write(args.board)
    compliance = outcome["compliance"]
    print(f"compliance: {compliance['cast_records']} cast record(s), "
          f"{compliance['papers']} paper(s) in box")
    for serial in compliance["cast_without_paper"]:
        print(f"  cast-without-paper: {serial} (demoted to UNTALLIED)")
    for serial in compliance["paper_without_record"]:
        print(f"  paper-without-record: {serial}")
    for cid, cols in sorted(outcome["tally"].result.items()):
        shown = ", ".join(f"{col}={n}" for col, n in sorted(cols.items()))
        print(f"{cid}: {shown}")
    print(f"tallied board re-signed: {args.board}")
    return PASS


# -- verify -----------------------------------------------------------------------


def cmd_verify(args) -> int:
    manifest = ElectionManifest.load(args.manifest)
    raw_lines = verifier_mod.read_board_lines(args.board)
    report = verifier_mod.verify_board(raw_lines, manifest)
    print(report.summary())
    if args.report:
        _dump_json(report.to_json(), args.report)
    return PASS if report.overall else FAIL


# -- audit ------------------------------------------------------------------------


def cmd_audit(args) -> int:
    manifest = ElectionManifest.load(args.manifest)
    lines = verifier_mod.parse_lines(verifier_mod.read_board_lines(args.board))
    cvrs = _load_json(args.cvrs)
    papers = _load_json(args.papers)
    published = _load_json(args.commitments) if args.commitments else None
    try:
        outcome = audit_mod.run_audit(
            lines, manifest, cvrs, papers, args.seed, args.alpha, published=published
        )
    except (CommitmentMismatch, MarginNotPositive, StarlockError) as exc:
        print(json.dumps({"verdict": "ABORTED", "reason": str(exc)}, indent=2))
        return FAIL
    printable = dict(outcome)
    if math.isinf(printable["p_value"]):
        printable["p_value"] = "inf"
    printable["trajectory"] = [
        {**step, "P_j": ("inf" if math.isinf(step["P_j"]) else step["P_j"])}
        for step in outcome["trajectory"]
    ]
    print(json.dumps(printable, indent=2))
    return PASS if outcome["verdict"] == audit_mod.CONFIRMED else FAIL


# -- receipt-check ------------------------------------------------------------------


def cmd_receipt_check(args) -> int:
    manifest = ElectionManifest.load(args.manifest)
    lines = verifier_mod.parse_lines(verifier_mod.read_board_lines(args.board))
    try:
        status, plaintext = verifier_mod.lookup_receipt(
            lines, manifest, args.terminal, args.code
        )
    except AmbiguousReceipt as exc:
        print(f"ambiguous receipt: {exc}")
        return FAIL
    if status == verifier_mod.NOT_FOUND:
        print(f"receipt {args.code} on terminal {args.terminal}: NOT FOUND")
        return FAIL
    print(f"receipt {args.code} on terminal {args.terminal}: {status}")
    if plaintext is not None:
        print(json.dumps(plaintext, indent=2, sort_keys=True))
    return PASS


# -- parser -------------------------------------------------------------------------


def _seed20(value: str) -> str:
    if len(value) != 20 or not value.isdigit():
        raise argparse.ArgumentTypeError("seed must be exactly 20 decimal digits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="starlock", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="trustee key ceremony and office signing key")
    p.add_argument("--n", type=int, required=True, help="number of trustees")
    p.add_argument("--k", type=int, required=True, help="decryption threshold")
    p.add_argument("--group", choices=sorted(GROUPS),
                   default=os.environ.get("STARLOCK_GROUP", "test"))
    p.add_argument("--seed", type=int, required=True, help="ceremony RNG seed")
    p.add_argument("--outdir", default=".", help="directory for key files")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("simulate", help="run a scenario end to end")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--keys", help="directory from keygen (default: derive from seed)")
    p.add_argument("--outdir", required=True, help="directory for run artifacts")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tally", help="reconcile, decrypt, tally, and re-sign")
    p.add_argument("--manifest", required=True)
    p.add_argument("--board", required=True)
    p.add_argument("--cvrs", required=True, help="official's private vote-record store")
    p.add_argument("--papers", required=True, help="ballot-box paper summaries")
    p.add_argument("--shares", nargs="+", required=True, help="trustee share files")
    p.add_argument("--office", required=True, help="office key file (signing)")
    p.add_argument("--seed", type=int, default=0, help="proof RNG seed")
    p.set_defaults(func=cmd_tally)

    p = sub.add_parser("verify", help="independent full-board verification")
    p.add_argument("--board", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("audit", help="risk-limiting comparison audit")
    p.add_argument("--board", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--cvrs", required=True)
    p.add_argument("--papers", required=True)
    p.add_argument("--commitments", help="published commitment file")
    p.add_argument("--seed", type=_seed20, required=True, help="20-digit dice seed")
    p.add_argument("--alpha", type=float, default=0.1, help="risk limit")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("receipt-check", help="resolve a voter receipt")
    p.add_argument("--board", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--terminal", required=True)
    p.add_argument("--code", required=True, help="20-character receipt code")
    p.set_defaults(func=cmd_receipt_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return USAGE
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename}", file=sys.stderr)
        return USAGE
    except StarlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
