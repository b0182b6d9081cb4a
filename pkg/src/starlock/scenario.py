"""Scenario files and the deterministic end-to-end election runner.

A scenario is a JSON description of one simulated election day: group
choice, trustee threshold, ballot styles, terminals, a scripted voter
sequence, cheat and fault injections, and a mandatory RNG seed. Running a
scenario produces every artifact of a real election: the election manifest,
the signed bulletin board, the judge-station event log, the physical-box
paper summaries, the official's private vote-record store, the published
commitments, and the voters' receipts. Identical scenario bytes produce
byte-identical boards.

finish_election is the officials' post-close step: compliance
reconciliation, demotion of paper-less records, verifiable decryption of
every spoiled record, the homomorphic tally, and a fresh signature.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .audit import build_cvrs, compliance_check, interpretation, published_commitments
from .ballot import BallotStyle, PlaintextBallot
from .board import UNTALLIED, Board, decrypt_spoiled, decrypt_tally
from .elgamal import Keypair, keygen
from .errors import ScenarioError
from .group import GROUPS, resolve_group
from .manifest import ElectionManifest
from .pollsite import (
    ACCEPT,
    CAST,
    REJECT,
    SPOILED,
    SPOIL_CHALLENGE,
    SPOIL_VOTER,
    FaultInjector,
    PollSite,
)
from .trustees import dkg

ACTIONS = ("cast", "spoil", "challenge", "abandon", "provisional")

SALT_BYTES = 16


@dataclass
class Voter:
    style: str
    selections: dict
    action: str = "cast"
    terminal: str | None = None
    revote: dict | None = None
    adjudication: str | None = None

    def to_json(self) -> dict:
        out = {"style": self.style, "selections": self.selections, "action": self.action}
        if self.terminal is not None:
            out["terminal"] = self.terminal
        if self.revote is not None:
            out["revote"] = self.revote
        if self.adjudication is not None:
            out["adjudication"] = self.adjudication
        return out


@dataclass
class Scenario:
    election_id: str
    group: str
    trustees: tuple  # (n, k)
    seed: int
    styles: tuple
    terminals: tuple
    voters: tuple
    ttl: int = 600
    rigged_terminals: tuple = ()
    lost_papers: tuple = ()  # voter indices whose final paper vanishes
    dropped_scans: tuple = ()  # voter indices whose final scan message is lost
    duplicated_scans: tuple = ()  # voter indices whose scan message arrives twice
    paper_overrides: tuple = ()  # ({"voter": i, "contests": {...}}, ...)
    paper_noise_rate: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.group not in GROUPS:
            raise ScenarioError(f"unknown group {self.group!r}")
        n, k = self.trustees
        if not (isinstance(n, int) and isinstance(k, int)):
            raise ScenarioError("trustee counts must be integers")
        if not isinstance(self.seed, int):
            raise ScenarioError("scenario seed is mandatory and must be an integer")
        if not self.styles:
            raise ScenarioError("at least one ballot style required")
        style_ids = {s.style_id for s in self.styles}
        if len(style_ids) != len(self.styles):
            raise ScenarioError("duplicate style ids")
        if not self.terminals or len(set(self.terminals)) != len(self.terminals):
            raise ScenarioError("terminals must be nonempty and unique")
        for t in self.rigged_terminals:
            if t not in self.terminals:
                raise ScenarioError(f"rigged terminal {t!r} is not a terminal")
        for i, voter in enumerate(self.voters):
            if voter.style not in style_ids:
                raise ScenarioError(f"voter {i} references unknown style {voter.style!r}")
            if voter.action not in ACTIONS:
                raise ScenarioError(f"voter {i} has unknown action {voter.action!r}")
            if voter.terminal is not None and voter.terminal not in self.terminals:
                raise ScenarioError(f"voter {i} references unknown terminal")
            if voter.revote is not None and voter.action not in ("spoil", "challenge"):
                raise ScenarioError(f"voter {i}: revote only follows a spoil or challenge")
            if voter.adjudication is not None:
                if voter.action != "provisional":
                    raise ScenarioError(f"voter {i}: adjudication requires a provisional vote")
                if voter.adjudication not in (ACCEPT, REJECT):
                    raise ScenarioError(f"voter {i}: adjudication must be ACCEPT or REJECT")
        n_voters = len(self.voters)
        for name, indices in (
            ("lost_papers", self.lost_papers),
            ("dropped_scans", self.dropped_scans),
            ("duplicated_scans", self.duplicated_scans),
        ):
            for idx in indices:
                if not (isinstance(idx, int) and 0 <= idx < n_voters):
                    raise ScenarioError(f"{name} index {idx!r} out of range")
        for override in self.paper_overrides:
            idx = override.get("voter")
            if not (isinstance(idx, int) and 0 <= idx < n_voters):
                raise ScenarioError(f"paper override voter {idx!r} out of range")
            if "contests" not in override:
                raise ScenarioError("paper override needs a contests map")
        if not 0.0 <= self.paper_noise_rate <= 1.0:
            raise ScenarioError("paper_noise_rate must be in [0, 1]")

    def to_json(self) -> dict:
        return {
            "election_id": self.election_id,
            "group": self.group,
            "trustees": {"n": self.trustees[0], "k": self.trustees[1]},
            "seed": self.seed,
            "ttl": self.ttl,
            "styles": [s.to_json() for s in self.styles],
            "terminals": list(self.terminals),
            "voters": [v.to_json() for v in self.voters],
            "rigged_terminals": list(self.rigged_terminals),
            "faults": {
                "lost_papers": list(self.lost_papers),
                "dropped_scans": list(self.dropped_scans),
                "duplicated_scans": list(self.duplicated_scans),
            },
            "paper_overrides": list(self.paper_overrides),
            "paper_noise_rate": self.paper_noise_rate,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        try:
            trustees = obj.get("trustees", {})
            styles = tuple(BallotStyle.from_json(s) for s in obj["styles"])
            voters = tuple(
                Voter(
                    style=v["style"],
                    selections=v.get("selections", {}),
                    action=v.get("action", "cast"),
                    terminal=v.get("terminal"),
                    revote=v.get("revote"),
                    adjudication=v.get("adjudication"),
                )
                for v in obj.get("voters", [])
            )
            faults = obj.get("faults", {})
            return cls(
                election_id=obj.get("election_id", "starlock-election"),
                group=obj.get("group", "test"),
                trustees=(trustees.get("n", 1), trustees.get("k", 1)),
                seed=obj["seed"],
                ttl=obj.get("ttl", 600),
                styles=styles,
                terminals=tuple(obj.get("terminals", ["T1"])),
                voters=voters,
                rigged_terminals=tuple(obj.get("rigged_terminals", [])),
                lost_papers=tuple(faults.get("lost_papers", [])),
                dropped_scans=tuple(faults.get("dropped_scans", [])),
                duplicated_scans=tuple(faults.get("duplicated_scans", [])),
                paper_overrides=tuple(obj.get("paper_overrides", [])),
                paper_noise_rate=float(obj.get("paper_noise_rate", 0.0)),
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario file: {exc}") from None


def load_scenario(path) -> Scenario:
    import json

    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    return Scenario.from_json(obj)


def make_keys(scenario: Scenario):
    """Key material derived deterministically from the scenario seed (the
    library-convenience path; the CLI generates keys as a separate step)."""
    gp = resolve_group(scenario.group)
    rng = random.Random(("keys", scenario.seed).__repr__())
    n, k = scenario.trustees
    jpk, shares = dkg(n, k, gp, rng)
    office = keygen(gp, rng)
    return {"jpk": jpk, "trustee_shares": shares, "office": office}


def run_scenario(scenario: Scenario, keys=None) -> dict:
    """Simulate the full election day and publish the board.

    Returns the complete artifact set; write_artifacts serializes it."""
    gp = resolve_group(scenario.group)
    if keys is None:
        keys = make_keys(scenario)
    jpk, office = keys["jpk"], keys["office"]
    rng = random.Random(scenario.seed)
    salt = rng.getrandbits(8 * SALT_BYTES).to_bytes(SALT_BYTES, "big")
    styles = {s.style_id: s for s in scenario.styles}
    site = PollSite(
        election_id=scenario.election_id,
        gp=gp,
        joint_key=jpk.K,
        styles=styles,
        terminal_ids=scenario.terminals,
        salt=salt,
        rng=rng,
        ttl=scenario.ttl,
        injector=FaultInjector(),
        rigged_terminals=scenario.rigged_terminals,
    )
    manifest = ElectionManifest(
        election_id=scenario.election_id,
        gp=gp,
        jpk=jpk,
        office_pk=office.pk,
        styles=tuple(scenario.styles),
        terminal_seeds={tid: z.hex() for tid, z in site.initial_seeds.items()},
        salt=salt,
        ttl=scenario.ttl,
    )

    receipts = []
    challenges = []
    final_serial = {}  # voter index -> serial of their last produced ballot
    lost = set(scenario.lost_papers)
    dropped = set(scenario.dropped_scans)
    duplicated = set(scenario.duplicated_scans)

    def session(i, voter, terminal, selections, which):
        pb = PlaintextBallot.from_raw_selections(voter.style, selections)
        token = site.issue_token(voter.style, provisional=(voter.action == "provisional"))
        record, receipt, summary = site.vote_session(terminal, token.code, pb)
        serial = summary["serial"]
        final_serial[i] = serial
        if i in lost:
            site.diverted_papers.add(serial)
        receipts.append(
            {"voter": i, "session": which, "terminal": terminal,
             "code": receipt.code, "serial": serial}
        )
        return serial, pb

    def scan(i, serial):
        occurrence = site.bus.counts.get("cast_scan", 0)
        if i in dropped:
            site.bus.injector.drop.add(("cast_scan", occurrence))
        if i in duplicated:
            site.bus.injector.duplicate.add(("cast_scan", occurrence))
        site.cast(serial)

    for i, voter in enumerate(scenario.voters):
        terminal = voter.terminal or scenario.terminals[i % len(scenario.terminals)]
        serial, pb = session(i, voter, terminal, voter.selections, "primary")
        if voter.action == "cast":
            scan(i, serial)
        elif voter.action in ("spoil", "challenge"):
            reason = SPOIL_VOTER if voter.action == "spoil" else SPOIL_CHALLENGE
            site.spoil(serial, reason)
            if voter.action == "challenge":
                challenges.append({"voter": i, "serial": serial, "intended": pb.to_json()})
            if voter.revote is not None:
                serial, _ = session(i, voter, terminal, voter.revote, "revote")
                scan(i, serial)
        elif voter.action == "provisional":
            if voter.adjudication is not None:
                site.provisional_flow(serial, voter.adjudication)
        # "abandon": walk away; the close-of-polls sweep spoils it.

    final_z = site.close_polls()

    board = Board(scenario.election_id)
    index_by_serial = {}
    for serial, record in sorted(site.records.items(), key=lambda kv: kv[1].produced_at):
        style = styles[record.record.ballot.style_id]
        index = board.publish_entry(
            record.record, record.status, style, jpk.K, gp, reason=record.reason
        )
        index_by_serial[serial] = index
    for tid in sorted(final_z):
        board.append_terminal_close(
            tid, final_z[tid].hex(), site.terminals[tid].ballots_produced
        )
    board.sign_board(office, gp)

    for row in receipts:
        row["status"] = site.records[row["serial"]].status
        row["entry"] = index_by_serial[row["serial"]]
    for row in challenges:
        row["entry"] = index_by_serial[row["serial"]]

    cast_rows = [
        {"serial": s, "index": index_by_serial[s], "plaintext": site.claimed[s].to_json()}
        for s, record in site.records.items()
        if record.status == CAST
    ]
    cvrs = build_cvrs(cast_rows, manifest, rng)

    paper_rows = []
    for serial in site.box:
        pb = site.papers[serial]
        paper_rows.append(
            {"serial": serial, "contests": interpretation(pb.to_json(), styles[pb.style_id])}
        )
    rng.shuffle(paper_rows)  # a physical box has no order
    if scenario.paper_noise_rate > 0:
        for row in paper_rows:
            if rng.random() < scenario.paper_noise_rate:
                _stray_mark(row, styles, rng)
    serial_of_voter = {i: s for i, s in final_serial.items()}
    overrides = {o["voter"]: o["contests"] for o in scenario.paper_overrides}
    for row in paper_rows:
        for voter_idx, contests in overrides.items():
            if serial_of_voter.get(voter_idx) == row["serial"]:
                row["contests"] = {
                    cid: dict(view) for cid, view in {**row["contests"], **contests}.items()
                }

    return {
        "scenario": scenario,
        "manifest": manifest,
        "board": board,
        "site": site,
        "jpk": jpk,
        "trustee_shares": keys["trustee_shares"],
        "office": office,
        "receipts": receipts,
        "challenges": challenges,
        "index_by_serial": index_by_serial,
        "cvrs": cvrs,
        "commitments": published_commitments(cvrs),
        "papers": paper_rows,
        "events": list(site.events),
        "initial_seeds": {tid: z.hex() for tid, z in site.initial_seeds.items()},
    }


def _stray_mark(row: dict, styles: dict, rng: random.Random) -> None:
    """Reinterpret one contest on a paper summary: a human reader sees a
    stray mark as a different (or an extra) selection."""
    candidates = [cid for cid in row["contests"]]
    if not candidates:
        return
    cid = rng.choice(sorted(candidates))
    contest = None
    for style in styles.values():
        for c in style.contests:
            if c.contest_id == cid:
                contest = c
    view = dict(row["contests"][cid])
    selections = list(view["selections"])
    others = [opt for opt in contest.options if opt not in selections]
    if selections and others:
        selections[rng.randrange(len(selections))] = rng.choice(others)
    elif others:
        selections.append(rng.choice(others))
    elif selections:
        selections.pop(rng.randrange(len(selections)))
    view["selections"] = sorted(selections)
    row["contests"][cid] = view


def finish_election(board: Board, manifest: ElectionManifest, trustee_shares,
                    office: Keypair, cvrs, paper_rows, rng=None) -> dict:
    """The officials' post-close pipeline on an already-published board:
    reconcile paper against electronic records, demote paper-less CAST
    records to UNTALLIED, publish verifiable decryptions of every spoiled or
    untallied record, publish the tally, and sign the extended board."""
    rng = rng or random.Random(0)
    gp = manifest.gp
    style_map = manifest.style_map

    index_of = {row["serial"]: int(row["index"]) for row in cvrs}
    cast_serials = {
        s for s, i in index_of.items() if board.effective_status(i) == CAST
    }
    compliance = compliance_check(cast_serials, [row["serial"] for row in paper_rows])
    for serial in compliance["cast_without_paper"]:
        board.append_status(index_of[serial], UNTALLIED, reason="cast-without-paper")

    for index, _ in board.entries():
        if board.effective_status(index) in (SPOILED, UNTALLIED):
            columns, plaintext = decrypt_spoiled(
                board, index, style_map, trustee_shares, manifest.jpk, gp, rng
            )
            board.append_decryption(index, columns, plaintext)

    tally = decrypt_tally(board, style_map, trustee_shares, manifest.jpk, gp, rng)
    board.append_tally(tally)
    board.sign_board(office, gp)
    return {"compliance": compliance, "tally": tally}


def write_artifacts(result: dict, outdir) -> dict:
    """Serialize a run's artifact set under outdir. Returns {name: path}."""
    import json
    import os

    os.makedirs(outdir, exist_ok=True)
    paths = {}

    def path(name):
        paths[name] = os.path.join(outdir, name)
        return paths[name]

    result["manifest"].save(path("params.json"))
    result["board"].write(path("board.jsonl"))
    with open(path("eventlog.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"event": "init", "seeds": result["initial_seeds"]},
                            sort_keys=True) + "\n")
        for event in result["events"]:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    for name, rows in (
        ("papers.json", result["papers"]),
        ("cvrs.json", result["cvrs"]),
        ("commitments.json", result["commitments"]),
        ("receipts.json", result["receipts"]),
    ):
        with open(path(name), "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return paths


# -- scenario generators -------------------------------------------------------
#
# Test and demo scaffolding. The TEST group's exponent order is 11, so a
# homomorphic count only decodes exactly while every tally column stays at
# or below 10; every generator below keeps per-column counts within that
# bound by construction (few voters, or single-choice contests whose votes
# are dealt round-robin across enough options).


def make_demo_scenario(seed: int = 7) -> Scenario:
    """One small election exercising every voter-flow branch: cast,
    voter-spoil-and-revote, challenge, provisional accept, provisional
    reject, and a walk-away timeout."""
    styles = (
        BallotStyle(
            style_id="downtown",
            contests=(
                _contest("mayor", ("ada", "grace"), 1, True),
                _contest("council", ("ida", "joan", "mary"), 2, False),
            ),
        ),
    )
    voters = (
        Voter("downtown", {"mayor": ["ada"], "council": ["ida", "joan"]}, "cast"),
        Voter("downtown", {"mayor": ["grace"], "council": ["mary"]}, "cast"),
        Voter("downtown", {"mayor": ["ada"], "council": []}, "spoil",
              revote={"mayor": ["grace"], "council": ["ida"]}),
        Voter("downtown", {"mayor": ["grace"], "council": ["joan", "mary"]}, "challenge",
              revote={"mayor": ["grace"], "council": ["joan", "mary"]}),
        Voter("downtown", {"mayor": ["(write-in)"], "council": ["ida"]}, "cast"),
        Voter("downtown", {"mayor": ["ada"], "council": ["mary"]}, "provisional",
              adjudication=ACCEPT),
        Voter("downtown", {"mayor": ["grace"], "council": ["ida"]}, "provisional",
              adjudication=REJECT),
        Voter("downtown", {"mayor": ["ada"], "council": ["joan"]}, "abandon"),
    )
    return Scenario(
        election_id="starlock-demo",
        group="test",
        trustees=(3, 2),
        seed=seed,
        styles=styles,
        terminals=("T1", "T2"),
        voters=voters,
    )


def _contest(cid, options, limit, writein):
    from .ballot import Contest

    return Contest(contest_id=cid, options=tuple(options), limit=limit,
                   writein_slot=writein)


def make_random_scenario(seed: int, max_voters: int = 200, max_contests: int = 4) -> Scenario:
    """Randomized-but-capacity-safe scenario for end-to-end trials."""
    rng = random.Random(("scenario", seed).__repr__())
    scale = rng.choice(["small", "small", "medium", "large"])
    if scale == "small":
        n_voters = rng.randint(1, min(8, max_voters))
    elif scale == "medium":
        n_voters = rng.randint(min(9, max_voters), min(60, max_voters))
    else:
        n_voters = rng.randint(min(61, max_voters), max_voters)
    n_contests = rng.randint(1, max_contests)
    small = n_voters <= 5

    contests = []
    for c in range(n_contests):
        if small:
            limit = rng.randint(1, 2)
            n_options = rng.randint(max(2, limit), 4)
            writein = rng.random() < 0.4
        else:
            limit = 1
            n_options = max(2, -(-n_voters // 10) + rng.randint(1, 3))
            writein = False
        options = tuple(f"c{c}x{o}" for o in range(n_options))
        contests.append(_contest(f"race{c}", options, limit, writein))

    styles = [BallotStyle(style_id="full", contests=tuple(contests))]
    if small and n_contests > 1 and rng.random() < 0.5:
        styles.append(BallotStyle(style_id="short", contests=(contests[0],)))

    # Deal each single-choice contest's votes round-robin so no option
    # column ever exceeds 10; small contests cannot overflow any column.
    assignments = {}
    for contest in contests:
        deck = [contest.options[v % len(contest.options)] for v in range(n_voters)]
        rng.shuffle(deck)
        assignments[contest.contest_id] = deck

    voters = []
    for i in range(n_voters):
        style = styles[0] if len(styles) == 1 else rng.choice(styles)
        selections = {}
        for contest in style.contests:
            if small:
                pool = list(contest.options)
                if contest.writein_slot and rng.random() < 0.3:
                    chosen = ["(write-in)"]
                    chosen += rng.sample(pool, rng.randint(0, contest.limit - 1))
                else:
                    chosen = rng.sample(pool, rng.randint(0, contest.limit))
                selections[contest.contest_id] = chosen
            else:
                selections[contest.contest_id] = [assignments[contest.contest_id][i]]
        if small:
            action = rng.choice(["cast", "cast", "cast", "spoil", "abandon", "provisional"])
        else:
            action = "cast"
        revote = None
        adjudication = None
        if action == "spoil":
            revote = selections if rng.random() < 0.7 else None
        if action == "provisional":
            adjudication = rng.choice([ACCEPT, REJECT, None])
        voters.append(
            Voter(style.style_id, selections, action, revote=revote,
                  adjudication=adjudication)
        )

    return Scenario(
        election_id=f"rand-{seed}",
        group="test",
        trustees=rng.choice([(1, 1), (3, 2), (5, 3)]),
        seed=rng.randrange(2**32),
        styles=tuple(styles),
        terminals=tuple(f"T{t}" for t in range(1, rng.randint(1, 3) + 1)),
        voters=tuple(voters),
    )


def expected_counts(scenario: Scenario) -> dict:
    """Plaintext oracle: per-contest column counts implied by the script,
    counting only ballots that end the day CAST (casts, revote casts, and
    accepted provisionals). Derived purely from the scenario text."""
    from .ballot import ABSTAIN_COLUMN, WRITE_IN_COLUMN

    styles = {s.style_id: s for s in scenario.styles}
    counts = {}
    cast_counts = {}
    for style in scenario.styles:
        for contest in style.contests:
            if contest.contest_id not in counts:
                cols = {opt: 0 for opt in contest.options}
                cols[ABSTAIN_COLUMN] = 0
                if contest.writein_slot:
                    cols[WRITE_IN_COLUMN] = 0
                counts[contest.contest_id] = cols
                cast_counts[contest.contest_id] = 0

    for i, voter in enumerate(scenario.voters):
        if voter.action == "cast":
            selections = voter.selections
        elif voter.action in ("spoil", "challenge") and voter.revote is not None:
            selections = voter.revote
        elif voter.action == "provisional" and voter.adjudication == ACCEPT:
            selections = voter.selections
        else:
            continue
        style = styles[voter.style]
        for contest in style.contests:
            cols = counts[contest.contest_id]
            cast_counts[contest.contest_id] += 1
            chosen = [s for s in selections.get(contest.contest_id, [])]
            real = [s for s in chosen if s != WRITE_IN_COLUMN]
            for opt in real:
                cols[opt] += 1
            cols[ABSTAIN_COLUMN] += contest.limit - len(real)
            if contest.writein_slot and WRITE_IN_COLUMN in chosen:
                cols[WRITE_IN_COLUMN] += 1
    return {"counts": counts, "cast": cast_counts}
