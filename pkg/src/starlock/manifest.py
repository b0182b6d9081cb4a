"""The public election manifest: everything an observer needs to check an
election besides the board file itself. Written at simulation time, read by
the verifier, the tally tooling, and auditors."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .ballot import BallotStyle
from .group import GroupParams
from .serialize import hex_to_int, int_to_hex
from .trustees import JointPublicKey


@dataclass(frozen=True)
class ElectionManifest:
    election_id: str
    gp: GroupParams
    jpk: JointPublicKey
    office_pk: int
    styles: tuple
    terminal_seeds: dict  # terminal id -> z0 hex
    salt: bytes
    ttl: int

    @property
    def style_map(self) -> dict:
        return {s.style_id: s for s in self.styles}

    def to_json(self) -> dict:
        return {
            "election_id": self.election_id,
            "group": self.gp.to_json(),
            "joint_key": self.jpk.to_json(),
            "office_pk": int_to_hex(self.office_pk),
            "styles": [s.to_json() for s in self.styles],
            "terminals": dict(sorted(self.terminal_seeds.items())),
            "salt": self.salt.hex(),
            "ttl": self.ttl,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ElectionManifest":
        return cls(
            election_id=obj["election_id"],
            gp=GroupParams.from_json(obj["group"]),
            jpk=JointPublicKey.from_json(obj["joint_key"]),
            office_pk=hex_to_int(obj["office_pk"]),
            styles=tuple(BallotStyle.from_json(s) for s in obj["styles"]),
            terminal_seeds=dict(obj["terminals"]),
            salt=bytes.fromhex(obj["salt"]),
            ttl=int(obj["ttl"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ElectionManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))
