"""Core governance domain types.

The model is a tree of plain dataclasses with deterministic `to_dict`
serialization; all mutation happens through engine events so values can be
treated as snapshots. Ids are allocated from per-kind counters, which makes
two bootstraps with the same inputs byte-identical.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from datetime import datetime

from .canonical import canonical_json, format_ts, is_json_value, parse_ts
from .errors import (
    DataLimitError,
    InvalidInputError,
    UnknownActionTypeError,
)

# Permission kinds: exactly three exist per registered action type.
VIEW = "view"
PROPOSE = "propose"
EXECUTE = "execute"
PERMISSION_KINDS = (VIEW, PROPOSE, EXECUTE)

# Scope layers.
PLATFORM = "platform"
CONSTITUTION = "constitution"
LAYERS = (PLATFORM, CONSTITUTION)

# Proposal statuses.
PROPOSED = "PROPOSED"
PASSED = "PASSED"
FAILED = "FAILED"

# Action origins.
ORIGIN_PLATFORM_EVENT = "platform_event"
ORIGIN_WEB_PROPOSAL = "web_proposal"
ORIGIN_POLICY_GENERATED = "policy_generated"

# Bundle kinds.
ELECTION = "election"
COMBINATION = "combination"
BUNDLE_TYPES = {"election_bundle": ELECTION, "combination_bundle": COMBINATION}

DATA_STORE_CAP_BYTES = 64 * 1024

BASE_ROLE_NAME = "members"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidInputError(message)


@dataclass
class User:
    id: str
    display_name: str
    platform_handle: str

    def to_dict(self) -> dict:
        return {"id": self.id, "display_name": self.display_name, "platform_handle": self.platform_handle}

    @classmethod
    def from_dict(cls, d: dict) -> "User":
        return cls(id=d["id"], display_name=d["display_name"], platform_handle=d["platform_handle"])


@dataclass
class Role:
    id: str
    name: str
    permissions: set[tuple[str, str]] = field(default_factory=set)
    members: list[str] = field(default_factory=list)

    def has_permission(self, action_type: str, kind: str) -> bool:
        return (action_type, kind) in self.permissions

    def add_member(self, user_id: str) -> None:
        if user_id not in self.members:
            self.members.append(user_id)

    def remove_member(self, user_id: str) -> None:
        if user_id in self.members:
            self.members.remove(user_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "permissions": sorted([list(p) for p in self.permissions]),
            "members": list(self.members),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Role":
        return cls(
            id=d["id"],
            name=d["name"],
            permissions={(p[0], p[1]) for p in d["permissions"]},
            members=list(d["members"]),
        )


@dataclass
class Document:
    id: str
    title: str
    body: str
    version: int = 1

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "body": self.body, "version": self.version}

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(id=d["id"], title=d["title"], body=d["body"], version=d["version"])


class DataStore:
    """Free-form key/value store attached to actions and policies.

    Values must round-trip through JSON; the serialized store is capped so
    oversized records are pushed to external storage instead.
    """

    def __init__(self, entries: dict | None = None):
        self.entries: dict = dict(entries or {})

    def get(self, key: str, default=None):
        return self.entries.get(key, default)

    def set(self, key: str, value) -> None:
        if not isinstance(key, str):
            raise InvalidInputError("data store keys must be strings")
        if not is_json_value(value):
            raise InvalidInputError(f"data store value for {key!r} is not JSON-serializable")
        candidate = dict(self.entries)
        candidate[key] = value
        if len(canonical_json(candidate).encode("utf-8")) > DATA_STORE_CAP_BYTES:
            raise DataLimitError(f"data store exceeds {DATA_STORE_CAP_BYTES} bytes with key {key!r}")
        self.entries = candidate

    def to_dict(self) -> dict:
        return dict(self.entries)

    @classmethod
    def from_dict(cls, d: dict) -> "DataStore":
        return cls(entries=d)


@dataclass
class Vote:
    voter: str
    kind: str  # "boolean" | "choice"
    value: bool | int
    cast_at: datetime

    def to_dict(self) -> dict:
        return {"voter": self.voter, "kind": self.kind, "value": self.value, "cast_at": format_ts(self.cast_at)}

    @classmethod
    def from_dict(cls, d: dict) -> "Vote":
        return cls(voter=d["voter"], kind=d["kind"], value=d["value"], cast_at=parse_ts(d["cast_at"]))


@dataclass
class Proposal:
    status: str
    created_at: datetime
    decided_at: datetime | None = None
    governing_policy: str | None = None
    votes: dict[str, Vote] = field(default_factory=dict)  # keyed by voter: a re-cast replaces

    def live_votes(self) -> list[Vote]:
        return list(self.votes.values())

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "created_at": format_ts(self.created_at),
            "decided_at": format_ts(self.decided_at) if self.decided_at else None,
            "governing_policy": self.governing_policy,
            "votes": {k: v.to_dict() for k, v in sorted(self.votes.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Proposal":
        return cls(
            status=d["status"],
            created_at=parse_ts(d["created_at"]),
            decided_at=parse_ts(d["decided_at"]) if d["decided_at"] else None,
            governing_policy=d["governing_policy"],
            votes={k: Vote.from_dict(v) for k, v in d["votes"].items()},
        )


@dataclass
class ActionRecord:
    id: str
    action_type: str
    layer: str
    initiator: str
    payload: dict
    origin: str
    proposal: Proposal
    data: DataStore = field(default_factory=DataStore)
    datetime_trigger: datetime | None = None
    bundle_kind: str | None = None  # "election" | "combination" for bundle actions
    member_ids: list[str] = field(default_factory=list)
    parent_bundle: str | None = None

    @property
    def is_bundle(self) -> bool:
        return self.bundle_kind is not None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "action_type": self.action_type,
            "layer": self.layer,
            "initiator": self.initiator,
            "payload": self.payload,
            "origin": self.origin,
            "proposal": self.proposal.to_dict(),
            "data": self.data.to_dict(),
            "datetime_trigger": format_ts(self.datetime_trigger) if self.datetime_trigger else None,
            "bundle_kind": self.bundle_kind,
            "member_ids": list(self.member_ids),
            "parent_bundle": self.parent_bundle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActionRecord":
        return cls(
            id=d["id"],
            action_type=d["action_type"],
            layer=d["layer"],
            initiator=d["initiator"],
            payload=d["payload"],
            origin=d["origin"],
            proposal=Proposal.from_dict(d["proposal"]),
            data=DataStore.from_dict(d["data"]),
            datetime_trigger=parse_ts(d["datetime_trigger"]) if d["datetime_trigger"] else None,
            bundle_kind=d["bundle_kind"],
            member_ids=list(d["member_ids"]),
            parent_bundle=d["parent_bundle"],
        )


@dataclass
class PolicyStage:
    id: str
    source: str
    description: str
    data: DataStore = field(default_factory=DataStore)

    def to_dict(self) -> dict:
        return {"id": self.id, "source": self.source, "description": self.description, "data": self.data.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyStage":
        return cls(id=d["id"], source=d["source"], description=d["description"], data=DataStore.from_dict(d["data"]))


@dataclass
class PolicyRecord:
    """An enacted policy. Multi-stage records hold one PolicyStage per stage;
    single-stage records hold exactly one."""

    id: str
    layer: str
    description: str
    precedence: int
    enacted_at: datetime
    seq: int  # enactment sequence, tiebreak after precedence/enacted_at
    stages: list[PolicyStage]
    trial_mode: bool = False

    @property
    def is_bundle(self) -> bool:
        return len(self.stages) > 1

    @property
    def source(self) -> str:
        return self.stages[0].source

    @property
    def data(self) -> DataStore:
        return self.stages[0].data

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "layer": self.layer,
            "description": self.description,
            "precedence": self.precedence,
            "enacted_at": format_ts(self.enacted_at),
            "seq": self.seq,
            "stages": [s.to_dict() for s in self.stages],
            "trial_mode": self.trial_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyRecord":
        return cls(
            id=d["id"],
            layer=d["layer"],
            description=d["description"],
            precedence=d["precedence"],
            enacted_at=parse_ts(d["enacted_at"]),
            seq=d["seq"],
            stages=[PolicyStage.from_dict(s) for s in d["stages"]],
            trial_mode=d["trial_mode"],
        )


@dataclass
class Community:
    id: str
    name: str
    members: dict[str, User]
    base_role: str
    roles: dict[str, Role]
    documents: dict[str, Document]
    adapter: str
    rng_seed: int
    external_calls_enabled: bool
    action_types: list[str]

    def member_ids(self) -> list[str]:
        return list(self.members.keys())

    def role_by_name(self, name: str) -> Role | None:
        for role in self.roles.values():
            if role.name == name:
                return role
        return None

    def user_by_handle(self, handle: str) -> User | None:
        for user in self.members.values():
            if user.platform_handle == handle:
                return user
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "members": {k: v.to_dict() for k, v in self.members.items()},
            "base_role": self.base_role,
            "roles": {k: v.to_dict() for k, v in sorted(self.roles.items())},
            "documents": {k: v.to_dict() for k, v in sorted(self.documents.items())},
            "adapter": self.adapter,
            "rng_seed": self.rng_seed,
            "external_calls_enabled": self.external_calls_enabled,
            "action_types": list(self.action_types),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Community":
        return cls(
            id=d["id"],
            name=d["name"],
            members={k: User.from_dict(v) for k, v in d["members"].items()},
            base_role=d["base_role"],
            roles={k: Role.from_dict(v) for k, v in d["roles"].items()},
            documents={k: Document.from_dict(v) for k, v in d["documents"].items()},
            adapter=d["adapter"],
            rng_seed=d["rng_seed"],
            external_calls_enabled=d["external_calls_enabled"],
            action_types=list(d["action_types"]),
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def new_community(
    name: str,
    members: list[tuple[str, str]],
    seed: int,
    *,
    adapter: str,
    action_types: list[str],
) -> Community:
    """Build a fresh community: a base role holding every member with view and
    propose grants on every registered action type, plus one empty document.

    `members` is a list of (display_name, platform_handle) pairs; ids are
    assigned in order so equal inputs produce equal communities.
    """
    _require(bool(name), "community name must be non-empty")
    _require(len(members) > 0, "community must have at least one member")
    handles = [h for _, h in members]
    _require(len(set(handles)) == len(handles), "duplicate platform handles")

    users = {f"usr-{i:04d}": User(f"usr-{i:04d}", dn, h) for i, (dn, h) in enumerate(members, start=1)}
    base_role = Role(
        id="role-0001",
        name=BASE_ROLE_NAME,
        permissions={(t, kind) for t in action_types for kind in (VIEW, PROPOSE)},
        members=list(users.keys()),
    )
    doc = Document(id="doc-0001", title="Community Guidelines", body="", version=1)
    return Community(
        id=f"com-{seed & 0xFFFF:04x}",
        name=name,
        members=users,
        base_role=base_role.id,
        roles={base_role.id: base_role},
        documents={doc.id: doc},
        adapter=adapter,
        rng_seed=seed,
        external_calls_enabled=False,
        action_types=sorted(action_types),
    )


def check_permission(community: Community, user_id: str, kind: str, action_type: str) -> bool:
    """True iff any role of the user carries the (action_type, kind) grant."""
    if action_type not in community.action_types:
        raise UnknownActionTypeError(f"unknown action type: {action_type}")
    if kind not in PERMISSION_KINDS:
        raise InvalidInputError(f"unknown permission kind: {kind}")
    for role in community.roles.values():
        if user_id in role.members and role.has_permission(action_type, kind):
            return True
    return False


def user_roles(community: Community, user_id: str) -> list[Role]:
    return [r for r in community.roles.values() if user_id in r.members]


def eligible_voters(community: Community, restrict_to_role: str | None = None) -> list[str]:
    """Quorum denominator: members of the given role, or all members.

    Computed at call time so membership churn is reflected live.
    """
    if restrict_to_role is None:
        return community.member_ids()
    role = community.roles.get(restrict_to_role) or community.role_by_name(restrict_to_role)
    if role is None:
        raise InvalidInputError(f"role does not belong to this community: {restrict_to_role}")
    return list(role.members)


def quorum_met(n_voters: int, denominator: int, pct: int) -> bool:
    return n_voters >= math.ceil(denominator * pct / 100)


def member_tokens(community: Community) -> dict[str, dict]:
    """Deterministic bearer tokens for every member, derived from the
    community seed. The first member's token also carries admin-install scope."""
    rng = random.Random(community.rng_seed ^ 0x746F6B656E)
    tokens: dict[str, dict] = {}
    for i, user_id in enumerate(community.members.keys()):
        token = "tok-" + "".join(rng.choice("0123456789abcdef") for _ in range(32))
        scopes = ["member"]
        if i == 0:
            scopes.append("admin-install")
        tokens[token] = {"user": user_id, "scopes": scopes}
    return tokens
