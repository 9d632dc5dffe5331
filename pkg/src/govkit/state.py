"""The full governance state: community, actions, policies, platform, and
engine bookkeeping.

State mutates only inside event application, so serializing it after a live
run and after a replay of the same log yields identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .canonical import canonical_json, sha256_hex
from .model import ActionRecord, Community, PolicyRecord

DEFAULT_CONFIG = {
    "default_disposition": "allow",
    "tick_period": 60,
    "http_allowlist": [],
}


@dataclass
class EngineState:
    community: Community | None = None
    actions: dict[str, ActionRecord] = field(default_factory=dict)
    policies: list[PolicyRecord] = field(default_factory=list)
    retired_policies: dict[str, PolicyRecord] = field(default_factory=dict)
    platform: dict = field(default_factory=dict)
    tokens: dict[str, dict] = field(default_factory=dict)
    config: dict = field(default_factory=lambda: dict(DEFAULT_CONFIG))
    counters: dict[str, int] = field(default_factory=dict)
    # engine bookkeeping, all keyed by action id
    applied: dict[str, bool] = field(default_factory=dict)
    undo: dict[str, dict] = field(default_factory=dict)
    stage: dict[str, int] = field(default_factory=dict)
    notified: dict[str, list[int]] = field(default_factory=dict)
    idempotency: dict[str, str] = field(default_factory=dict)
    ingested_events: dict[str, str] = field(default_factory=dict)

    # -- lookups

    def policy_by_id(self, policy_id: str) -> PolicyRecord | None:
        for policy in self.policies:
            if policy.id == policy_id:
                return policy
        return self.retired_policies.get(policy_id)

    def enacted_for_layer(self, layer: str) -> list[PolicyRecord]:
        """Selection order: precedence descending, then enactment recency."""
        same = [p for p in self.policies if p.layer == layer]
        return sorted(same, key=lambda p: (-p.precedence, -p.seq))

    def constitution_policy_count(self) -> int:
        return sum(1 for p in self.policies if p.layer == "constitution")

    def next_id(self, counter: str, prefix: str, width: int = 6) -> str:
        return f"{prefix}-{self.counters.get(counter, 0) + 1:0{width}d}"

    def bump(self, counter: str) -> int:
        self.counters[counter] = self.counters.get(counter, 0) + 1
        return self.counters[counter]

    def pending_action_ids(self) -> list[str]:
        """Actions awaiting evaluation, in submission order. Bundle members
        ride along with their parent and are excluded."""
        return [
            aid
            for aid, rec in self.actions.items()
            if rec.proposal.status == "PROPOSED" and rec.parent_bundle is None
        ]

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "community": self.community.to_dict() if self.community else None,
            "actions": {k: v.to_dict() for k, v in self.actions.items()},
            "policies": [p.to_dict() for p in self.policies],
            "retired_policies": {k: v.to_dict() for k, v in sorted(self.retired_policies.items())},
            "platform": self.platform,
            "tokens": {k: self.tokens[k] for k in sorted(self.tokens)},
            "config": {k: self.config[k] for k in sorted(self.config)},
            "counters": {k: self.counters[k] for k in sorted(self.counters)},
            "applied": {k: self.applied[k] for k in sorted(self.applied)},
            "undo": {k: self.undo[k] for k in sorted(self.undo)},
            "stage": {k: self.stage[k] for k in sorted(self.stage)},
            "notified": {k: self.notified[k] for k in sorted(self.notified)},
            "idempotency": {k: self.idempotency[k] for k in sorted(self.idempotency)},
            "ingested_events": {k: self.ingested_events[k] for k in sorted(self.ingested_events)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngineState":
        return cls(
            community=Community.from_dict(d["community"]) if d["community"] else None,
            actions={k: ActionRecord.from_dict(v) for k, v in d["actions"].items()},
            policies=[PolicyRecord.from_dict(p) for p in d["policies"]],
            retired_policies={k: PolicyRecord.from_dict(v) for k, v in d["retired_policies"].items()},
            platform=d["platform"],
            tokens=d["tokens"],
            config=d["config"],
            counters=d["counters"],
            applied=d["applied"],
            undo=d["undo"],
            stage=d["stage"],
            notified=d["notified"],
            idempotency=d["idempotency"],
            ingested_events=d["ingested_events"],
        )

    def canonical(self) -> str:
        return canonical_json(self.to_dict())

    def content_hash(self) -> str:
        return sha256_hex(self.canonical())
