"""Request/response models for the REST API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..canonical import format_ts
from ..model import ActionRecord, PolicyRecord


class ApiErrorBody(BaseModel):
    code: str
    message: str
    field_errors: list[dict] = Field(default_factory=list)


class BootstrapRequest(BaseModel):
    name: str
    members: list[dict]  # {"name": ..., "handle": ...}
    seed: int
    roles: Optional[list[dict]] = None
    config: Optional[dict] = None


class BootstrapResponse(BaseModel):
    community: str
    admin_token: str
    tokens: dict[str, str]  # user id -> token


class MemberResource(BaseModel):
    id: str
    display_name: str
    platform_handle: str
    roles: list[str]


class CommunityResource(BaseModel):
    id: str
    name: str
    members: list[MemberResource]
    action_types: list[str]
    adapter: str
    external_calls_enabled: bool
    config: dict


class BundleMemberSpec(BaseModel):
    action_type: str
    payload: dict = Field(default_factory=dict)
    members: Optional[list["BundleMemberSpec"]] = None

    def to_engine(self) -> dict:
        spec: dict = {"action_type": self.action_type, "payload": self.payload}
        if self.members:
            spec["members"] = [m.to_engine() for m in self.members]
        return spec


class ProposeActionRequest(BaseModel):
    action_type: str
    payload: dict = Field(default_factory=dict)
    members: Optional[list[BundleMemberSpec]] = None
    datetime_trigger: Optional[str] = None


class VoteRequest(BaseModel):
    value: bool | int


class TallyResource(BaseModel):
    kind: str
    status: str
    voters: int
    yes: Optional[int] = None
    no: Optional[int] = None
    options: Optional[dict[str, int]] = None


class ActionResource(BaseModel):
    id: str
    action_type: str
    layer: str
    origin: str
    initiator: str
    payload: dict
    status: str
    created_at: str
    decided_at: Optional[str]
    governing_policy: Optional[str]
    datetime_trigger: Optional[str]
    bundle_kind: Optional[str]
    member_ids: list[str]
    parent_bundle: Optional[str]
    data: dict
    tally: TallyResource

    @classmethod
    def from_record(cls, rec: ActionRecord, tally: dict) -> "ActionResource":
        return cls(
            id=rec.id,
            action_type=rec.action_type,
            layer=rec.layer,
            origin=rec.origin,
            initiator=rec.initiator,
            payload=rec.payload,
            status=rec.proposal.status,
            created_at=format_ts(rec.proposal.created_at),
            decided_at=format_ts(rec.proposal.decided_at) if rec.proposal.decided_at else None,
            governing_policy=rec.proposal.governing_policy,
            datetime_trigger=format_ts(rec.datetime_trigger) if rec.datetime_trigger else None,
            bundle_kind=rec.bundle_kind,
            member_ids=list(rec.member_ids),
            parent_bundle=rec.parent_bundle,
            data=rec.data.to_dict(),
            tally=TallyResource(**tally),
        )


class PolicyStageResource(BaseModel):
    id: str
    source: str
    description: str
    data: dict


class PolicyResource(BaseModel):
    id: str
    layer: str
    description: str
    precedence: int
    enacted_at: str
    trial_mode: bool
    source: str
    stages: list[PolicyStageResource]

    @classmethod
    def from_record(cls, policy: PolicyRecord) -> "PolicyResource":
        return cls(
            id=policy.id,
            layer=policy.layer,
            description=policy.description,
            precedence=policy.precedence,
            enacted_at=format_ts(policy.enacted_at),
            trial_mode=policy.trial_mode,
            source=policy.stages[0].source,
            stages=[
                PolicyStageResource(id=s.id, source=s.source, description=s.description, data=s.data.to_dict())
                for s in policy.stages
            ],
        )


class DocumentResource(BaseModel):
    id: str
    title: str
    body: str
    version: int


class DocumentPutRequest(BaseModel):
    body: str
    title: Optional[str] = None


class LintRequest(BaseModel):
    source: str


class LintDiagnostic(BaseModel):
    severity: str  # "error" | "info"
    code: str
    message: str
    line: Optional[int] = None
    col: Optional[int] = None


class LintResponse(BaseModel):
    ok: bool
    diagnostics: list[LintDiagnostic]
    description: str = ""
    trial_mode: bool = False


class AuditEvent(BaseModel):
    offset: int
    ts: str
    kind: str
    deciding_policy: Optional[str]
    payload: dict


class AuditPage(BaseModel):
    events: list[AuditEvent]
    next_cursor: Optional[str]


class ProposalAccepted(BaseModel):
    action: ActionResource


class ActionTypeResource(BaseModel):
    name: str
    layer: str
    payload_schema: dict
    can_propose: bool
    can_view: bool


class AdapterEventRequest(BaseModel):
    event_id: str
    type: str
    actor_handle: str
    payload: dict = Field(default_factory=dict)
    ts: Optional[str] = None


class WhoAmI(BaseModel):
    user: MemberResource
    scopes: list[str]
