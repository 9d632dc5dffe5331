"""Built-in constitution action types.

Each type carries a payload schema, derive-time prechecks, and pure
execute/revert transforms over governance state. Every type is revertable:
revert(execute(state)) restores the prior serialized state.

Policy enactment and retirement are not applied here; executing a policy op
yields companion PolicyEnacted/PolicyRetired events so the policy list has a
single mutation path.
"""

from __future__ import annotations

import jsonschema

from .canonical import parse_ts
from .errors import (
    DependentStateError,
    InvalidInputError,
    LastConstitutionPolicyError,
    NoUndoRecordError,
    SchemaViolationError,
)
from .model import (
    CONSTITUTION,
    PERMISSION_KINDS,
    PROPOSE,
    ActionRecord,
    DataStore,
    Document,
    PolicyRecord,
    PolicyStage,
    Role,
)
from .state import EngineState
from .dsl.parser import parse_policy_source

POLICY_OPS = ("policy_add", "policy_edit", "policy_remove", "policy_bundle_add")

CATALOG = (
    "policy_add",
    "policy_edit",
    "policy_remove",
    "policy_bundle_add",
    "role_add",
    "role_remove",
    "role_grant_permission",
    "role_revoke_permission",
    "role_add_member",
    "role_remove_member",
    "document_add",
    "document_edit",
    "document_remove",
    "community_config_edit",
)

_LAYER_SCHEMA = {"type": "string", "enum": ["platform", "constitution"]}
_STAGE_SCHEMA = {
    "type": "object",
    "properties": {"source": {"type": "string"}, "data": {"type": "object"}},
    "required": ["source"],
    "additionalProperties": False,
}

PAYLOAD_SCHEMAS: dict[str, dict] = {
    "policy_add": {
        "type": "object",
        "properties": {
            "source": {"type": "string"},
            "layer": _LAYER_SCHEMA,
            "precedence": {"type": "integer"},
            "data": {"type": "object"},
        },
        "required": ["source", "layer"],
        "additionalProperties": False,
    },
    "policy_edit": {
        "type": "object",
        "properties": {
            "policy": {"type": "string"},
            "source": {"type": "string"},
            "precedence": {"type": "integer"},
        },
        "required": ["policy", "source"],
        "additionalProperties": False,
    },
    "policy_remove": {
        "type": "object",
        "properties": {"policy": {"type": "string"}},
        "required": ["policy"],
        "additionalProperties": False,
    },
    "policy_bundle_add": {
        "type": "object",
        "properties": {
            "stages": {"type": "array", "items": _STAGE_SCHEMA, "minItems": 1},
            "layer": _LAYER_SCHEMA,
            "precedence": {"type": "integer"},
            "description": {"type": "string"},
        },
        "required": ["stages", "layer"],
        "additionalProperties": False,
    },
    "role_add": {
        "type": "object",
        "properties": {
            "name": {"type": "string", "minLength": 1},
            "permissions": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "action_type": {"type": "string"},
                        "kind": {"type": "string", "enum": list(PERMISSION_KINDS)},
                    },
                    "required": ["action_type", "kind"],
                    "additionalProperties": False,
                },
            },
            "members": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["name"],
        "additionalProperties": False,
    },
    "role_remove": {
        "type": "object",
        "properties": {"role": {"type": "string"}},
        "required": ["role"],
        "additionalProperties": False,
    },
    "role_grant_permission": {
        "type": "object",
        "properties": {
            "role": {"type": "string"},
            "action_type": {"type": "string"},
            "kind": {"type": "string", "enum": list(PERMISSION_KINDS)},
        },
        "required": ["role", "action_type", "kind"],
        "additionalProperties": False,
    },
    "role_revoke_permission": {
        "type": "object",
        "properties": {
            "role": {"type": "string"},
            "action_type": {"type": "string"},
            "kind": {"type": "string", "enum": list(PERMISSION_KINDS)},
        },
        "required": ["role", "action_type", "kind"],
        "additionalProperties": False,
    },
    "role_add_member": {
        "type": "object",
        "properties": {
            "role": {"type": "string"},
            "user": {"type": "string"},
            "edits": {"type": "integer"},
            "tenure_days": {"type": "integer"},
        },
        "required": ["role", "user"],
        "additionalProperties": True,
    },
    "role_remove_member": {
        "type": "object",
        "properties": {"role": {"type": "string"}, "user": {"type": "string"}},
        "required": ["role", "user"],
        "additionalProperties": False,
    },
    "document_add": {
        "type": "object",
        "properties": {"title": {"type": "string"}, "body": {"type": "string"}},
        "required": ["title", "body"],
        "additionalProperties": False,
    },
    "document_edit": {
        "type": "object",
        "properties": {
            "document": {"type": "string"},
            "title": {"type": "string"},
            "body": {"type": "string"},
        },
        "required": ["document", "body"],
        "additionalProperties": False,
    },
    "document_remove": {
        "type": "object",
        "properties": {"document": {"type": "string"}},
        "required": ["document"],
        "additionalProperties": False,
    },
    "community_config_edit": {
        "type": "object",
        "properties": {
            "default_disposition": {"type": "string", "enum": ["allow", "deny"]},
            "http_allowlist": {"type": "array", "items": {"type": "string"}},
            "tick_period": {"type": "integer", "minimum": 1},
            "external_calls_enabled": {"type": "boolean"},
        },
        "additionalProperties": False,
    },
}


# Election bundles label their member options; allow the key everywhere.
for _schema in PAYLOAD_SCHEMAS.values():
    _schema.setdefault("properties", {})["label"] = {"type": "string"}


def payload_schemas() -> dict[str, dict]:
    """JSON Schema per catalog type, for UI form generation."""
    return {name: dict(schema) for name, schema in PAYLOAD_SCHEMAS.items()}


def validate_payload(action_type: str, payload: dict, state: EngineState | None = None) -> list[dict]:
    """Field-level validation; policy sources are parsed so syntax errors
    surface at proposal time. Returns a list of {field, message} errors."""
    if action_type not in CATALOG:
        raise InvalidInputError(f"not a constitution action type: {action_type}")
    errors: list[dict] = []
    validator = jsonschema.Draft202012Validator(PAYLOAD_SCHEMAS[action_type])
    for err in validator.iter_errors(payload):
        path = ".".join(str(p) for p in err.absolute_path) or "(payload)"
        errors.append({"field": path, "message": err.message})
    if errors:
        return errors

    def check_source(field: str, source: str) -> None:
        try:
            parse_policy_source(source)
        except Exception as err:
            errors.append({"field": field, "message": getattr(err, "message", str(err))})

    if action_type in ("policy_add", "policy_edit"):
        check_source("source", payload["source"])
    if action_type == "policy_bundle_add":
        for i, stage in enumerate(payload["stages"]):
            check_source(f"stages.{i}.source", stage["source"])
    if state is not None and state.community is not None:
        community = state.community
        if action_type == "role_add":
            for i, grant in enumerate(payload.get("permissions", [])):
                if grant["action_type"] not in community.action_types:
                    errors.append(
                        {"field": f"permissions.{i}.action_type",
                         "message": f"unknown action type {grant['action_type']!r}"}
                    )
            for i, uid in enumerate(payload.get("members", [])):
                if uid not in community.members:
                    errors.append({"field": f"members.{i}", "message": f"unknown user {uid!r}"})
            if community.role_by_name(payload["name"]):
                errors.append({"field": "name", "message": f"role {payload['name']!r} already exists"})
        if action_type in ("role_grant_permission", "role_revoke_permission"):
            if payload["action_type"] not in community.action_types:
                errors.append({"field": "action_type", "message": f"unknown action type {payload['action_type']!r}"})
            if _find_role(community, payload["role"]) is None:
                errors.append({"field": "role", "message": f"unknown role {payload['role']!r}"})
        if action_type in ("role_add_member", "role_remove_member"):
            if _find_role(community, payload["role"]) is None:
                errors.append({"field": "role", "message": f"unknown role {payload['role']!r}"})
            if payload["user"] not in community.members:
                errors.append({"field": "user", "message": f"unknown user {payload['user']!r}"})
        if action_type == "role_remove":
            if _find_role(community, payload["role"]) is None:
                errors.append({"field": "role", "message": f"unknown role {payload['role']!r}"})
        if action_type in ("document_edit", "document_remove"):
            if payload["document"] not in community.documents:
                errors.append({"field": "document", "message": f"unknown document {payload['document']!r}"})
        if action_type in ("policy_edit", "policy_remove"):
            target = state.policy_by_id(payload["policy"])
            if target is None or payload["policy"] in state.retired_policies:
                errors.append({"field": "policy", "message": f"unknown policy {payload['policy']!r}"})
            elif action_type == "policy_edit" and target.is_bundle:
                errors.append({"field": "policy", "message": "multi-stage policies are replaced via policy_bundle_add"})
    return errors


def _find_role(community, key: str) -> Role | None:
    return community.roles.get(key) or community.role_by_name(key)


def _ensure_valid(rec: ActionRecord, state: EngineState) -> None:
    errors = validate_payload(rec.action_type, rec.payload, state)
    if errors:
        raise SchemaViolationError(
            f"invalid {rec.action_type} payload", field_errors=errors
        )


def _policy_referenced_by_sources(state: EngineState, role_name: str) -> bool:
    needle = f'roles.get("{role_name}")'
    for policy in state.policies:
        for stage in policy.stages:
            if needle in stage.source:
                return True
    return False


def build_policy_record(state: EngineState, payload: dict, enacted_at: str) -> PolicyRecord:
    """Derive the record a policy_add / policy_bundle_add will enact; ids are
    taken from (but do not consume) the policy counter."""
    pid = state.next_id("policy", "pol", 4)
    seq = state.counters.get("policy_seq", 0) + 1
    if "stages" in payload:
        stages = []
        programs = []
        for i, stage in enumerate(payload["stages"], start=1):
            program = parse_policy_source(stage["source"])
            programs.append(program)
            stages.append(
                PolicyStage(
                    id=f"{pid}/{i}",
                    source=stage["source"],
                    description=program.description,
                    data=DataStore(stage.get("data", {})),
                )
            )
        description = payload.get("description") or programs[0].description
        trial = all(p.is_trial for p in programs)
    else:
        program = parse_policy_source(payload["source"])
        stages = [
            PolicyStage(
                id=f"{pid}/1",
                source=payload["source"],
                description=program.description,
                data=DataStore(payload.get("data", {})),
            )
        ]
        description = program.description
        trial = program.is_trial
    return PolicyRecord(
        id=pid,
        layer=payload["layer"],
        description=description,
        precedence=payload.get("precedence", 0),
        enacted_at=parse_ts(enacted_at),
        seq=seq,
        stages=stages,
        trial_mode=trial,
    )


def precheck_execute(state: EngineState, rec: ActionRecord) -> None:
    """Raise if execution would violate governance invariants."""
    _ensure_valid(rec, state)
    if rec.action_type == "policy_remove":
        target = state.policy_by_id(rec.payload["policy"])
        if target is not None and target.layer == CONSTITUTION and state.constitution_policy_count() <= 1:
            raise LastConstitutionPolicyError("cannot remove the last constitution policy")
    if rec.action_type == "role_remove":
        role = _find_role(state.community, rec.payload["role"])
        if role.id == state.community.base_role:
            raise DependentStateError("the base role cannot be removed")
        if _policy_referenced_by_sources(state, role.name):
            raise DependentStateError(f"role {role.name!r} is referenced by an enacted policy")
    if rec.action_type in ("role_revoke_permission", "role_remove_member"):
        if not _liveness_preserved(state, rec):
            raise DependentStateError(
                "at least one member must retain propose permission on a constitution action"
            )


def _liveness_preserved(state: EngineState, rec: ActionRecord) -> bool:
    community = state.community
    role = _find_role(community, rec.payload["role"])
    constitution_types = [t for t in community.action_types if t in CATALOG]

    def grants(role_obj: Role, exclude_perm=None, exclude_member=None) -> bool:
        for uid in role_obj.members:
            if uid == exclude_member:
                continue
            for t in constitution_types:
                if (t, PROPOSE) in role_obj.permissions and (t, PROPOSE) != (exclude_perm or (None, None)):
                    return True
        return False

    for other in community.roles.values():
        if other.id != role.id and grants(other):
            return True
    if rec.action_type == "role_revoke_permission":
        remaining = {p for p in role.permissions if p != (rec.payload["action_type"], rec.payload["kind"])}
        return any((t, PROPOSE) in remaining for t in constitution_types) and bool(role.members)
    remaining_members = [u for u in role.members if u != rec.payload["user"]]
    return bool(remaining_members) and any((t, PROPOSE) in role.permissions for t in constitution_types)


def derive_companions(state: EngineState, rec: ActionRecord, now: str) -> list[tuple[str, dict]]:
    """Companion events for policy ops (the policy list mutates only through
    PolicyEnacted / PolicyRetired)."""
    if rec.action_type in ("policy_add", "policy_bundle_add"):
        record = build_policy_record(state, rec.payload, now)
        return [("PolicyEnacted", {"policy": record.to_dict(), "via": rec.id})]
    if rec.action_type == "policy_edit":
        prior = state.policy_by_id(rec.payload["policy"])
        program = parse_policy_source(rec.payload["source"])
        updated = PolicyRecord(
            id=prior.id,
            layer=prior.layer,
            description=program.description,
            precedence=rec.payload.get("precedence", prior.precedence),
            enacted_at=parse_ts(now),
            seq=state.counters.get("policy_seq", 0) + 1,
            stages=[
                PolicyStage(
                    id=f"{prior.id}/1",
                    source=rec.payload["source"],
                    description=program.description,
                    data=DataStore(prior.stages[0].data.to_dict()),
                )
            ],
            trial_mode=program.is_trial,
        )
        return [("PolicyEnacted", {"policy": updated.to_dict(), "replaces": prior.id, "via": rec.id})]
    if rec.action_type == "policy_remove":
        return [("PolicyRetired", {"policy": rec.payload["policy"], "via": rec.id})]
    return []


def derive_revert_companions(state: EngineState, rec: ActionRecord, undo: dict) -> list[tuple[str, dict]]:
    if rec.action_type in ("policy_add", "policy_bundle_add"):
        return [("PolicyRetired", {"policy": undo["policy_id"], "via": rec.id, "revert": True})]
    if rec.action_type == "policy_edit":
        return [("PolicyEnacted", {"policy": undo["prior"], "replaces": undo["prior"]["id"], "via": rec.id, "revert": True})]
    if rec.action_type == "policy_remove":
        return [("PolicyEnacted", {"policy": undo["prior"], "index": undo["index"], "via": rec.id, "revert": True})]
    return []


def precheck_revert(state: EngineState, rec: ActionRecord) -> dict:
    undo = state.undo.get(rec.id)
    if undo is None:
        raise NoUndoRecordError(f"no undo record for {rec.id}")
    if rec.action_type == "role_add":
        role = state.community.roles.get(undo["role_id"])
        if role is not None and _policy_referenced_by_sources(state, role.name):
            raise DependentStateError(f"role {role.name!r} is referenced by an enacted policy")
    return undo


# --- apply-time transforms (must not fail after prechecks) ------------------


def apply_execute(state: EngineState, rec: ActionRecord) -> dict:
    """Transform governance state; returns the undo record."""
    community = state.community
    payload = rec.payload
    t = rec.action_type

    if t in POLICY_OPS:
        counters_before = {
            "policy": state.counters.get("policy", 0),
            "policy_seq": state.counters.get("policy_seq", 0),
        }
        if t in ("policy_add", "policy_bundle_add"):
            # the companion PolicyEnacted inserts the record and bumps counters
            return {"policy_id": state.next_id("policy", "pol", 4), "counters_before": counters_before}
        prior = state.policy_by_id(payload["policy"])
        index = next((i for i, p in enumerate(state.policies) if p.id == prior.id), None)
        return {"prior": prior.to_dict(), "index": index, "counters_before": counters_before}

    if t == "role_add":
        role_id = f"role-{state.bump('role'):04d}"
        role = Role(
            id=role_id,
            name=payload["name"],
            permissions={(g["action_type"], g["kind"]) for g in payload.get("permissions", [])},
            members=list(dict.fromkeys(payload.get("members", []))),
        )
        community.roles[role_id] = role
        return {"role_id": role_id, "counter_before": state.counters["role"] - 1}
    if t == "role_remove":
        role = _find_role(community, payload["role"])
        del community.roles[role.id]
        return {"prior": role.to_dict()}
    if t == "role_grant_permission":
        role = _find_role(community, payload["role"])
        perm = (payload["action_type"], payload["kind"])
        had = perm in role.permissions
        role.permissions.add(perm)
        return {"role_id": role.id, "had": had}
    if t == "role_revoke_permission":
        role = _find_role(community, payload["role"])
        perm = (payload["action_type"], payload["kind"])
        had = perm in role.permissions
        role.permissions.discard(perm)
        return {"role_id": role.id, "had": had}
    if t == "role_add_member":
        role = _find_role(community, payload["role"])
        was = payload["user"] in role.members
        role.add_member(payload["user"])
        return {"role_id": role.id, "was_member": was}
    if t == "role_remove_member":
        role = _find_role(community, payload["role"])
        was = payload["user"] in role.members
        index = role.members.index(payload["user"]) if was else None
        role.remove_member(payload["user"])
        return {"role_id": role.id, "was_member": was, "index": index}
    if t == "document_add":
        doc_id = f"doc-{state.bump('document'):04d}"
        community.documents[doc_id] = Document(doc_id, payload["title"], payload["body"], version=1)
        return {"document_id": doc_id, "counter_before": state.counters["document"] - 1}
    if t == "document_edit":
        doc = community.documents[payload["document"]]
        undo = {"document_id": doc.id, "title": doc.title, "body": doc.body, "version": doc.version}
        doc.title = payload.get("title", doc.title)
        doc.body = payload["body"]
        doc.version += 1
        return undo
    if t == "document_remove":
        doc = community.documents.pop(payload["document"])
        return {"prior": doc.to_dict()}
    if t == "community_config_edit":
        undo = {"config": {}, "external_calls_enabled": community.external_calls_enabled}
        for key in ("default_disposition", "http_allowlist", "tick_period"):
            if key in payload:
                undo["config"][key] = state.config.get(key)
                state.config[key] = payload[key]
        if "external_calls_enabled" in payload:
            community.external_calls_enabled = payload["external_calls_enabled"]
        return undo
    raise InvalidInputError(f"not a constitution action type: {t}")


def apply_revert(state: EngineState, rec: ActionRecord, undo: dict) -> None:
    community = state.community
    t = rec.action_type

    if t in POLICY_OPS:
        # companion events restore the policy list; counters roll back here
        for key, value in undo.get("counters_before", {}).items():
            state.counters[key] = value
        return
    if t == "role_add":
        community.roles.pop(undo["role_id"], None)
        state.counters["role"] = undo["counter_before"]
    elif t == "role_remove":
        role = Role.from_dict(undo["prior"])
        community.roles[role.id] = role
    elif t == "role_grant_permission":
        if not undo["had"]:
            community.roles[undo["role_id"]].permissions.discard(
                (rec.payload["action_type"], rec.payload["kind"])
            )
    elif t == "role_revoke_permission":
        if undo["had"]:
            community.roles[undo["role_id"]].permissions.add(
                (rec.payload["action_type"], rec.payload["kind"])
            )
    elif t == "role_add_member":
        if not undo["was_member"]:
            community.roles[undo["role_id"]].remove_member(rec.payload["user"])
    elif t == "role_remove_member":
        if undo["was_member"]:
            role = community.roles[undo["role_id"]]
            role.members.insert(undo["index"], rec.payload["user"])
    elif t == "document_add":
        community.documents.pop(undo["document_id"], None)
        state.counters["document"] = undo["counter_before"]
    elif t == "document_edit":
        doc = community.documents[undo["document_id"]]
        doc.title = undo["title"]
        doc.body = undo["body"]
        doc.version = undo["version"]
    elif t == "document_remove":
        doc = Document.from_dict(undo["prior"])
        community.documents[doc.id] = doc
    elif t == "community_config_edit":
        for key, value in undo["config"].items():
            state.config[key] = value
        community.external_calls_enabled = undo["external_calls_enabled"]
    else:
        raise InvalidInputError(f"not a constitution action type: {t}")
