"""The policy engine: pipeline, scheduler, votes, bundles, and trial mode.

Single-writer core: every command (submit, vote, tick, adapter event) is
serialized under one lock, derives a list of events from a read-only view of
state, appends each event to the log (write-ahead), and applies it through
`apply_event` — the same function replay uses. External I/O (webhook
delivery) happens at derive time with outcomes recorded in events, so replay
never repeats it.
"""

from __future__ import annotations

import copy
import re
import threading
from collections import deque
from datetime import datetime, timedelta

from . import constitution
from .adapters.base import PlatformAdapter
from .canonical import format_ts, parse_ts, stable_hash64
from .clock import Clock
from .dsl import parser as dsl_parser
from .dsl.host import SandboxEnvironment, coerce_check_result, coerce_filter_result
from .dsl.interpreter import ExecutionBudget, evaluate_policy_function
from .dsl import surface
from .errors import (
    ConflictError,
    ExecutionFailedError,
    ForbiddenError,
    GovkitError,
    InvalidInputError,
    NotFoundError,
    PolicyEvalError,
    SchemaViolationError,
    StaleVoteError,
    StorageFailedError,
    UnknownActionTypeError,
)
from .model import (
    BUNDLE_TYPES,
    COMBINATION,
    CONSTITUTION,
    ELECTION,
    EXECUTE,
    FAILED,
    ORIGIN_PLATFORM_EVENT,
    ORIGIN_POLICY_GENERATED,
    PASSED,
    PLATFORM,
    PROPOSE,
    PROPOSED,
    ActionRecord,
    PolicyRecord,
    Proposal,
    Vote,
    check_permission,
    member_tokens,
    new_community,
)
from .state import DEFAULT_CONFIG, EngineState
from .store import EventLog, query_audit

STARTER_POLICY_RESOURCE = "starter.pol"

_TEMPLATE_RE = re.compile(r"\{(\w+)\}")


def _render_template(template: str, rec: ActionRecord, community) -> str:
    fields = {"action_type": rec.action_type, "action_id": rec.id}
    initiator = community.members.get(rec.initiator)
    fields["initiator"] = initiator.display_name if initiator else rec.initiator
    for key, value in rec.payload.items():
        if isinstance(value, (str, int, float, bool)):
            fields[key] = str(value)
    return _TEMPLATE_RE.sub(lambda m: fields.get(m.group(1), m.group(0)), template)


def starter_policy_source() -> str:
    from importlib import resources

    return resources.files("govkit.policies").joinpath(STARTER_POLICY_RESOURCE).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# Event application (shared by the live engine and replay)
# ---------------------------------------------------------------------------


def apply_event(state: EngineState, event: dict, adapter: PlatformAdapter) -> None:
    kind = event["kind"]
    payload = event["payload"]
    ts = event["ts"]

    if kind == "ConfigChanged":
        genesis = payload.get("genesis")
        if genesis:
            from .model import Community

            state.community = Community.from_dict(genesis["community"])
            state.platform = genesis["platform"]
            state.tokens = genesis["tokens"]
            state.config = genesis["config"]
            state.counters = genesis.get("counters", {})
        return

    if kind == "PolicyEnacted":
        record = PolicyRecord.from_dict(payload["policy"])
        state.retired_policies.pop(record.id, None)
        replaces = payload.get("replaces")
        if replaces is not None:
            for i, existing in enumerate(state.policies):
                if existing.id == replaces:
                    state.policies[i] = record
                    break
            else:
                state.policies.append(record)
        elif payload.get("index") is not None:
            state.policies.insert(payload["index"], record)
        else:
            state.policies.append(record)
        match = re.search(r"(\d+)$", record.id)
        if match:
            state.counters["policy"] = max(state.counters.get("policy", 0), int(match.group(1)))
        state.counters["policy_seq"] = max(state.counters.get("policy_seq", 0), record.seq)
        return

    if kind == "PolicyRetired":
        pid = payload["policy"]
        record = next((p for p in state.policies if p.id == pid), None)
        if record is not None:
            state.policies = [p for p in state.policies if p.id != pid]
            if not payload.get("revert"):
                state.retired_policies[pid] = record
        return

    if kind == "ActionProposed":
        records = [payload["action"]] + payload.get("members", [])
        for rec_dict in records:
            rec = ActionRecord.from_dict(rec_dict)
            state.actions[rec.id] = rec
            match = re.search(r"(\d+)$", rec.id)
            if match:
                state.counters["action"] = max(state.counters.get("action", 0), int(match.group(1)))
        key = payload.get("idempotency_key")
        if key:
            state.idempotency[key] = payload["action"]["id"]
        event_id = payload.get("ingress_event_id")
        if event_id:
            state.ingested_events[event_id] = payload["action"]["id"]
        return

    if kind == "GoverningPolicyPinned":
        state.actions[payload["action"]].proposal.governing_policy = payload["policy"]
        return

    if kind == "VoteCast":
        rec = state.actions[payload["action"]]
        rec.proposal.votes[payload["voter"]] = Vote(
            voter=payload["voter"], kind=payload["kind"], value=payload["value"], cast_at=parse_ts(ts)
        )
        return

    if kind == "Decision":
        rec = state.actions[payload["action"]]
        rec.proposal.status = payload["disposition"]
        rec.proposal.decided_at = parse_ts(ts)
        listeners = state.platform.get("listeners", {})
        for listener in listeners.values():
            if listener["action"] == payload["action"]:
                listener["alive"] = False
        return

    if kind == "ActionExecuted":
        rec = state.actions[payload["action"]]
        state.applied[rec.id] = True
        if rec.layer == CONSTITUTION:
            state.undo[rec.id] = constitution.apply_execute(state, rec)
        elif adapter.is_local:
            actor = _actor_handle(state, rec)
            state.undo[rec.id] = adapter.apply_execute(state.platform, rec.action_type, rec.payload, actor)
        return

    if kind == "ActionReverted":
        rec = state.actions[payload["action"]]
        undo = state.undo.pop(rec.id, None)
        state.applied.pop(rec.id, None)
        if rec.layer == CONSTITUTION:
            constitution.apply_revert(state, rec, undo or {})
        elif adapter.is_local:
            actor = _actor_handle(state, rec)
            adapter.apply_revert(state.platform, rec.action_type, rec.payload, undo or {}, actor)
        return

    if kind == "EffectApplied":
        _apply_effect(state, event, adapter)
        return

    # PolicyFunctionError, TrialDisposition, IngressRejected: audit-only.
    return


def _actor_handle(state: EngineState, rec: ActionRecord) -> str:
    user = state.community.members.get(rec.initiator)
    return user.platform_handle if user else rec.initiator


def _apply_effect(state: EngineState, event: dict, adapter: PlatformAdapter) -> None:
    payload = event["payload"]
    effect = payload["effect"]

    if effect == "platform_attempt":
        rec = state.actions[payload["action"]]
        state.applied[rec.id] = True
        if adapter.is_local:
            actor = _actor_handle(state, rec)
            state.undo[rec.id] = adapter.apply_execute(state.platform, rec.action_type, rec.payload, actor)
        return

    if effect == "notify":
        if payload.get("noop"):
            return
        message_id = payload["message_id"]
        platform = state.platform
        platform.setdefault("governance_messages", []).append(
            {
                "id": message_id,
                "action": payload["action"],
                "recipients": payload["users"],
                "text": payload["text"],
                "vote_kind": payload["vote_kind"],
                "options": payload.get("options"),
            }
        )
        counters = platform.setdefault("counters", {})
        match = re.search(r"(\d+)$", message_id)
        if match:
            counters["notice"] = max(counters.get("notice", 0), int(match.group(1)))
        rec = state.actions[payload["action"]]
        if payload["vote_kind"] != "none" and rec.proposal.status == PROPOSED:
            platform.setdefault("listeners", {})[message_id] = {
                "action": payload["action"],
                "vote_kind": payload["vote_kind"],
                "options_count": len(payload.get("options") or []),
                "alive": True,
            }
        return

    if effect == "notify_phase_done":
        state.notified.setdefault(payload["action"], []).append(payload["stage"])
        return

    if effect == "stage_entered":
        state.stage[payload["action"]] = payload["stage"]
        return

    if effect == "data_set":
        scope_kind, scope_id = payload["scope"]
        if scope_kind == "action":
            store = state.actions[scope_id].data
        else:
            store = _stage_store(state, scope_id)
        if store is not None:
            store.entries[payload["key"]] = payload["value"]
        return

    if effect == "bundle_remove":
        bundle = state.actions[payload["bundle"]]
        member_id = payload["member"]
        if member_id not in bundle.member_ids:
            return
        removed_index = bundle.member_ids.index(member_id) + 1  # options are 1-based
        bundle.member_ids.remove(member_id)
        votes = bundle.proposal.votes
        for voter in list(votes.keys()):
            vote = votes[voter]
            if vote.kind != "choice":
                continue
            if vote.value == removed_index:
                del votes[voter]
            elif vote.value > removed_index:
                votes[voter] = Vote(vote.voter, vote.kind, vote.value - 1, vote.cast_at)
        return

    # execute_noop, execute_failed, revert_noop, revert_failed, log: audit-only.
    return


def _stage_store(state: EngineState, stage_id: str):
    policy_id = stage_id.split("/")[0]
    policy = state.policy_by_id(policy_id)
    if policy is None:
        return None
    for stage in policy.stages:
        if stage.id == stage_id:
            return stage.data
    return None


def replay(events: list[dict], adapter: PlatformAdapter, up_to: int | None = None) -> EngineState:
    """Fold the event log into a state; equals the live state at that offset."""
    state = EngineState()
    for event in events:
        if up_to is not None and event["offset"] > up_to:
            break
        # Copy so state never aliases log entries; mutations must not reach
        # back into the recorded history.
        apply_event(state, copy.deepcopy(event), adapter)
    return state


def replay_from_snapshot(snapshot: dict, events: list[dict], adapter: PlatformAdapter) -> EngineState:
    """Resume from a snapshot body and apply the events after its offset;
    equals a full replay from genesis."""
    state = EngineState.from_dict(copy.deepcopy(snapshot["state"]))
    for event in events:
        if event["offset"] <= snapshot["as_of"]:
            continue
        apply_event(state, copy.deepcopy(event), adapter)
    return state


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class Engine:
    def __init__(self, *, log: EventLog, adapter: PlatformAdapter, clock: Clock, fetcher=None):
        self._lock = threading.RLock()
        self._decision_event = threading.Condition(threading.Lock())
        self.log = log
        self.adapter = adapter
        self.clock = clock
        self.fetcher = fetcher
        self.state = replay(log.events, adapter)
        if log.events:
            self.clock.ensure_at_least(parse_ts(log.events[-1]["ts"]))
        self._program_cache: dict[str, dsl_parser.PolicyProgram] = {}
        self._followups: deque = deque()

    # -- construction

    @classmethod
    def bootstrap(
        cls,
        *,
        name: str,
        members: list[tuple[str, str]],
        seed: int,
        log: EventLog,
        adapter: PlatformAdapter,
        clock: Clock | None = None,
        fetcher=None,
        roles: list[dict] | None = None,
        config: dict | None = None,
        starter_source: str | None = None,
    ) -> "Engine":
        if log.events:
            raise ConflictError("event log already contains a community")
        clock = clock or Clock()
        action_types = sorted(
            set(adapter().action_types().keys() if isinstance(adapter, type) else adapter.action_types().keys())
            | set(constitution.CATALOG)
            | set(BUNDLE_TYPES.keys())
        )
        adapter_obj = adapter() if isinstance(adapter, type) else adapter
        community = new_community(name, members, seed, adapter=adapter_obj.name, action_types=action_types)
        for i, role_spec in enumerate(roles or [], start=2):
            role_id = f"role-{i:04d}"
            member_ids = []
            for ref in role_spec.get("members", []):
                user = next((u for u in community.members.values() if u.display_name == ref or u.id == ref), None)
                if user is None:
                    raise InvalidInputError(f"unknown member {ref!r} for role {role_spec['name']!r}")
                member_ids.append(user.id)
            from .model import Role

            community.roles[role_id] = Role(
                id=role_id,
                name=role_spec["name"],
                permissions={(g["action_type"], g["kind"]) for g in role_spec.get("permissions", [])},
                members=member_ids,
            )
        merged_config = dict(DEFAULT_CONFIG)
        merged_config.update(config or {})
        if merged_config.get("http_allowlist") and "external_calls_enabled" not in (config or {}):
            community.external_calls_enabled = True
        if (config or {}).get("external_calls_enabled"):
            community.external_calls_enabled = True
        merged_config.pop("external_calls_enabled", None)

        handles = [u.platform_handle for u in community.members.values()]
        genesis = {
            "community": community.to_dict(),
            "platform": adapter_obj.initial_platform_state(handles),
            "tokens": member_tokens(community),
            "config": merged_config,
            "counters": {"role": len(community.roles), "document": len(community.documents)},
        }
        engine = cls(log=log, adapter=adapter_obj, clock=clock, fetcher=fetcher)
        with engine._lock:
            engine._emit("ConfigChanged", {"genesis": genesis})
            starter = constitution.build_policy_record(
                engine.state, {"source": starter_source or starter_policy_source(), "layer": CONSTITUTION}, engine._now_str()
            )
            engine._emit("PolicyEnacted", {"policy": starter.to_dict(), "genesis": True})
        return engine

    @classmethod
    def load(cls, log: EventLog, *, clock: Clock | None = None, fetcher=None, adapter: PlatformAdapter | None = None) -> "Engine":
        if not log.events:
            raise InvalidInputError("event log is empty; bootstrap first")
        if adapter is None:
            from .adapters.base import get_adapter

            genesis = log.events[0]["payload"].get("genesis") or {}
            adapter_name = genesis.get("community", {}).get("adapter", "sandbox")
            adapter = get_adapter(adapter_name)()
        return cls(log=log, adapter=adapter, clock=clock or Clock(), fetcher=fetcher)

    # -- internals

    def _now(self) -> datetime:
        return self.clock.now()

    def _now_str(self) -> str:
        return format_ts(self._now())

    def _emit(self, kind: str, payload: dict, deciding_policy: str | None = None) -> dict:
        event = self.log.append(kind, self._now_str(), payload, deciding_policy)
        apply_event(self.state, copy.deepcopy(event), self.adapter)
        if kind == "Decision":
            with self._decision_event:
                self._decision_event.notify_all()
        return event

    def _require_ready(self) -> None:
        if self.log.halted:
            raise StorageFailedError("engine halted: event log storage failed")
        if self.state.community is None:
            raise InvalidInputError("community not bootstrapped")

    def _program_for(self, policy: PolicyRecord, stage_index: int) -> dsl_parser.PolicyProgram:
        stage = policy.stages[stage_index]
        key = f"{stage.id}:{hash(stage.source)}"
        program = self._program_cache.get(key)
        if program is None:
            program = dsl_parser.parse_policy_source(stage.source)
            self._program_cache[key] = program
        return program

    def _capabilities(self, for_filter: bool) -> frozenset:
        if for_filter:
            return surface.FILTER_CAPABILITIES
        caps = set(surface.ALL_CAPABILITIES)
        if not self.state.community.external_calls_enabled:
            caps.discard(surface.HTTP_FETCH)
        return frozenset(caps)

    def _build_env(self, rec: ActionRecord, policy: PolicyRecord, stage_index: int, *, for_filter: bool) -> SandboxEnvironment:
        state = self.state
        return SandboxEnvironment(
            community=state.community,
            action=rec,
            policy=policy,
            stage_index=stage_index,
            policies=list(state.policies),
            capabilities=self._capabilities(for_filter),
            budget=ExecutionBudget(),
            now=self._now(),
            rng_seed=(state.community.rng_seed ^ stable_hash64(rec.id)) & 0xFFFFFFFFFFFFFFFF,
            action_lookup=lambda aid: state.actions.get(aid),
            fetcher=self.fetcher,
            http_allowlist=tuple(state.config.get("http_allowlist", [])),
        )

    def _eval_fn(self, rec: ActionRecord, policy: PolicyRecord, stage_index: int, name: str, *, for_filter: bool = False):
        """Evaluate one lifecycle function. Returns (outcome, error). Errors are
        audited and the caller substitutes the neutral value; effects from a
        failed evaluation are discarded."""
        try:
            program = self._program_for(policy, stage_index)
            env = self._build_env(rec, policy, stage_index, for_filter=for_filter)
            outcome = evaluate_policy_function(program, name, env)
            return outcome, None
        except GovkitError as err:
            self._emit(
                "PolicyFunctionError",
                {
                    "action": rec.id,
                    "policy": policy.id,
                    "stage": stage_index,
                    "function": name,
                    "code": err.code,
                    "message": err.message,
                },
                deciding_policy=policy.id,
            )
            return None, err

    # -- public commands ----------------------------------------------------

    def submit_action(
        self,
        initiator: str,
        action_type: str,
        payload: dict | None = None,
        *,
        origin: str = "web_proposal",
        layer: str | None = None,
        datetime_trigger: datetime | str | None = None,
        members: list[dict] | None = None,
        idempotency_key: str | None = None,
        ingress_event_id: str | None = None,
    ) -> str:
        with self._lock:
            self._require_ready()
            aid = self._submit(
                initiator,
                action_type,
                payload or {},
                origin=origin,
                layer=layer,
                datetime_trigger=datetime_trigger,
                members=members,
                idempotency_key=idempotency_key,
                ingress_event_id=ingress_event_id,
            )
            self._drain_followups()
            return aid

    def _resolve_layer(self, action_type: str, members: list[dict] | None) -> str:
        community = self.state.community
        if action_type not in community.action_types:
            raise UnknownActionTypeError(f"unknown action type: {action_type}")
        if action_type in BUNDLE_TYPES:
            if not members:
                raise InvalidInputError("bundle actions need a non-empty member list")
            member_layers = {self._resolve_layer(m["action_type"], m.get("members")) for m in members}
            if len(member_layers) != 1:
                raise InvalidInputError("bundle members must share one layer")
            return member_layers.pop()
        if action_type in constitution.CATALOG:
            return CONSTITUTION
        return PLATFORM

    def _validate_payload(self, action_type: str, payload: dict, members: list[dict] | None, depth: int = 0) -> None:
        if depth > 2:
            raise InvalidInputError("bundles nest at most two levels")
        if action_type in BUNDLE_TYPES:
            for member in members or []:
                if BUNDLE_TYPES.get(member["action_type"]) == ELECTION:
                    raise InvalidInputError("elections cannot nest inside bundles")
                if member["action_type"] in BUNDLE_TYPES and BUNDLE_TYPES[action_type] == COMBINATION:
                    raise InvalidInputError("combination members must be plain actions")
                self._validate_payload(member["action_type"], member.get("payload", {}), member.get("members"), depth + 1)
            return
        if action_type in constitution.CATALOG:
            errors = constitution.validate_payload(action_type, payload, self.state)
            if errors:
                raise SchemaViolationError(f"invalid {action_type} payload", field_errors=errors)
        else:
            errors = self.adapter.validate_payload(action_type, payload)
            if errors:
                raise SchemaViolationError(f"invalid {action_type} payload", field_errors=errors)

    def _build_records(
        self, initiator: str, action_type: str, payload: dict, origin: str,
        members: list[dict] | None, trigger: datetime | None, parent: str | None, created: datetime,
    ) -> list[ActionRecord]:
        aid = f"act-{self.state.bump('action'):06d}"
        bundle_kind = BUNDLE_TYPES.get(action_type)
        rec = ActionRecord(
            id=aid,
            action_type=action_type,
            layer=self._resolve_layer(action_type, members),
            initiator=initiator,
            payload=payload,
            origin=origin,
            proposal=Proposal(status=PROPOSED, created_at=created),
            datetime_trigger=trigger,
            bundle_kind=bundle_kind,
            parent_bundle=parent,
        )
        records = [rec]
        for member in members or []:
            child_records = self._build_records(
                initiator, member["action_type"], member.get("payload", {}), origin,
                member.get("members"), None, aid, created,
            )
            rec.member_ids.append(child_records[0].id)
            records.extend(child_records)
        return records

    def _submit(
        self, initiator: str, action_type: str, payload: dict, *,
        origin: str, layer: str | None, datetime_trigger, members, idempotency_key, ingress_event_id,
    ) -> str:
        state = self.state
        community = state.community
        if initiator not in community.members:
            raise ForbiddenError(f"initiator {initiator!r} is not a community member")
        if idempotency_key and idempotency_key in state.idempotency:
            return state.idempotency[idempotency_key]
        if ingress_event_id and ingress_event_id in state.ingested_events:
            return state.ingested_events[ingress_event_id]

        resolved_layer = self._resolve_layer(action_type, members)
        if layer is not None and layer != resolved_layer:
            raise InvalidInputError(f"{action_type} is a {resolved_layer}-layer action")
        self._validate_payload(action_type, payload, members)

        trigger = None
        if datetime_trigger is not None:
            trigger = parse_ts(datetime_trigger) if isinstance(datetime_trigger, str) else datetime_trigger

        # Counter state must not change before the event applies; build records
        # against a scratch copy of the counter.
        counter_before = state.counters.get("action", 0)
        records = self._build_records(initiator, action_type, payload, origin, members, trigger, None, self._now())
        state.counters["action"] = counter_before  # the ActionProposed apply re-bumps

        rec = records[0]
        self._emit(
            "ActionProposed",
            {
                "action": rec.to_dict(),
                "members": [r.to_dict() for r in records[1:]],
                "idempotency_key": idempotency_key,
                "ingress_event_id": ingress_event_id,
            },
        )

        if origin == ORIGIN_PLATFORM_EVENT:
            self._emit("EffectApplied", {"effect": "platform_attempt", "action": rec.id, "external": not self.adapter.is_local})

        if origin != ORIGIN_POLICY_GENERATED and not check_permission(community, initiator, PROPOSE, action_type):
            self._decide(rec.id, FAILED, reason="no_propose_permission", policy=None)
            return rec.id

        if trigger is not None and trigger > self._now():
            return rec.id  # steps 3-7 defer to the trigger time

        self._activate(rec.id)
        return rec.id

    # -- policy selection and evaluation

    def _dispatch_stage(self, rec: ActionRecord, policy: PolicyRecord) -> int | None:
        """First stage whose filter matches. Multi-stage records dispatch on
        every visit (round ordering lives in the action's data); single-stage
        records, once pinned, always dispatch to their only stage."""
        if not policy.is_bundle:
            return 0
        for index in range(len(policy.stages)):
            outcome, err = self._eval_fn(rec, policy, index, "filter", for_filter=True)
            if err is not None:
                continue
            try:
                if coerce_filter_result(outcome.value):
                    return index
            except PolicyEvalError as err2:
                self._emit(
                    "PolicyFunctionError",
                    {"action": rec.id, "policy": policy.id, "stage": index, "function": "filter",
                     "code": err2.code, "message": err2.message},
                    deciding_policy=policy.id,
                )
        return None

    def select_governing_policy(self, rec: ActionRecord) -> PolicyRecord | None:
        """Precedence descending, then enactment recency; first filter match
        wins and is pinned for the proposal's lifetime."""
        for policy in self.state.enacted_for_layer(rec.layer):
            if policy.is_bundle:
                if self._dispatch_stage(rec, policy) is not None:
                    return policy
                continue
            outcome, err = self._eval_fn(rec, policy, 0, "filter", for_filter=True)
            if err is not None:
                continue
            try:
                if coerce_filter_result(outcome.value):
                    return policy
            except PolicyEvalError as err2:
                self._emit(
                    "PolicyFunctionError",
                    {"action": rec.id, "policy": policy.id, "stage": 0, "function": "filter",
                     "code": err2.code, "message": err2.message},
                    deciding_policy=policy.id,
                )
        return None

    def _activate(self, aid: str) -> None:
        state = self.state
        rec = state.actions[aid]
        community = state.community

        if check_permission(community, rec.initiator, EXECUTE, rec.action_type):
            self._decide(aid, PASSED, reason="bypass", policy=None, note="bypass: execute permission")
            self._derive_execute(rec, [])
            return

        policy = self.select_governing_policy(rec)
        if policy is None:
            disposition = PASSED if state.config.get("default_disposition", "allow") == "allow" else FAILED
            self._decide(aid, disposition, reason="ungoverned", policy=None)
            if disposition == PASSED:
                self._derive_execute(rec, [])
            elif state.applied.get(aid):
                self._derive_revert(rec, reason="ungoverned_deny")
            return

        self._emit("GoverningPolicyPinned", {"action": aid, "policy": policy.id}, deciding_policy=policy.id)
        self._evaluate_action(aid, first_visit=True)

    def _evaluate_action(self, aid: str, *, first_visit: bool = False) -> None:
        state = self.state
        rec = state.actions[aid]
        if rec.proposal.status != PROPOSED:
            return
        policy = state.policy_by_id(rec.proposal.governing_policy or "")
        if policy is None:
            return

        last_stage = len(policy.stages) - 1
        for _ in range(len(policy.stages) + 1):
            stage_index = self._dispatch_stage(rec, policy)
            if stage_index is None:
                return
            if state.stage.get(aid) != stage_index:
                self._emit("EffectApplied", {"effect": "stage_entered", "action": aid, "stage": stage_index})
                outcome, err = self._eval_fn(rec, policy, stage_index, "initialize")
                if err is None:
                    self._apply_effects(rec, policy, stage_index, outcome.effects)

            outcome, err = self._eval_fn(rec, policy, stage_index, "check")
            if err is not None:
                disposition = PROPOSED
            else:
                try:
                    disposition = coerce_check_result(outcome.value)
                except PolicyEvalError as err2:
                    self._emit(
                        "PolicyFunctionError",
                        {"action": aid, "policy": policy.id, "stage": stage_index, "function": "check",
                         "code": err2.code, "message": err2.message},
                        deciding_policy=policy.id,
                    )
                    disposition = PROPOSED

            if disposition == PASSED and stage_index < last_stage:
                # Non-final stage completion: run its pass() as a stage
                # transition and re-dispatch; the proposal stays open.
                pass_outcome, pass_err = self._eval_fn(rec, policy, stage_index, "pass")
                if pass_err is None:
                    self._apply_effects(rec, policy, stage_index, pass_outcome.effects)
                if rec.proposal.status != PROPOSED:
                    return
                continue

            if disposition in (PASSED, FAILED):
                self._finalize(aid, disposition, policy, stage_index)
                return
            break

        if rec.proposal.status != PROPOSED:
            return
        stage_index = state.stage.get(aid, 0)
        if (
            first_visit
            and rec.origin == ORIGIN_PLATFORM_EVENT
            and state.applied.get(aid)
            and not policy.trial_mode
        ):
            self._derive_revert(rec, reason="interception")
        if stage_index not in state.notified.get(aid, []):
            outcome, err = self._eval_fn(rec, policy, stage_index, "notify")
            if err is None:
                self._apply_effects(rec, policy, stage_index, outcome.effects)
            self._emit("EffectApplied", {"effect": "notify_phase_done", "action": aid, "stage": stage_index})

    def _decide(self, aid: str, disposition: str, *, reason: str, policy: PolicyRecord | None,
                stage: int | None = None, trial: bool = False, note: str | None = None) -> None:
        payload = {
            "action": aid,
            "disposition": disposition,
            "reason": reason,
            "policy": policy.id if policy else None,
            "stage": stage,
            "trial": trial,
        }
        if note:
            payload["note"] = note
        self._emit("Decision", payload, deciding_policy=policy.id if policy else None)

    def _finalize(self, aid: str, disposition: str, policy: PolicyRecord, stage_index: int) -> None:
        state = self.state
        rec = state.actions[aid]
        trial = policy.trial_mode
        self._decide(aid, disposition, reason="policy", policy=policy, stage=stage_index, trial=trial)

        executed_members: list[str] = []
        if trial:
            self._emit(
                "TrialDisposition",
                {"action": aid, "would": disposition, "policy": policy.id, "stage": stage_index},
                deciding_policy=policy.id,
            )
        else:
            fname = "pass" if disposition == PASSED else "fail"
            outcome, err = self._eval_fn(rec, policy, stage_index, fname)
            if err is None:
                self._apply_effects(rec, policy, stage_index, outcome.effects, executed_members)
            if disposition == FAILED and rec.origin == ORIGIN_PLATFORM_EVENT and state.applied.get(aid):
                self._derive_revert(rec, reason="failed_proposal")

        if rec.is_bundle:
            self._decide_members(rec, disposition, policy, trial, executed_members)

    def _decide_members(self, rec: ActionRecord, disposition: str, policy: PolicyRecord | None,
                        trial: bool, executed_members: list[str]) -> None:
        for member_id in rec.member_ids:
            member = self.state.actions.get(member_id)
            if member is None or member.proposal.status != PROPOSED:
                continue
            if rec.bundle_kind == ELECTION and disposition == PASSED:
                member_disposition = PASSED if member_id in executed_members else FAILED
            else:
                member_disposition = disposition
            self._decide(member_id, member_disposition, reason="bundle", policy=policy, trial=trial)

    # -- effects

    def _apply_effects(self, rec: ActionRecord, policy: PolicyRecord | None, stage_index: int,
                       effects: list[dict], executed_members: list[str] | None = None) -> None:
        state = self.state
        for effect in effects:
            kind = effect["kind"]
            if kind == "notify":
                self._deliver_notification(rec, effect)
            elif kind == "data_set":
                self._emit(
                    "EffectApplied",
                    {"effect": "data_set", "scope": effect["scope"], "key": effect["key"],
                     "value": effect["value"], "action": rec.id},
                )
            elif kind == "execute":
                target = state.actions.get(effect["action"])
                if target is None or not self._target_allowed(rec, target):
                    self._emit("EffectApplied", {"effect": "execute_failed", "action": effect["action"],
                                                 "error": "FORBIDDEN", "message": "not reachable from this policy"})
                    continue
                ok = self._derive_execute(target, executed_members if executed_members is not None else [])
                if ok and executed_members is not None and target.parent_bundle == rec.id:
                    executed_members.append(target.id)
            elif kind == "revert":
                target = state.actions.get(effect["action"])
                if target is not None and self._target_allowed(rec, target):
                    self._derive_revert(target, reason="policy")
            elif kind == "propose_action":
                self._followups.append(
                    {"initiator": rec.initiator, "action_type": effect["action_type"], "payload": effect["payload"]}
                )
            elif kind == "bundle_remove":
                self._emit("EffectApplied", {"effect": "bundle_remove", "bundle": effect["bundle"],
                                             "member": effect["member"], "action": rec.id})
            elif kind == "log":
                self._emit("EffectApplied", {"effect": "log", "action": rec.id, "text": effect["text"]})

    def _target_allowed(self, rec: ActionRecord, target: ActionRecord) -> bool:
        return target.id == rec.id or target.parent_bundle == rec.id or target.parent_bundle in rec.member_ids

    def _deliver_notification(self, rec: ActionRecord, effect: dict) -> None:
        users = list(dict.fromkeys(effect["users"]))
        stage = self.state.stage.get(rec.id, 0)
        if not users:
            self._emit("EffectApplied", {"effect": "notify", "action": rec.id, "stage": stage,
                                         "noop": True, "users": [], "note": "empty recipient list"})
            return
        text = _render_template(effect["template"], rec, self.state.community)
        options = effect.get("options")
        if options:
            listing = "\n".join(f"{i}. {label}" for i, label in enumerate(options, start=1))
            text = f"{text}\nOptions:\n{listing}"
        counters = self.state.platform.setdefault("counters", {})
        message_id = f"n-{counters.get('notice', 0) + 1:06d}"
        payload = {
            "effect": "notify",
            "action": rec.id,
            "stage": stage,
            "message_id": message_id,
            "users": users,
            "text": text,
            "vote_kind": effect["vote_kind"],
            "options": options,
        }
        if not self.adapter.is_local:
            try:
                self.adapter.external_notify(
                    {"message_id": message_id, "recipients": users, "text": text,
                     "vote_kind": effect["vote_kind"], "options": options}
                )
            except ExecutionFailedError as err:
                self._emit("EffectApplied", {"effect": "notify_failed", "action": rec.id,
                                             "error": err.code, "message": err.message})
                return
        self._emit("EffectApplied", payload)

    def _derive_execute(self, rec: ActionRecord, executed_members: list[str]) -> bool:
        state = self.state
        if rec.is_bundle:
            if rec.bundle_kind == ELECTION:
                self._emit("EffectApplied", {"effect": "execute_failed", "action": rec.id,
                                             "error": "INVALID_INPUT",
                                             "message": "election bundles execute through a chosen member"})
                return False
            executed: list[ActionRecord] = []
            for member_id in list(rec.member_ids):
                member = state.actions[member_id]
                if self._derive_execute(member, executed_members):
                    executed.append(member)
                    executed_members.append(member.id)
                else:
                    for done in reversed(executed):
                        self._derive_revert(done, reason="combination_rollback")
                        if done.id in executed_members:
                            executed_members.remove(done.id)
                    self._emit("EffectApplied", {"effect": "execute_failed", "action": rec.id,
                                                 "error": "EXECUTION_FAILED",
                                                 "message": f"combination member {member_id} failed; rolled back"})
                    return False
            return True

        if state.applied.get(rec.id):
            self._emit("EffectApplied", {"effect": "execute_noop", "action": rec.id,
                                         "note": "already applied on the platform"})
            return True

        if rec.layer == CONSTITUTION:
            try:
                constitution.precheck_execute(state, rec)
            except GovkitError as err:
                self._emit("EffectApplied", {"effect": "execute_failed", "action": rec.id,
                                             "error": err.code, "message": err.message})
                return False
            companions = constitution.derive_companions(state, rec, self._now_str())
            self._emit("ActionExecuted", {"action": rec.id})
            for kind, payload in companions:
                self._emit(kind, payload)
            if rec.action_type == "community_config_edit":
                self._emit("ConfigChanged", {"via": rec.id, "patch": rec.payload})
            return True

        # platform layer
        if self.adapter.is_local:
            try:
                self.adapter.validate_execute(state.platform, rec.action_type, rec.payload)
            except GovkitError as err:
                self._emit("EffectApplied", {"effect": "execute_failed", "action": rec.id,
                                             "error": err.code, "message": err.message})
                return False
            self._emit("ActionExecuted", {"action": rec.id})
            return True
        try:
            self.adapter.external_execute(rec.action_type, rec.payload, rec.id)
        except GovkitError as err:
            self._emit("EffectApplied", {"effect": "execute_failed", "action": rec.id,
                                         "error": err.code, "message": err.message})
            return False
        self._emit("ActionExecuted", {"action": rec.id, "external": True})
        return True

    def _derive_revert(self, rec: ActionRecord, *, reason: str) -> bool:
        state = self.state
        if rec.is_bundle:
            ok = True
            for member_id in reversed(list(rec.member_ids)):
                member = state.actions[member_id]
                if state.applied.get(member_id):
                    ok = self._derive_revert(member, reason=reason) and ok
            return ok
        if not state.applied.get(rec.id):
            self._emit("EffectApplied", {"effect": "revert_noop", "action": rec.id})
            return True
        if rec.layer == CONSTITUTION:
            try:
                undo = constitution.precheck_revert(state, rec)
            except GovkitError as err:
                self._emit("EffectApplied", {"effect": "revert_failed", "action": rec.id,
                                             "error": err.code, "message": err.message})
                return False
            companions = constitution.derive_revert_companions(state, rec, undo)
            self._emit("ActionReverted", {"action": rec.id, "reason": reason})
            for kind, payload in companions:
                self._emit(kind, payload)
            return True
        if self.adapter.is_local:
            self._emit("ActionReverted", {"action": rec.id, "reason": reason})
            return True
        try:
            self.adapter.external_revert(rec.action_type, rec.payload, rec.id)
        except GovkitError as err:
            self._emit("EffectApplied", {"effect": "revert_failed", "action": rec.id,
                                         "error": err.code, "message": err.message})
            return False
        self._emit("ActionReverted", {"action": rec.id, "reason": reason, "external": True})
        return True

    def _drain_followups(self) -> None:
        while self._followups:
            spec = self._followups.popleft()
            try:
                self._submit(
                    spec["initiator"], spec["action_type"], spec["payload"],
                    origin=ORIGIN_POLICY_GENERATED, layer=None, datetime_trigger=spec.get("trigger"),
                    members=spec.get("members"), idempotency_key=None, ingress_event_id=None,
                )
            except GovkitError as err:
                self._emit("IngressRejected", {"source": "propose_action", "reason": err.code,
                                               "message": err.message})

    # -- votes

    def cast_vote(self, voter: str, action_id: str, value: bool | int, *, source: str = "api") -> dict:
        with self._lock:
            self._require_ready()
            state = self.state
            rec = state.actions.get(action_id)
            if rec is None:
                raise NotFoundError(f"no such action: {action_id}")
            if voter not in state.community.members:
                raise ForbiddenError(f"voter {voter!r} is not a community member")
            if rec.parent_bundle is not None:
                raise InvalidInputError("votes attach to the bundle, not its members")
            if rec.proposal.status != PROPOSED:
                self._emit("IngressRejected", {"source": source, "reason": "STALE_VOTE",
                                               "action": action_id, "voter": voter})
                raise StaleVoteError(f"action {action_id} is already {rec.proposal.status}")
            if rec.bundle_kind == ELECTION:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise InvalidInputError("election votes are numbered choices")
                if not 1 <= value <= len(rec.member_ids):
                    self._emit("IngressRejected", {"source": source, "reason": "INVALID_INPUT",
                                                   "action": action_id, "voter": voter,
                                                   "message": f"choice {value} out of range 1..{len(rec.member_ids)}"})
                    raise InvalidInputError(f"choice {value} out of range 1..{len(rec.member_ids)}")
                kind = "choice"
            else:
                if not isinstance(value, bool):
                    raise InvalidInputError("this proposal takes boolean votes")
                kind = "boolean"
            self._emit("VoteCast", {"action": action_id, "voter": voter, "kind": kind, "value": value})
            # Decisions should not wait for the next tick.
            self._evaluate_action(action_id)
            self._drain_followups()
            return self.tally(action_id)

    def tally(self, action_id: str) -> dict:
        rec = self.state.actions[action_id]
        votes = rec.proposal.live_votes()
        if rec.bundle_kind == ELECTION:
            counts = {str(i): 0 for i in range(1, len(rec.member_ids) + 1)}
            for vote in votes:
                if vote.kind == "choice" and str(vote.value) in counts:
                    counts[str(vote.value)] += 1
            return {"kind": "choice", "options": counts, "voters": len([v for v in votes if v.kind == "choice"]),
                    "status": rec.proposal.status}
        yes = sum(1 for v in votes if v.kind == "boolean" and v.value is True)
        no = sum(1 for v in votes if v.kind == "boolean" and v.value is False)
        return {"kind": "boolean", "yes": yes, "no": no, "voters": yes + no, "status": rec.proposal.status}

    # -- scheduler

    def tick(self, now: datetime | None = None) -> list[dict]:
        with self._lock:
            self._require_ready()
            if now is not None:
                self.clock.ensure_at_least(now)
            current = self._now()
            before = self.log.next_offset
            for aid in self.state.pending_action_ids():
                rec = self.state.actions[aid]
                if rec.proposal.governing_policy is None:
                    if rec.proposal.status != PROPOSED:
                        continue
                    # not yet activated: trigger still in the future at submit
                    if rec.datetime_trigger is None or rec.datetime_trigger <= current:
                        self._activate(aid)
                    continue
                self._evaluate_action(aid)
            self._drain_followups()
            return [e for e in self.log.events[before:] if e["kind"] == "Decision"]

    def advance(self, delta: timedelta) -> list[dict]:
        with self._lock:
            self.clock.advance(delta)
            return self.tick()

    # -- adapter ingress

    def ingest_platform_event(self, raw: dict) -> str | None:
        with self._lock:
            self._require_ready()
            handle = raw.get("actor_handle") or raw.get("user")
            actor = self.state.community.user_by_handle(handle) if handle else None
            if actor is None:
                self._emit("IngressRejected", {"source": "platform_event", "reason": "UNKNOWN_ACTOR",
                                               "handle": handle})
                return None
            action_type = raw.get("type")
            adapter_types = self.adapter.action_types()
            if action_type not in adapter_types:
                self._emit("IngressRejected", {"source": "platform_event", "reason": "UNREGISTERED_TYPE",
                                               "type": action_type})
                return None
            payload = raw.get("payload", {})
            if self.adapter.is_local:
                try:
                    self.adapter.validate_execute(self.state.platform, action_type, payload)
                except GovkitError as err:
                    self._emit("IngressRejected", {"source": "platform_event", "reason": err.code,
                                                   "type": action_type, "message": err.message})
                    return None
            try:
                aid = self._submit(
                    actor.id, action_type, payload, origin=ORIGIN_PLATFORM_EVENT, layer=None,
                    datetime_trigger=None, members=None, idempotency_key=None,
                    ingress_event_id=raw.get("event_id"),
                )
            except GovkitError as err:
                self._emit("IngressRejected", {"source": "platform_event", "reason": err.code,
                                               "type": action_type, "message": err.message})
                return None
            self._drain_followups()
            return aid

    def ingest_vote_signal(self, message_ref: str, handle: str, signal: str) -> dict | None:
        with self._lock:
            self._require_ready()
            listeners = self.state.platform.get("listeners", {})
            listener = listeners.get(message_ref)
            if listener is None or not listener.get("alive"):
                self._emit("IngressRejected", {"source": "vote_signal", "reason": "STALE_VOTE",
                                               "message": message_ref, "handle": handle})
                return None
            user = self.state.community.user_by_handle(handle)
            if user is None:
                self._emit("IngressRejected", {"source": "vote_signal", "reason": "UNKNOWN_ACTOR",
                                               "handle": handle})
                return None
            value = _decode_signal(listener["vote_kind"], str(signal))
            if value is None:
                self._emit("IngressRejected", {"source": "vote_signal", "reason": "UNDECODABLE_SIGNAL",
                                               "message": message_ref, "signal": str(signal)})
                return None
            try:
                return self.cast_vote(user.id, listener["action"], value, source="vote_signal")
            except GovkitError:
                return None  # already audited by cast_vote

    # -- reads

    @property
    def lock(self) -> threading.RLock:
        """Readers assembling multi-field views take this to avoid tearing
        against concurrent command processing."""
        return self._lock

    def get_action(self, action_id: str) -> ActionRecord:
        rec = self.state.actions.get(action_id)
        if rec is None:
            raise NotFoundError(f"no such action: {action_id}")
        return rec

    def audit(self, **filters) -> dict:
        return query_audit(self.log.events, **filters)

    def wait_for_decision(self, action_id: str, timeout: float) -> ActionRecord:
        import time as _time

        end = _time.monotonic() + timeout
        while True:
            with self._lock:
                rec = self.get_action(action_id)
                if rec.proposal.status != PROPOSED:
                    return rec
            remaining = end - _time.monotonic()
            if remaining <= 0:
                return rec
            with self._decision_event:
                self._decision_event.wait(min(0.1, max(0.0, remaining)))

    def snapshot(self, directory) -> object:
        """Write a full-state snapshot keyed by the current log offset."""
        from .store import write_snapshot

        with self._lock:
            return write_snapshot(directory, self.log.next_offset - 1, self.state.to_dict())

    # -- genesis-time fixtures

    def enact_policy_genesis(self, payload: dict) -> PolicyRecord:
        """Enact a policy without a governing proposal; scenario and test
        fixture setup only."""
        with self._lock:
            self._require_ready()
            record = constitution.build_policy_record(self.state, payload, self._now_str())
            self._emit("PolicyEnacted", {"policy": record.to_dict(), "genesis": True})
            return record

    def close(self) -> None:
        with self._lock:
            self.log.close()


def _decode_signal(vote_kind: str, signal: str) -> bool | int | None:
    norm = signal.strip().lower()
    if vote_kind == "boolean":
        if norm in ("yes", "y", "+1", "👍", "true"):
            return True
        if norm in ("no", "n", "-1", "👎", "false"):
            return False
        return None
    if vote_kind == "choice":
        try:
            return int(norm)
        except ValueError:
            return None
    return None
