from __future__ import annotations

import json
import random

import httpx
import pytest

from govkit.adapters import SandboxAdapter, WebhookAdapter
from govkit.adapters.webhook import sign_body, verify_signature
from govkit.canonical import canonical_json
from govkit.errors import ExecutionFailedError

from conftest import make_engine, policy_source

HOLD = """
# description: hold renames for votes
def filter(action, policy) { return action.action_type == "rename_channel" }
def initialize(action, policy) { }
def check(action, policy) {
  if proposal.get_yes_votes() >= 2 { return PASSED }
  if proposal.get_no_votes() >= 2 { return FAILED }
}
def notify(action, policy) { notify_users(users, "vote please", "boolean") }
def pass(action, policy) { action.execute() }
def fail(action, policy) { }
"""


def sandbox_payload(rng: random.Random, platform: dict, action_type: str, handles: list[str]):
    channels = list(platform["channels"].keys())
    if action_type == "post_message":
        return {"channel": rng.choice(channels), "text": f"msg {rng.randrange(10_000)}"}
    if action_type == "rename_channel":
        return {"old": rng.choice(channels), "new": f"chan{rng.randrange(10_000)}"}
    if action_type == "set_channel_topic":
        return {"channel": rng.choice(channels), "topic": f"topic {rng.randrange(100)}"}
    if action_type == "create_channel":
        return {"name": f"new{rng.randrange(10_000)}"}
    if action_type == "join_channel":
        return {"channel": rng.choice(channels), "user": rng.choice(handles)}
    raise AssertionError(action_type)


def test_sandbox_execute_revert_identity_random():
    adapter = SandboxAdapter()
    handles = ["@a", "@b", "@c"]
    platform = adapter.initial_platform_state(handles)
    rng = random.Random(7)
    types = sorted(adapter.action_types())
    for i in range(300):
        action_type = rng.choice(types)
        payload = sandbox_payload(rng, platform, action_type, handles)
        try:
            adapter.validate_execute(platform, action_type, payload)
        except ExecutionFailedError:
            continue
        before = canonical_json(platform)
        undo = adapter.apply_execute(platform, action_type, payload, "@a")
        adapter.apply_revert(platform, action_type, payload, undo, "@a")
        assert canonical_json(platform) == before, f"{action_type} #{i} did not restore state"


def test_sandbox_message_ids_monotone_and_restored():
    adapter = SandboxAdapter()
    platform = adapter.initial_platform_state(["@a"])
    u1 = adapter.apply_execute(platform, "post_message", {"channel": "general", "text": "one"}, "@a")
    u2 = adapter.apply_execute(platform, "post_message", {"channel": "general", "text": "two"}, "@a")
    assert (u1["message_id"], u2["message_id"]) == ("m-000001", "m-000002")
    adapter.apply_revert(platform, "post_message", {"channel": "general", "text": "two"}, u2, "@a")
    u3 = adapter.apply_execute(platform, "post_message", {"channel": "general", "text": "three"}, "@a")
    assert u3["message_id"] == "m-000002"  # counter restored with the revert


def test_invalid_execute_rejected():
    adapter = SandboxAdapter()
    platform = adapter.initial_platform_state(["@a"])
    with pytest.raises(ExecutionFailedError):
        adapter.validate_execute(platform, "rename_channel", {"old": "missing", "new": "x"})
    with pytest.raises(ExecutionFailedError):
        adapter.validate_execute(platform, "create_channel", {"name": "general"})


def test_notification_gets_exactly_one_live_listener(engine):
    engine.enact_policy_genesis({"source": HOLD, "layer": "platform"})
    aid = engine.submit_action("usr-0001", "rename_channel", {"old": "general", "new": "x"})
    listeners = engine.state.platform["listeners"]
    live = [m for m, l in listeners.items() if l["alive"] and l["action"] == aid]
    assert len(live) == 1
    engine.cast_vote("usr-0001", aid, True)
    engine.cast_vote("usr-0002", aid, True)
    assert not any(l["alive"] for l in engine.state.platform["listeners"].values())


def test_vote_signals_decode_and_record(engine):
    engine.enact_policy_genesis({"source": HOLD, "layer": "platform"})
    aid = engine.submit_action("usr-0001", "rename_channel", {"old": "general", "new": "x"})
    message = engine.state.platform["governance_messages"][-1]["id"]
    engine.ingest_vote_signal(message, "@bob", "yes")
    tally = engine.ingest_vote_signal(message, "@carol", "+1")
    assert tally["status"] == "PASSED"
    # signal after decision is stale
    assert engine.ingest_vote_signal(message, "@dave", "yes") is None
    rejected = [e for e in engine.log.events if e["kind"] == "IngressRejected"]
    assert rejected and rejected[-1]["payload"]["reason"] == "STALE_VOTE"


def test_signal_from_non_notified_member_counts(engine):
    # tally restriction lives in policy code, not the adapter
    jury = policy_source("jury.pol")
    engine.enact_policy_genesis({"source": jury, "layer": "platform"})
    aid = engine.ingest_platform_event(
        {"user": "@alice", "type": "rename_channel", "payload": {"old": "general", "new": "x"}}
    )
    message = engine.state.platform["governance_messages"][-1]["id"]
    jurors = set(engine.get_action(aid).data.get("jury"))
    outsider = next(u for u in engine.state.community.members.values() if u.id not in jurors)
    tally = engine.ingest_vote_signal(message, outsider.platform_handle, "yes")
    assert tally["yes"] == 1  # recorded
    assert engine.get_action(aid).proposal.status == "PROPOSED"  # but the jury tally ignores it


def test_undecodable_and_unknown_signals_audited(engine):
    engine.enact_policy_genesis({"source": HOLD, "layer": "platform"})
    engine.submit_action("usr-0001", "rename_channel", {"old": "general", "new": "x"})
    message = engine.state.platform["governance_messages"][-1]["id"]
    assert engine.ingest_vote_signal(message, "@bob", "banana") is None
    assert engine.ingest_vote_signal(message, "@nobody", "yes") is None
    assert engine.ingest_vote_signal("n-999999", "@bob", "yes") is None
    reasons = [e["payload"]["reason"] for e in engine.log.events if e["kind"] == "IngressRejected"]
    assert reasons == ["UNDECODABLE_SIGNAL", "UNKNOWN_ACTOR", "STALE_VOTE"]


def test_choice_signal_out_of_range_audited(engine):
    engine.enact_policy_genesis({"source": policy_source("election.pol"), "layer": "constitution", "precedence": 5})
    aid = engine.submit_action(
        "usr-0001", "election_bundle", {"office": "Steward"},
        members=[
            {"action_type": "role_add_member", "payload": {"role": "members", "user": "usr-0001", "label": "A"}},
            {"action_type": "role_add_member", "payload": {"role": "members", "user": "usr-0002", "label": "B"}},
        ],
    )
    message = engine.state.platform["governance_messages"][-1]["id"]
    assert engine.state.platform["listeners"][message]["options_count"] == 2
    assert engine.ingest_vote_signal(message, "@bob", "3") is None
    reasons = [e["payload"]["reason"] for e in engine.log.events if e["kind"] == "IngressRejected"]
    assert "INVALID_INPUT" in reasons
    tally = engine.ingest_vote_signal(message, "@bob", "2")
    assert tally["options"]["2"] == 1


def test_unknown_actor_event_dropped(engine):
    assert engine.ingest_platform_event({"user": "@stranger", "type": "post_message",
                                         "payload": {"channel": "general", "text": "hi"}}) is None
    rejected = [e for e in engine.log.events if e["kind"] == "IngressRejected"]
    assert rejected[-1]["payload"]["reason"] == "UNKNOWN_ACTOR"


def test_unregistered_event_type_ignored(engine):
    assert engine.ingest_platform_event({"user": "@alice", "type": "play_music", "payload": {}}) is None
    rejected = [e for e in engine.log.events if e["kind"] == "IngressRejected"]
    assert rejected[-1]["payload"]["reason"] == "UNREGISTERED_TYPE"


def test_webhook_event_id_dedupes(engine):
    event = {"event_id": "ev-1", "user": "@alice", "type": "post_message",
             "payload": {"channel": "general", "text": "hi"}}
    a = engine.ingest_platform_event(event)
    b = engine.ingest_platform_event(event)
    assert a == b
    assert len([e for e in engine.log.events if e["kind"] == "ActionProposed"]) == 1


# --- webhook adapter ---------------------------------------------------------


def test_hmac_sign_and_verify():
    body = b'{"event_id": "e1"}'
    signature = sign_body("secret", body)
    assert verify_signature("secret", body, signature)
    assert not verify_signature("secret", body, "deadbeef")
    assert not verify_signature("other", body, signature)


def _webhook(config_overrides=None, transport=None):
    config = {
        "secret": "s3cret",
        "notify_url": "https://bridge.local/notify",
        "bindings": {
            "post_message": {
                "execute_url": "https://bridge.local/execute",
                "revert_url": "https://bridge.local/revert",
                "required": ["channel", "text"],
            }
        },
    }
    config.update(config_overrides or {})
    return WebhookAdapter(config, transport=transport, backoff_base=0.001)


def test_webhook_execute_posts_signed_body():
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200)

    adapter = _webhook(transport=httpx.MockTransport(handler))
    adapter.external_execute("post_message", {"channel": "general", "text": "hi"}, "act-000001")
    assert len(seen) == 1
    request = seen[0]
    assert verify_signature("s3cret", request.content, request.headers["X-Signature"])
    assert json.loads(request.content)["action_id"] == "act-000001"


def test_webhook_retries_then_fails():
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(1)
        return httpx.Response(500)

    adapter = _webhook(transport=httpx.MockTransport(handler))
    with pytest.raises(ExecutionFailedError):
        adapter.external_execute("post_message", {"channel": "general", "text": "hi"}, "act-000001")
    assert len(calls) == 3


def test_webhook_succeeds_after_transient_failure():
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(1)
        return httpx.Response(500 if len(calls) < 3 else 200)

    adapter = _webhook(transport=httpx.MockTransport(handler))
    adapter.external_execute("post_message", {"channel": "general", "text": "hi"}, "act-000001")
    assert len(calls) == 3


def test_webhook_engine_records_execution_failed():
    from govkit.clock import Clock
    from govkit.engine import Engine
    from govkit.store import EventLog

    adapter = _webhook(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    engine = Engine.bootstrap(
        name="demo", members=[("alice", "@alice"), ("bob", "@bob")], seed=1,
        log=EventLog(), adapter=adapter, clock=Clock(),
    )
    aid = engine.submit_action("usr-0001", "post_message", {"channel": "general", "text": "hi"})
    rec = engine.get_action(aid)
    assert rec.proposal.status == "PASSED"  # decided by default-allow
    failures = [
        e for e in engine.log.events
        if e["kind"] == "EffectApplied" and e["payload"].get("error") == "EXECUTION_FAILED"
    ]
    assert failures
