from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from govkit.adapters.webhook import WebhookAdapter, sign_body
from govkit.api import create_app
from govkit.api.app import API_PREFIX, MUTATING_ROUTES
from govkit.clock import Clock
from govkit.engine import Engine
from govkit.store import EventLog

from conftest import make_engine, policy_source


@pytest.fixture
def service():
    engine = make_engine()
    app = create_app(engine)
    client = TestClient(app)
    tokens = {entry["user"]: token for token, entry in engine.state.tokens.items()}
    return engine, client, tokens


def auth(tokens, user="usr-0001"):
    return {"Authorization": f"Bearer {tokens[user]}"}


def test_requests_require_tokens(service):
    _, client, tokens = service
    assert client.get(f"{API_PREFIX}/policies").status_code == 401
    assert client.get(f"{API_PREFIX}/policies", headers={"Authorization": "Bearer bogus"}).status_code == 401
    assert client.get(f"{API_PREFIX}/policies", headers=auth(tokens)).status_code == 200


def test_policies_listing_includes_starter(service):
    _, client, tokens = service
    body = client.get(f"{API_PREFIX}/policies", headers=auth(tokens)).json()
    assert len(body) == 1
    starter = body[0]
    assert starter["layer"] == "constitution"
    assert starter["description"]
    assert starter["source"].startswith("# description:")
    assert starter["trial_mode"] is False


def test_policy_view_permission_enforced(service):
    engine, client, tokens = service
    base = engine.state.community.roles[engine.state.community.base_role]
    base.permissions.discard(("policy_add", "view"))
    response = client.get(f"{API_PREFIX}/policies/pol-0001", headers=auth(tokens))
    assert response.status_code == 403
    assert response.json()["code"] == "FORBIDDEN"


def test_propose_policy_with_syntax_error_is_422_with_position(service):
    _, client, tokens = service
    response = client.post(
        f"{API_PREFIX}/actions",
        headers=auth(tokens),
        json={"action_type": "policy_add", "payload": {"source": "def filter(", "layer": "platform"}},
    )
    assert response.status_code == 422
    body = response.json()
    assert body["code"] == "SCHEMA_VIOLATION"
    assert "1:12" in body["field_errors"][0]["message"]


def test_propose_vote_decide_flow(service):
    engine, client, tokens = service
    response = client.post(
        f"{API_PREFIX}/actions",
        headers=auth(tokens),
        json={"action_type": "document_edit", "payload": {"document": "doc-0001", "body": "welcome"}},
    )
    assert response.status_code == 202
    action = response.json()["action"]
    assert action["status"] == "PROPOSED"
    aid = action["id"]

    for uid in ("usr-0001", "usr-0002"):
        response = client.post(f"{API_PREFIX}/actions/{aid}/votes", headers=auth(tokens, uid), json={"value": True})
        assert response.status_code == 200
    tally = client.post(f"{API_PREFIX}/actions/{aid}/votes", headers=auth(tokens, "usr-0003"), json={"value": True}).json()
    assert tally["status"] == "PASSED"
    assert tally["yes"] == 3

    stale = client.post(f"{API_PREFIX}/actions/{aid}/votes", headers=auth(tokens, "usr-0004"), json={"value": True})
    assert stale.status_code == 409
    assert stale.json()["code"] == "STALE_VOTE"

    doc = client.get(f"{API_PREFIX}/documents/doc-0001", headers=auth(tokens)).json()
    assert doc["body"] == "welcome"
    assert doc["version"] == 2


def test_propose_requires_propose_permission(service):
    engine, client, tokens = service
    base = engine.state.community.roles[engine.state.community.base_role]
    base.permissions.discard(("document_edit", "propose"))
    response = client.post(
        f"{API_PREFIX}/actions",
        headers=auth(tokens),
        json={"action_type": "document_edit", "payload": {"document": "doc-0001", "body": "x"}},
    )
    assert response.status_code == 403


def test_election_bundle_proposal(service):
    engine, client, tokens = service
    engine.enact_policy_genesis({"source": policy_source("election.pol"), "layer": "constitution", "precedence": 5})
    response = client.post(
        f"{API_PREFIX}/actions",
        headers=auth(tokens),
        json={
            "action_type": "election_bundle",
            "payload": {"office": "Steward"},
            "members": [
                {"action_type": "role_add_member", "payload": {"role": "members", "user": "usr-0002", "label": "A"}},
                {"action_type": "role_add_member", "payload": {"role": "members", "user": "usr-0003", "label": "B"}},
            ],
        },
    )
    assert response.status_code == 202
    action = response.json()["action"]
    assert action["bundle_kind"] == "election"
    assert len(action["member_ids"]) == 2

    vote = client.post(
        f"{API_PREFIX}/actions/{action['id']}/votes", headers=auth(tokens, "usr-0002"), json={"value": 2}
    )
    assert vote.status_code == 200
    assert vote.json()["options"]["2"] == 1
    out_of_range = client.post(
        f"{API_PREFIX}/actions/{action['id']}/votes", headers=auth(tokens, "usr-0003"), json={"value": 9}
    )
    assert out_of_range.status_code == 400


def test_idempotency_key_dedupes_retries(service):
    _, client, tokens = service
    headers = dict(auth(tokens))
    headers["Idempotency-Key"] = "retry-1"
    body = {"action_type": "post_message", "payload": {"channel": "general", "text": "hi"}}
    first = client.post(f"{API_PREFIX}/actions", headers=headers, json=body).json()["action"]["id"]
    second = client.post(f"{API_PREFIX}/actions", headers=headers, json=body).json()["action"]["id"]
    assert first == second


def test_audit_endpoint_filters(service):
    engine, client, tokens = service
    aid = engine.submit_action("usr-0001", "post_message", {"channel": "general", "text": "hi"})
    page = client.get(f"{API_PREFIX}/audit", params={"kind": "Decision"}, headers=auth(tokens)).json()
    assert all(e["kind"] == "Decision" for e in page["events"])
    page = client.get(f"{API_PREFIX}/audit", params={"action": aid}, headers=auth(tokens)).json()
    assert {e["kind"] for e in page["events"]} >= {"ActionProposed", "Decision"}
    bad = client.get(f"{API_PREFIX}/audit", params={"cursor": "zzz"}, headers=auth(tokens))
    assert bad.status_code == 400


def test_lint_endpoint(service):
    _, client, tokens = service
    good = client.post(f"{API_PREFIX}/policies/lint", headers=auth(tokens),
                       json={"source": policy_source("jury.pol")}).json()
    assert good["ok"] and not good["trial_mode"]
    trial = client.post(f"{API_PREFIX}/policies/lint", headers=auth(tokens),
                        json={"source": policy_source("jury_trial.pol")}).json()
    assert trial["ok"] and trial["trial_mode"]
    bad = client.post(f"{API_PREFIX}/policies/lint", headers=auth(tokens),
                      json={"source": "def filter("}).json()
    assert not bad["ok"]
    assert bad["diagnostics"][0]["line"] == 1 and bad["diagnostics"][0]["col"] == 12


def test_action_types_catalog_carries_schemas_and_permissions(service):
    _, client, tokens = service
    catalog = client.get(f"{API_PREFIX}/action-types", headers=auth(tokens)).json()
    names = {t["name"] for t in catalog}
    assert {"policy_add", "post_message", "election_bundle"} <= names
    policy_add = next(t for t in catalog if t["name"] == "policy_add")
    assert policy_add["payload_schema"]["required"] == ["source", "layer"]
    assert policy_add["can_propose"] is True


def test_long_poll_wait_returns_after_decision(service):
    engine, client, tokens = service
    aid = engine.submit_action("usr-0001", "document_edit", {"document": "doc-0001", "body": "x"})
    import threading

    def vote():
        for uid in ("usr-0001", "usr-0002", "usr-0003"):
            engine.cast_vote(uid, aid, True)

    timer = threading.Timer(0.05, vote)
    timer.start()
    response = client.get(f"{API_PREFIX}/actions/{aid}/wait", params={"timeout": 5}, headers=auth(tokens))
    timer.join()
    assert response.json()["status"] == "PASSED"


def test_no_side_door_route_audit(service):
    _, client, _ = service
    app = client.app
    observed = set()
    for route in app.routes:
        methods = getattr(route, "methods", None) or set()
        for method in methods - {"GET", "HEAD", "OPTIONS"}:
            observed.add((method, route.path))
    assert observed == MUTATING_ROUTES


def test_bootstrap_over_http(tmp_path):
    app = create_app(None, data_dir=tmp_path, install_token="install-secret")
    client = TestClient(app)
    assert client.get(f"{API_PREFIX}/community", headers={"Authorization": "Bearer x"}).status_code == 404
    denied = client.post(f"{API_PREFIX}/communities", json={"name": "d", "members": [{"name": "a"}], "seed": 1})
    assert denied.status_code == 401
    response = client.post(
        f"{API_PREFIX}/communities",
        headers={"Authorization": "Bearer install-secret"},
        json={"name": "demo", "members": [{"name": "alice"}, {"name": "bob"}], "seed": 5},
    )
    assert response.status_code == 201
    body = response.json()
    assert (tmp_path / "events.jsonl").exists()
    member_auth = {"Authorization": f"Bearer {body['admin_token']}"}
    assert client.get(f"{API_PREFIX}/policies", headers=member_auth).status_code == 200
    again = client.post(
        f"{API_PREFIX}/communities",
        headers={"Authorization": "Bearer install-secret"},
        json={"name": "demo2", "members": [{"name": "x"}], "seed": 6},
    )
    assert again.status_code == 409


def test_webhook_ingress_signature():
    adapter = WebhookAdapter(
        {"secret": "hook-secret", "notify_url": "",
         "bindings": {"post_message": {"execute_url": "http://b.local/e", "required": ["channel", "text"]}}},
    )
    engine = Engine.bootstrap(
        name="demo", members=[("alice", "@alice")], seed=1,
        log=EventLog(), adapter=adapter, clock=Clock(),
    )
    client = TestClient(create_app(engine))
    envelope = {"event_id": "ev-9", "type": "post_message", "actor_handle": "@alice",
                "payload": {"channel": "general", "text": "hi"}}
    raw = json.dumps(envelope).encode()

    bad = client.post(f"{API_PREFIX}/adapters/webhook/events", content=raw,
                      headers={"X-Signature": "nope", "Content-Type": "application/json"})
    assert bad.status_code == 401

    good = client.post(
        f"{API_PREFIX}/adapters/webhook/events", content=raw,
        headers={"X-Signature": sign_body("hook-secret", raw), "Content-Type": "application/json"},
    )
    assert good.status_code == 202
    assert good.json()["accepted"] is True

    wrong_platform = client.post(f"{API_PREFIX}/adapters/slack/events", content=raw,
                                 headers={"X-Signature": sign_body("hook-secret", raw)})
    assert wrong_platform.status_code == 404


def test_static_ui_mount(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>dashboard</body></html>")
    engine = make_engine()
    client = TestClient(create_app(engine, static_dir=ui))
    page = client.get("/")
    assert page.status_code == 200
    assert "dashboard" in page.text
    # API routes still take precedence over the static mount
    assert client.get(f"{API_PREFIX}/policies").status_code == 401


def test_concurrent_reads_and_writes_do_not_tear(service):
    from concurrent.futures import ThreadPoolExecutor

    engine, client, tokens = service

    def propose(i):
        response = client.post(
            f"{API_PREFIX}/actions",
            headers=auth(tokens),
            json={"action_type": "post_message", "payload": {"channel": "general", "text": f"m{i}"}},
        )
        assert response.status_code == 202

    def read(_):
        response = client.get(f"{API_PREFIX}/actions", headers=auth(tokens))
        assert response.status_code == 200
        for action in response.json():
            decided = action["decided_at"] is not None
            assert (action["status"] != "PROPOSED") == decided  # never torn

    with ThreadPoolExecutor(max_workers=8) as pool:
        jobs = [pool.submit(propose, i) for i in range(40)]
        jobs += [pool.submit(read, i) for i in range(40)]
        for job in jobs:
            job.result()
    assert len(engine.state.actions) == 40
