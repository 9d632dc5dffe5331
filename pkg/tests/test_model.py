from __future__ import annotations

import math

import pytest

from govkit import model
from govkit.canonical import canonical_json
from govkit.errors import (
    DataLimitError,
    InvalidInputError,
    UnknownActionTypeError,
)
from govkit.model import EXECUTE, PROPOSE, VIEW

from conftest import FIVE_MEMBERS, make_engine

ACTION_TYPES = ["post_message", "rename_channel", "policy_add"]


def _community(members=FIVE_MEMBERS, seed=42):
    return model.new_community("demo", list(members), seed, adapter="sandbox", action_types=ACTION_TYPES)


def test_bootstrap_base_role_holds_all_members():
    community = _community()
    base = community.roles[community.base_role]
    assert base.members == community.member_ids()
    for user_id in community.member_ids():
        for action_type in ACTION_TYPES:
            assert model.check_permission(community, user_id, VIEW, action_type)
            assert model.check_permission(community, user_id, PROPOSE, action_type)
            assert not model.check_permission(community, user_id, EXECUTE, action_type)


def test_bootstrap_creates_one_empty_document():
    community = _community()
    assert len(community.documents) == 1
    doc = next(iter(community.documents.values()))
    assert doc.body == ""
    assert doc.version == 1


def test_bootstrap_rejects_empty_member_list():
    with pytest.raises(InvalidInputError):
        _community(members=[])


def test_bootstrap_is_deterministic():
    a = _community().to_dict()
    b = _community().to_dict()
    assert canonical_json(a) == canonical_json(b)


def test_engine_bootstrap_state_is_byte_identical():
    one = make_engine(seed=99).state.canonical()
    two = make_engine(seed=99).state.canonical()
    assert one == two


def test_check_permission_unknown_type():
    community = _community()
    with pytest.raises(UnknownActionTypeError):
        model.check_permission(community, "usr-0001", VIEW, "no_such_type")


def test_role_grants_execute():
    community = _community()
    role = model.Role(id="role-0002", name="ops", permissions={("rename_channel", EXECUTE)}, members=["usr-0002"])
    community.roles[role.id] = role
    assert model.check_permission(community, "usr-0002", EXECUTE, "rename_channel")
    assert not model.check_permission(community, "usr-0001", EXECUTE, "rename_channel")


def test_permission_grant_is_monotone():
    community = _community()
    before = [
        (uid, kind, t)
        for uid in community.member_ids()
        for kind in model.PERMISSION_KINDS
        for t in ACTION_TYPES
        if model.check_permission(community, uid, kind, t)
    ]
    role = model.Role(id="role-0002", name="ops", permissions={("post_message", EXECUTE)}, members=["usr-0001"])
    community.roles[role.id] = role
    for uid, kind, t in before:
        assert model.check_permission(community, uid, kind, t)


def test_eligible_voters_defaults_to_all_members():
    community = _community()
    assert model.eligible_voters(community) == community.member_ids()


def test_eligible_voters_restricted_to_role():
    community = _community()
    role = model.Role(id="role-0002", name="Bureaucrat", members=["usr-0002", "usr-0004"])
    community.roles[role.id] = role
    assert model.eligible_voters(community, "Bureaucrat") == ["usr-0002", "usr-0004"]
    with pytest.raises(InvalidInputError):
        model.eligible_voters(community, "NoSuchRole")


def test_quorum_of_25_percent_over_8_members_needs_2():
    # ceil(0.25 * 8) = 2, computed by hand
    assert math.ceil(0.25 * 8) == 2
    assert not model.quorum_met(1, 8, 25)
    assert model.quorum_met(2, 8, 25)
    # ceil(0.25 * 12) = 3 for the election fixtures
    assert not model.quorum_met(2, 12, 25)
    assert model.quorum_met(3, 12, 25)


def test_serialization_round_trip():
    engine = make_engine()
    engine.submit_action("usr-0001", "document_edit", {"document": "doc-0001", "body": "x"})
    engine.cast_vote("usr-0002", "act-000001", True)
    state = engine.state
    from govkit.state import EngineState

    reloaded = EngineState.from_dict(state.to_dict())
    assert reloaded.canonical() == state.canonical()


def test_datastore_rejects_oversized_values():
    store = model.DataStore()
    store.set("small", "x")
    with pytest.raises(DataLimitError):
        store.set("big", "y" * (model.DATA_STORE_CAP_BYTES + 1))
    assert store.get("big") is None


def test_datastore_rejects_non_json():
    store = model.DataStore()
    with pytest.raises(InvalidInputError):
        store.set("bad", object())


def test_vote_recast_replaces():
    engine = make_engine()
    aid = engine.submit_action("usr-0001", "document_edit", {"document": "doc-0001", "body": "x"})
    engine.cast_vote("usr-0002", aid, True)
    tally = engine.cast_vote("usr-0002", aid, True)  # same vote twice: unchanged
    assert (tally["yes"], tally["no"]) == (1, 0)
    tally = engine.cast_vote("usr-0002", aid, False)  # re-cast flips by one
    assert (tally["yes"], tally["no"]) == (0, 1)
