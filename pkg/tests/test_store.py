from __future__ import annotations

import io
import json

import pytest

from govkit.errors import InvalidInputError, StorageFailedError
from govkit.store import EventLog, load_events, query_audit, read_snapshot, write_snapshot

TS = "2020-01-01T00:00:00.000000Z"


def test_offsets_are_dense_and_increasing():
    log = EventLog()
    a = log.append("VoteCast", TS, {"action": "act-000001", "voter": "u", "kind": "boolean", "value": True})
    b = log.append("Decision", TS, {"action": "act-000001", "disposition": "PASSED"})
    assert (a["offset"], b["offset"]) == (0, 1)


def test_unknown_kind_rejected():
    log = EventLog()
    with pytest.raises(InvalidInputError):
        log.append("NotAKind", TS, {})


def test_hash_chain_verifies_and_detects_tampering(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    for i in range(5):
        log.append("EffectApplied", TS, {"effect": "log", "text": f"line {i}"})
    log.close()
    assert EventLog(path).verify_chain() is None

    lines = path.read_text().splitlines()
    record = json.loads(lines[2])
    record["payload"]["text"] = "tampered"
    lines[2] = json.dumps(record)
    path.write_text("\n".join(lines) + "\n")
    report = load_events(path)
    assert report["corrupt_at"] == 2
    assert len(report["events"]) == 2


def test_truncated_last_record_stops_at_prior_offset(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    for i in range(3):
        log.append("EffectApplied", TS, {"effect": "log", "text": str(i)})
    log.close()
    raw = path.read_text()
    path.write_text(raw[: len(raw) - 20])  # cut into the final record
    report = load_events(path)
    assert report["corrupt_at"] == 2
    assert [e["offset"] for e in report["events"]] == [0, 1]


def test_write_failure_halts_the_log():
    class FailingStream(io.StringIO):
        def __init__(self):
            super().__init__()
            self.writes = 0

        def write(self, s):
            self.writes += 1
            if self.writes > 1:
                raise OSError("disk full")
            return super().write(s)

    log = EventLog(stream=FailingStream())
    log.append("EffectApplied", TS, {"effect": "log", "text": "ok"})
    with pytest.raises(StorageFailedError):
        log.append("EffectApplied", TS, {"effect": "log", "text": "boom"})
    assert log.halted
    with pytest.raises(StorageFailedError):
        log.append("EffectApplied", TS, {"effect": "log", "text": "after"})
    assert len(log.events) == 1


def _sample_events():
    log = EventLog()
    log.append("ActionProposed", "2020-01-01T00:00:00.000000Z", {"action": {"id": "act-000001"}})
    log.append("VoteCast", "2020-01-02T00:00:00.000000Z", {"action": "act-000001", "voter": "u"})
    log.append("Decision", "2020-01-03T00:00:00.000000Z", {"action": "act-000001", "disposition": "PASSED"}, "pol-0001")
    log.append("TrialDisposition", "2020-01-04T00:00:00.000000Z", {"action": "act-000002", "would": "PASSED"}, "pol-0002")
    return log.events


def test_query_filters_by_action():
    events = _sample_events()
    page = query_audit(events, action_id="act-000001")
    assert [e["kind"] for e in page["events"]] == ["ActionProposed", "VoteCast", "Decision"]


def test_query_filters_by_kind_and_policy():
    events = _sample_events()
    assert [e["kind"] for e in query_audit(events, kind="TrialDisposition")["events"]] == ["TrialDisposition"]
    assert len(query_audit(events, policy_id="pol-0001")["events"]) == 1


def test_query_since_after_latest_is_empty():
    events = _sample_events()
    assert query_audit(events, since="2021-01-01T00:00:00.000000Z")["events"] == []


def test_query_cursor_pagination():
    events = _sample_events()
    first = query_audit(events, limit=2)
    assert len(first["events"]) == 2
    assert first["next_cursor"] is not None
    rest = query_audit(events, cursor=first["next_cursor"], limit=10)
    assert [e["offset"] for e in rest["events"]] == [2, 3]
    assert rest["next_cursor"] is None


def test_query_malformed_cursor():
    with pytest.raises(InvalidInputError):
        query_audit(_sample_events(), cursor="not-a-cursor")


def test_snapshot_round_trip(tmp_path):
    state = {"a": 1, "nested": {"b": [1, 2, 3]}}
    path = write_snapshot(tmp_path, 42, state)
    assert path.name == "snap-000000042.json"
    body = read_snapshot(path)
    assert body["as_of"] == 42
    assert body["state"] == state


def test_snapshot_detects_corruption(tmp_path):
    path = write_snapshot(tmp_path, 1, {"a": 1})
    body = json.loads(path.read_text())
    body["state"]["a"] = 2
    path.write_text(json.dumps(body))
    with pytest.raises(StorageFailedError):
        read_snapshot(path)


def test_snapshot_plus_tail_equals_full_replay(tmp_path):
    from datetime import timedelta

    from govkit.adapters import SandboxAdapter
    from govkit.engine import replay, replay_from_snapshot

    from conftest import make_engine

    engine = make_engine()
    engine.submit_action("usr-0001", "document_edit", {"document": "doc-0001", "body": "v1"})
    engine.cast_vote("usr-0001", "act-000001", True)
    path = engine.snapshot(tmp_path)
    body = read_snapshot(path)

    engine.cast_vote("usr-0002", "act-000001", True)
    engine.cast_vote("usr-0003", "act-000001", True)
    engine.advance(timedelta(days=1))

    resumed = replay_from_snapshot(body, engine.log.events, SandboxAdapter())
    full = replay(engine.log.events, SandboxAdapter())
    assert resumed.canonical() == full.canonical() == engine.state.canonical()
