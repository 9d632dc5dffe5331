"""Append-only event log with hash chaining, snapshots, and audit queries.

The log is the system of record: JSON Lines, one event per line, each record
carrying the hash of its predecessor so tampering is detectable. Snapshots
are full-state JSON files keyed by log offset.
"""

from __future__ import annotations

import io
import json
import os
from pathlib import Path

from .canonical import canonical_json, sha256_hex
from .errors import InvalidInputError, StorageFailedError

SCHEMA_VERSION = 1
GENESIS_HASH = sha256_hex("govkit-genesis")

EVENT_KINDS = (
    "ActionProposed",
    "GoverningPolicyPinned",
    "VoteCast",
    "PolicyFunctionError",
    "Decision",
    "EffectApplied",
    "ActionExecuted",
    "ActionReverted",
    "PolicyEnacted",
    "PolicyRetired",
    "TrialDisposition",
    "ConfigChanged",
    "IngressRejected",
)


def chain_hash(prev_hash: str, body: dict) -> str:
    return sha256_hex(prev_hash + canonical_json(body))


class EventLog:
    """Single-writer append-only log. Appends are flushed before the engine
    acknowledges the triggering command; a storage failure halts intake."""

    def __init__(self, path: str | Path | None = None, *, stream: io.TextIOBase | None = None):
        self.path = Path(path) if path is not None else None
        self.events: list[dict] = []
        self.head_hash = GENESIS_HASH
        self.halted = False
        self._stream = stream
        if self.path is not None and self.path.exists():
            self._load()

    @property
    def next_offset(self) -> int:
        return len(self.events)

    def _load(self) -> None:
        report = load_events(self.path)
        if report["corrupt_at"] is not None:
            raise StorageFailedError(
                f"event log corrupt at offset {report['corrupt_at']}: {report['error']}"
            )
        self.events = report["events"]
        self.head_hash = self.events[-1]["h"] if self.events else GENESIS_HASH

    def _open_stream(self):
        if self._stream is not None:
            return self._stream
        if self.path is None:
            return None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._stream = open(self.path, "a", encoding="utf-8")
        return self._stream

    def append(self, kind: str, ts: str, payload: dict, deciding_policy: str | None = None) -> dict:
        if self.halted:
            raise StorageFailedError("event log is halted after a storage failure")
        if kind not in EVENT_KINDS:
            raise InvalidInputError(f"unknown event kind: {kind}")
        body = {
            "v": SCHEMA_VERSION,
            "offset": self.next_offset,
            "ts": ts,
            "kind": kind,
            "payload": payload,
            "deciding_policy": deciding_policy,
        }
        event = dict(body)
        event["h"] = chain_hash(self.head_hash, body)
        line = canonical_json(event)
        try:
            stream = self._open_stream()
            if stream is not None:
                stream.write(line + "\n")
                stream.flush()
        except Exception as err:
            self.halted = True
            raise StorageFailedError(f"event append failed: {err}") from err
        self.events.append(event)
        self.head_hash = event["h"]
        return event

    def verify_chain(self) -> int | None:
        """Offset of the first bad record, or None if the chain is intact."""
        prev = GENESIS_HASH
        for event in self.events:
            body = {k: v for k, v in event.items() if k != "h"}
            if event.get("h") != chain_hash(prev, body) or body.get("offset") != event["offset"]:
                return event.get("offset")
            prev = event["h"]
        return None

    def close(self) -> None:
        if self._stream is not None:
            try:
                self._stream.flush()
                os.fsync(self._stream.fileno())
            except (OSError, ValueError, AttributeError):
                pass
            try:
                self._stream.close()
            except Exception:
                pass
            self._stream = None


def load_events(path: str | Path) -> dict:
    """Read a log file, stopping at the first corrupt record.

    Returns {"events": [...], "corrupt_at": offset | None, "error": str | None}.
    """
    events: list[dict] = []
    prev = GENESIS_HASH
    corrupt_at = None
    error = None
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
                body = {k: v for k, v in event.items() if k != "h"}
                if event["offset"] != index:
                    raise ValueError(f"offset {event['offset']} != {index}")
                if event["h"] != chain_hash(prev, body):
                    raise ValueError("hash chain mismatch")
            except Exception as err:
                corrupt_at = index
                error = str(err)
                break
            events.append(event)
            prev = event["h"]
    return {"events": events, "corrupt_at": corrupt_at, "error": error}


def query_audit(
    events: list[dict],
    *,
    action_id: str | None = None,
    policy_id: str | None = None,
    kind: str | None = None,
    since: str | None = None,
    until: str | None = None,
    cursor: str | None = None,
    limit: int = 100,
) -> dict:
    """Chronological page of audit events with an opaque offset cursor."""
    start = 0
    if cursor is not None:
        try:
            start = int(cursor)
            if start < 0:
                raise ValueError
        except (TypeError, ValueError):
            raise InvalidInputError(f"malformed cursor: {cursor!r}") from None
    if limit <= 0 or limit > 1000:
        raise InvalidInputError("limit must be in 1..1000")

    def matches(event: dict) -> bool:
        if kind is not None and event["kind"] != kind:
            return False
        if since is not None and event["ts"] < since:
            return False
        if until is not None and event["ts"] > until:
            return False
        if action_id is not None:
            subjects = _subject_actions(event)
            if action_id not in subjects:
                return False
        if policy_id is not None:
            if event.get("deciding_policy") != policy_id and event["payload"].get("policy") != policy_id:
                return False
        return True

    page: list[dict] = []
    next_cursor = None
    for event in events[start:]:
        if matches(event):
            if len(page) == limit:
                next_cursor = str(event["offset"])
                break
            page.append(event)
    return {"events": page, "next_cursor": next_cursor}


def _subject_actions(event: dict) -> set[str]:
    payload = event.get("payload", {})
    subjects = set()
    for key in ("action", "bundle", "member"):
        value = payload.get(key)
        if isinstance(value, str):
            subjects.add(value)
    action = payload.get("action")
    if isinstance(action, dict) and isinstance(action.get("id"), str):
        subjects.add(action["id"])
    return subjects


def write_snapshot(directory: str | Path, offset: int, state_dict: dict) -> Path:
    body = {"v": SCHEMA_VERSION, "as_of": offset, "state": state_dict}
    body["content_hash"] = sha256_hex(canonical_json({"as_of": offset, "state": state_dict}))
    path = Path(directory) / f"snap-{offset:09d}.json"
    path.write_text(canonical_json(body), encoding="utf-8")
    return path


def read_snapshot(path: str | Path) -> dict:
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    expected = sha256_hex(canonical_json({"as_of": body["as_of"], "state": body["state"]}))
    if body.get("content_hash") != expected:
        raise StorageFailedError(f"snapshot content hash mismatch: {path}")
    return body
