"""Canonical JSON, timestamps, durations, and hashing.

Everything the engine persists or compares goes through these helpers so that
two runs with the same inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import re
from datetime import datetime, timedelta, timezone


def canonical_json(value) -> str:
    """Serialize with sorted keys and no whitespace. Rejects non-JSON values."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def is_json_value(value) -> bool:
    try:
        canonical_json(value)
        return True
    except (TypeError, ValueError):
        return False


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def stable_hash64(text: str) -> int:
    """First 8 bytes of sha256 as an unsigned int; used to derive per-action RNG seeds."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def format_ts(ts: datetime) -> str:
    """RFC 3339 UTC with fixed microsecond precision, e.g. 2020-01-01T00:00:00.000000Z."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_ts(text: str) -> datetime:
    norm = text.strip()
    if norm.endswith("Z"):
        norm = norm[:-1] + "+00:00"
    ts = datetime.fromisoformat(norm)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


_DURATION_RE = re.compile(r"(\d+)([dhms])")
_DURATION_UNITS = {"d": 86400, "h": 3600, "m": 60, "s": 1}


def parse_duration(text: str) -> timedelta:
    """Parse compact durations like "2d", "5h", "30m", "45s", or "1d12h"."""
    norm = str(text).strip().lower()
    parts = _DURATION_RE.findall(norm)
    if not parts or "".join(f"{n}{u}" for n, u in parts) != norm:
        raise ValueError(f"invalid duration: {text!r}")
    seconds = sum(int(n) * _DURATION_UNITS[u] for n, u in parts)
    return timedelta(seconds=seconds)
