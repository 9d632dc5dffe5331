"""Real and simulated clock sources.

Simulated time starts from a fixed epoch and only moves when explicitly
advanced, which keeps bootstrap output and scenario runs reproducible. Both
modes are monotone non-decreasing: loading an existing event log floors the
clock at the last recorded timestamp.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

REAL = "real"
SIMULATED = "simulated"

SIM_EPOCH = datetime(2020, 1, 1, tzinfo=timezone.utc)


class Clock:
    def __init__(self, mode: str = SIMULATED, start: datetime | None = None):
        if mode not in (REAL, SIMULATED):
            raise ValueError(f"unknown clock mode: {mode}")
        self.mode = mode
        self._floor = start or SIM_EPOCH

    def now(self) -> datetime:
        if self.mode == REAL:
            current = datetime.now(timezone.utc)
            if current > self._floor:
                self._floor = current
        return self._floor

    def advance(self, delta: timedelta) -> datetime:
        if self.mode != SIMULATED:
            raise ValueError("advance() is only valid for the simulated clock")
        if delta < timedelta(0):
            raise ValueError("clock only moves forward")
        self._floor += delta
        return self._floor

    def ensure_at_least(self, ts: datetime) -> None:
        if ts > self._floor:
            self._floor = ts
