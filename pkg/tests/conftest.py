from __future__ import annotations

from pathlib import Path

import pytest

from govkit.adapters import SandboxAdapter
from govkit.clock import Clock
from govkit.engine import Engine
from govkit.store import EventLog

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
POLICY_DIR = SCENARIO_DIR / "policies"

FIVE_MEMBERS = [
    ("alice", "@alice"),
    ("bob", "@bob"),
    ("carol", "@carol"),
    ("dave", "@dave"),
    ("eve", "@eve"),
]


def make_engine(members=FIVE_MEMBERS, seed=42, roles=None, config=None, fetcher=None, log=None):
    return Engine.bootstrap(
        name="demo",
        members=members,
        seed=seed,
        log=log or EventLog(),
        adapter=SandboxAdapter(),
        clock=Clock(),
        roles=roles,
        config=config,
        fetcher=fetcher,
    )


@pytest.fixture
def engine():
    return make_engine()


def policy_source(name: str) -> str:
    return (POLICY_DIR / name).read_text(encoding="utf-8")
