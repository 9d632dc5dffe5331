from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from govkit.cli import main
from govkit.store import load_events

from conftest import POLICY_DIR, SCENARIO_DIR


@pytest.fixture
def runner():
    return CliRunner()


def write_members(path: Path) -> Path:
    members = path / "members.yaml"
    members.write_text("[alice, bob, carol, dave, eve]\n")
    return members


def test_init_creates_genesis_log(runner, tmp_path):
    members = write_members(tmp_path)
    data = tmp_path / "data"
    result = runner.invoke(main, ["init", "--data", str(data), "--name", "demo",
                                  "--members", str(members), "--seed", "42"])
    assert result.exit_code == 0, result.output
    assert "admin token" in result.output
    report = load_events(data / "events.jsonl")
    assert report["corrupt_at"] is None
    kinds = [e["kind"] for e in report["events"]]
    assert kinds == ["ConfigChanged", "PolicyEnacted"]


def test_init_refuses_non_empty_directory(runner, tmp_path):
    members = write_members(tmp_path)
    data = tmp_path / "data"
    data.mkdir()
    (data / "keep.txt").write_text("x")
    result = runner.invoke(main, ["init", "--data", str(data), "--name", "demo",
                                  "--members", str(members), "--seed", "42"])
    assert result.exit_code != 0
    assert "refusing" in result.output


def test_init_same_seed_gives_identical_genesis_hashes(runner, tmp_path):
    members = write_members(tmp_path)
    hashes = []
    for sub in ("one", "two"):
        result = runner.invoke(main, ["init", "--data", str(tmp_path / sub), "--name", "demo",
                                      "--members", str(members), "--seed", "42"])
        assert result.exit_code == 0, result.output
        line = next(l for l in result.output.splitlines() if l.startswith("genesis hash:"))
        hashes.append(line.split(":", 1)[1].strip())
    assert hashes[0] == hashes[1]


def test_policy_lint_clean_fixture(runner):
    result = runner.invoke(main, ["policy", "lint", str(POLICY_DIR / "jury.pol")])
    assert result.exit_code == 0, result.output
    assert "ok" in result.output


def test_policy_lint_missing_function(runner, tmp_path):
    bad = tmp_path / "bad.pol"
    bad.write_text("def filter(action, policy) { return true }\n")
    result = runner.invoke(main, ["policy", "lint", str(bad)])
    assert result.exit_code == 1
    assert "MISSING_FUNCTION" in result.output


def test_policy_lint_unknown_host_function(runner, tmp_path):
    bad = tmp_path / "bad.pol"
    bad.write_text(
        "def filter(action, policy) { return frobnicate() }\n"
        "def initialize(action, policy) { }\n"
        "def check(action, policy) { }\n"
        "def notify(action, policy) { }\n"
        "def pass(action, policy) { }\n"
        "def fail(action, policy) { }\n"
    )
    result = runner.invoke(main, ["policy", "lint", str(bad)])
    assert result.exit_code == 1
    assert "UNKNOWN_IDENTIFIER" in result.output


def test_scenario_run_green_exit_zero(runner):
    result = runner.invoke(main, ["scenario", "run", str(SCENARIO_DIR / "jury_rename.yaml")])
    assert result.exit_code == 0, result.output
    assert "replay matches: True" in result.output


def test_scenario_run_json_report(runner):
    result = runner.invoke(main, ["scenario", "run", str(SCENARIO_DIR / "rfa.yaml"), "--report", "json"])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["ok"] is True
    assert report["assertions"]["failed"] == 0
    assert report["replay_matches"] is True


def test_scenario_run_failing_expectation_exits_nonzero(runner, tmp_path):
    scenario = tmp_path / "fail.yaml"
    scenario.write_text(
        "name: fail\nseed: 1\nmembers: [a, b]\n"
        "timeline:\n"
        "  - platform_event: {user: a, type: post_message, payload: {channel: general, text: hi}}\n"
        "    as: post\n"
        "  - expect: {action: post, status: FAILED}\n"
    )
    result = runner.invoke(main, ["scenario", "run", str(scenario)])
    assert result.exit_code == 1
    assert "step 1" in result.output


def test_scenario_run_missing_file_is_load_error(runner, tmp_path):
    result = runner.invoke(main, ["scenario", "run", str(tmp_path / "nope.yaml")])
    assert result.exit_code == 2


def test_tick_with_advance(runner, tmp_path):
    members = write_members(tmp_path)
    data = tmp_path / "data"
    runner.invoke(main, ["init", "--data", str(data), "--name", "demo",
                         "--members", str(members), "--seed", "42"])
    result = runner.invoke(main, ["tick", "--data", str(data), "--advance", "1h"])
    assert result.exit_code == 0, result.output
    assert "0 decision(s)" in result.output


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _wait_for(predicate, timeout=20.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.1)
    return False


@pytest.fixture
def initialized_dir(tmp_path):
    members = write_members(tmp_path)
    data = tmp_path / "data"
    CliRunner().invoke(main, ["init", "--data", str(data), "--name", "demo",
                              "--members", str(members), "--seed", "42"])
    return data


def test_serve_sigterm_clean_shutdown_and_replayable_log(initialized_dir):
    import httpx

    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "govkit.cli", "serve", "--data", str(initialized_dir),
         "--port", str(port), "--tick-period", "3600"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
    )
    try:
        def up():
            try:
                httpx.get(f"http://127.0.0.1:{port}/api/v1/community", timeout=0.5)
                return True
            except httpx.HTTPError:
                return False

        assert _wait_for(up), "server did not come up"
        response = httpx.get(f"http://127.0.0.1:{port}/api/v1/policies", timeout=2)
        assert response.status_code == 401  # reachable; token required
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=20) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
    report = load_events(initialized_dir / "events.jsonl")
    assert report["corrupt_at"] is None
    from govkit.adapters import SandboxAdapter
    from govkit.engine import replay

    state = replay(report["events"], SandboxAdapter())
    assert state.community is not None


def test_serve_fails_when_port_in_use(initialized_dir):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        proc = subprocess.run(
            [sys.executable, "-m", "govkit.cli", "serve", "--data", str(initialized_dir),
             "--port", str(port)],
            capture_output=True, timeout=30,
        )
        assert proc.returncode != 0
    finally:
        blocker.close()


def test_serve_fails_on_uninitialized_dir(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "govkit.cli", "serve", "--data", str(tmp_path / "empty")],
        capture_output=True, timeout=30, text=True,
    )
    assert proc.returncode != 0
    assert "init" in proc.stderr + proc.stdout
