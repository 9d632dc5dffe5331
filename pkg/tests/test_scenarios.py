from __future__ import annotations

import pytest

from govkit.adapters.scenario import ScenarioError, load_scenario, run_scenario

from conftest import SCENARIO_DIR

ALL_SCENARIOS = sorted(p.name for p in SCENARIO_DIR.glob("*.yaml"))


@pytest.mark.parametrize("name", ALL_SCENARIOS)
def test_scenario_passes_and_replays(name):
    report = run_scenario(SCENARIO_DIR / name)
    failed = [s for s in report["steps"] if not s["ok"]]
    assert report["ok"], f"{name} failed steps: {failed}"
    assert report["replay_matches"], f"{name}: replay diverged from the live state"


@pytest.mark.parametrize("name", ["jury_rename.yaml", "caucus.yaml", "reputation.yaml"])
def test_scenario_reports_are_byte_identical(name):
    first = run_scenario(SCENARIO_DIR / name)
    second = run_scenario(SCENARIO_DIR / name)
    assert first["report_hash"] == second["report_hash"]
    assert first == second


def test_missing_policy_file_is_a_load_error(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(
        "name: bad\nseed: 1\nmembers: [a]\n"
        "policies:\n  - {file: nowhere.pol, layer: platform}\n"
        "timeline: []\n"
    )
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_missing_required_keys_rejected(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: bad\nseed: 1\n")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_failed_expectation_reports_step_index(tmp_path):
    scenario = tmp_path / "fail.yaml"
    scenario.write_text(
        "name: fail\nseed: 1\nmembers: [a, b]\n"
        "timeline:\n"
        "  - platform_event: {user: a, type: post_message, payload: {channel: general, text: hi}}\n"
        "    as: post\n"
        "  - expect: {action: post, status: FAILED}\n"
    )
    report = run_scenario(scenario)
    assert not report["ok"]
    failing = [s for s in report["steps"] if not s["ok"]]
    assert failing[0]["i"] == 1
    assert failing[0]["observed"] == "PASSED"
