"""Headless scenario driver.

A scenario file seeds a community, enacts policies, and replays a timeline of
platform events, votes, and clock advances against the simulated clock, with
hard assertions along the way. Reports are canonical JSON: the same file and
seed always produce byte-identical output.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from ..canonical import canonical_json, parse_duration, sha256_hex
from ..clock import Clock
from ..engine import Engine, replay
from ..errors import GovkitError, InvalidInputError
from ..fetch import scenario_fetcher
from ..store import EventLog
from .sandbox import SandboxAdapter


class ScenarioError(InvalidInputError):
    pass


def load_scenario(path: str | Path) -> dict:
    path = Path(path)
    try:
        script = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except yaml.YAMLError as err:
        raise ScenarioError(f"scenario file is not valid YAML: {err}") from None
    if not isinstance(script, dict):
        raise ScenarioError("scenario must be a mapping")
    for key in ("name", "seed", "members", "timeline"):
        if key not in script:
            raise ScenarioError(f"scenario is missing {key!r}")
    script["_base_dir"] = path.parent
    _resolve_policy_files(script)
    return script


def _read_policy_file(base: Path, rel: str) -> str:
    target = (base / rel).resolve()
    if not target.exists():
        raise ScenarioError(f"policy file not found: {rel}")
    return target.read_text(encoding="utf-8")


def _resolve_policy_files(script: dict) -> None:
    base = script["_base_dir"]
    for spec in script.get("policies", []):
        if "bundle" in spec:
            for stage in spec["bundle"]:
                if "file" in stage:
                    stage["source"] = _read_policy_file(base, stage.pop("file"))
        elif "file" in spec:
            spec["source"] = _read_policy_file(base, spec.pop("file"))
    for step in script.get("timeline", []):
        propose = step.get("propose")
        if propose and "source_file" in propose.get("payload", {}):
            propose["payload"]["source"] = _read_policy_file(base, propose["payload"].pop("source_file"))


class ScenarioRunner:
    def __init__(self, script: dict, *, log_path: str | Path | None = None):
        self.script = script
        self.refs: dict[str, str] = {}
        members = script["members"]
        self.member_specs = [
            (m, f"@{m}") if isinstance(m, str) else (m["name"], m.get("handle", f"@{m['name']}"))
            for m in members
        ]
        log = EventLog(log_path)
        self.engine = Engine.bootstrap(
            name=script["name"],
            members=self.member_specs,
            seed=int(script["seed"]),
            log=log,
            adapter=SandboxAdapter(),
            clock=Clock(),
            fetcher=scenario_fetcher(),
            roles=script.get("roles"),
            config=script.get("config"),
        )
        for spec in script.get("policies", []):
            payload = {"layer": spec["layer"], "precedence": spec.get("precedence", 0)}
            if "bundle" in spec:
                payload["stages"] = [
                    {"source": s["source"], **({"data": s["data"]} if s.get("data") else {})}
                    for s in spec["bundle"]
                ]
                if spec.get("description"):
                    payload["description"] = spec["description"]
            else:
                payload["source"] = spec["source"]
                if spec.get("data"):
                    payload["data"] = spec["data"]
            self.engine.enact_policy_genesis(payload)

    # -- reference resolution

    def _user_id(self, ref: str) -> str:
        community = self.engine.state.community
        for user in community.members.values():
            if ref in (user.id, user.display_name, user.platform_handle):
                return user.id
        raise ScenarioError(f"unknown member reference: {ref!r}")

    def _handle(self, ref: str) -> str:
        community = self.engine.state.community
        for user in community.members.values():
            if ref in (user.id, user.display_name, user.platform_handle):
                return user.platform_handle
        return ref

    def _action_id(self, ref: str) -> str:
        if ref in self.refs:
            return self.refs[ref]
        if ref in self.engine.state.actions:
            return ref
        raise ScenarioError(f"unknown action reference: {ref!r}")

    def _rewrite_users(self, value):
        if isinstance(value, dict):
            return {
                k: (self._user_id(v) if k == "user" and isinstance(v, str) else self._rewrite_users(v))
                for k, v in value.items()
            }
        if isinstance(value, list):
            return [self._rewrite_users(v) for v in value]
        return value

    def _member_specs(self, members: list[dict]) -> list[dict]:
        out = []
        for member in members:
            spec = {
                "action_type": member["type"],
                "payload": self._rewrite_users(member.get("payload", {})),
            }
            if member.get("members"):
                spec["members"] = self._member_specs(member["members"])
            out.append(spec)
        return out

    # -- steps

    def run(self) -> dict:
        steps = []
        failures = 0
        for index, step in enumerate(self.script["timeline"]):
            record = {"i": index, "ok": True}
            try:
                record.update(self._run_step(step))
            except GovkitError as err:
                record["kind"] = record.get("kind", "step")
                record["ok"] = False
                record["error"] = err.to_dict()
            if not record["ok"]:
                failures += 1
            steps.append(record)
        state = self.engine.state
        report = {
            "name": self.script["name"],
            "seed": self.script["seed"],
            "ok": failures == 0,
            "assertions": {
                "passed": sum(1 for s in steps if s.get("kind") == "expect" and s["ok"]),
                "failed": sum(1 for s in steps if s.get("kind") == "expect" and not s["ok"]),
            },
            "failed_steps": failures,
            "steps": steps,
            "final_platform": state.platform,
            "final_state_hash": state.content_hash(),
            "audit": [
                {"offset": e["offset"], "ts": e["ts"], "kind": e["kind"],
                 "deciding_policy": e["deciding_policy"], "payload": e["payload"]}
                for e in self.engine.log.events
            ],
        }
        report["replay_matches"] = (
            replay(self.engine.log.events, self.engine.adapter).canonical() == state.canonical()
        )
        report["report_hash"] = sha256_hex(canonical_json({k: v for k, v in report.items() if k != "report_hash"}))
        return report

    def _run_step(self, step: dict) -> dict:
        if "platform_event" in step:
            spec = step["platform_event"]
            aid = self.engine.ingest_platform_event(
                {
                    "event_id": spec.get("event_id"),
                    "actor_handle": self._handle(spec["user"]),
                    "type": spec["type"],
                    "payload": spec.get("payload", {}),
                }
            )
            if aid is None:
                return {"kind": "platform_event", "ok": False, "error": {"code": "REJECTED"}}
            if step.get("as"):
                self.refs[step["as"]] = aid
            return {"kind": "platform_event", "action": aid,
                    "status": self.engine.get_action(aid).proposal.status}
        if "propose" in step:
            spec = step["propose"]
            members = self._member_specs(spec["members"]) if spec.get("members") else None
            aid = self.engine.submit_action(
                self._user_id(spec["user"]),
                spec["type"],
                self._rewrite_users(spec.get("payload", {})),
                members=members,
                datetime_trigger=spec.get("datetime_trigger"),
            )
            if step.get("as"):
                self.refs[step["as"]] = aid
            return {"kind": "propose", "action": aid,
                    "status": self.engine.get_action(aid).proposal.status}
        if "vote" in step:
            spec = step["vote"]
            value = _vote_value(spec["value"])
            tally = self.engine.cast_vote(self._user_id(spec["user"]), self._action_id(spec["action"]), value)
            return {"kind": "vote", "tally": tally}
        if "signal" in step:
            spec = step["signal"]
            message = spec["message"]
            if message == "last":
                messages = self.engine.state.platform.get("governance_messages", [])
                if not messages:
                    raise ScenarioError("no governance messages to signal on")
                message = messages[-1]["id"]
            tally = self.engine.ingest_vote_signal(message, self._handle(spec["user"]), str(spec["value"]))
            return {"kind": "signal", "tally": tally}
        if "advance" in step:
            decisions = self.engine.advance(parse_duration(str(step["advance"])))
            return {"kind": "advance", "by": str(step["advance"]),
                    "decisions": [d["payload"]["action"] for d in decisions]}
        if "tick" in step:
            decisions = self.engine.tick()
            return {"kind": "tick", "decisions": [d["payload"]["action"] for d in decisions]}
        if "expect" in step:
            return self._run_expect(step["expect"])
        raise ScenarioError(f"unknown step: {sorted(step.keys())}")

    def _run_expect(self, spec: dict) -> dict:
        if "action" in spec and "status" in spec:
            aid = self._action_id(spec["action"])
            observed = self.engine.get_action(aid).proposal.status
            return {"kind": "expect", "expect": {"action": aid, "status": spec["status"]},
                    "observed": observed, "ok": observed == spec["status"]}
        if "platform" in spec:
            observed = self._platform_path(spec["platform"])
            expected = spec.get("equals")
            return {"kind": "expect", "expect": {"platform": spec["platform"], "equals": expected},
                    "observed": observed, "ok": observed == expected}
        if "audit_kind" in spec:
            events = self.engine.log.events
            action = self._action_id(spec["action"]) if spec.get("action") else None
            count = 0
            for event in events:
                if event["kind"] != spec["audit_kind"]:
                    continue
                if action is not None and event["payload"].get("action") != action:
                    continue
                if spec.get("code") and event["payload"].get("code") != spec["code"]:
                    continue
                count += 1
            if "count" in spec:
                ok = count == spec["count"]
            else:
                ok = count >= spec.get("min", 1)
            return {"kind": "expect", "expect": dict(spec), "observed": count, "ok": ok}
        if "role" in spec and "members" in spec:
            role = self.engine.state.community.role_by_name(spec["role"])
            observed = list(role.members) if role else None
            expected = [self._user_id(u) for u in spec["members"]]
            return {"kind": "expect", "expect": {"role": spec["role"], "members": expected},
                    "observed": observed, "ok": observed == expected}
        if "policy_data" in spec:
            target = spec["policy_data"]
            policy = None
            for candidate in self.engine.state.policies:
                if target["policy"] in (candidate.id, candidate.description, candidate.data.get("name")):
                    policy = candidate
                    break
            observed = policy.data.get(target["key"]) if policy else None
            if "path" in target and isinstance(observed, dict):
                for part in target["path"].split("."):
                    observed = observed.get(part) if isinstance(observed, dict) else None
            expected = spec.get("equals")
            return {"kind": "expect", "expect": dict(spec), "observed": observed, "ok": observed == expected}
        raise ScenarioError(f"unknown expectation: {sorted(spec.keys())}")

    def _platform_path(self, path: str):
        node = self.engine.state.platform
        for part in path.split("."):
            if isinstance(node, dict) and part in node:
                node = node[part]
            elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
                node = node[int(part)]
            else:
                return None
        return node


def _vote_value(raw) -> bool | int:
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, int):
        return raw
    norm = str(raw).strip().lower()
    if norm in ("yes", "y", "true", "+1"):
        return True
    if norm in ("no", "n", "false", "-1"):
        return False
    try:
        return int(norm)
    except ValueError:
        raise ScenarioError(f"cannot interpret vote value {raw!r}") from None


def run_scenario(path: str | Path, *, log_path: str | Path | None = None) -> dict:
    """Load and execute a scenario file; deterministic for a given file."""
    runner = ScenarioRunner(load_scenario(path), log_path=log_path)
    report = runner.run()
    runner.engine.close()
    return report
