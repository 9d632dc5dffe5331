"""Operator CLI: bootstrap communities, run the server, lint policies, and
execute scenario files headlessly."""

from __future__ import annotations

import json
import signal
import sys
import threading
from pathlib import Path

import click
import yaml

from .adapters.base import get_adapter
from .adapters.scenario import run_scenario
from .canonical import canonical_json, parse_duration
from .clock import REAL, SIMULATED, Clock
from .engine import Engine
from .errors import GovkitError
from .fetch import HttpFetcher, scenario_fetcher
from .lint import lint_source
from .store import EventLog


def _data_dir(value: str | None) -> Path:
    import os

    path = value or os.environ.get("GOVKIT_DATA")
    if not path:
        raise click.UsageError("pass --data or set GOVKIT_DATA")
    return Path(path)


def _load_members(path: Path) -> list[tuple[str, str]]:
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    members = []
    for entry in raw:
        if isinstance(entry, str):
            members.append((entry, f"@{entry}"))
        else:
            members.append((entry["name"], entry.get("handle", f"@{entry['name']}")))
    return members


@click.group()
def main() -> None:
    """Self-hostable governance engine."""


@main.command()
@click.option("--data", "data", type=str, default=None, help="data directory (or GOVKIT_DATA)")
@click.option("--name", required=True, help="community name")
@click.option("--members", "members_file", required=True, type=click.Path(exists=True, path_type=Path),
              help="YAML/JSON list of members")
@click.option("--seed", required=True, type=int, help="community RNG seed")
@click.option("--adapter", "adapter_name", default="sandbox", show_default=True)
@click.option("--adapter-config", type=click.Path(exists=True, path_type=Path), default=None,
              help="JSON config for the webhook adapter")
def init(data, name, members_file, seed, adapter_name, adapter_config):
    """Bootstrap a new community into an empty data directory."""
    directory = _data_dir(data)
    if directory.exists() and any(directory.iterdir()):
        raise click.ClickException(f"refusing to initialize non-empty directory {directory}")
    directory.mkdir(parents=True, exist_ok=True)
    adapter_cls = get_adapter(adapter_name)
    if adapter_name == "webhook":
        config = json.loads(adapter_config.read_text()) if adapter_config else None
        adapter = adapter_cls(config)
    else:
        adapter = adapter_cls()
    log = EventLog(directory / "events.jsonl")
    try:
        engine = Engine.bootstrap(
            name=name, members=_load_members(members_file), seed=seed,
            log=log, adapter=adapter, clock=Clock(SIMULATED),
        )
    except GovkitError as err:
        raise click.ClickException(f"{err.code}: {err.message}") from None
    if adapter_name == "webhook" and adapter_config:
        (directory / "adapter.json").write_text(adapter_config.read_text(), encoding="utf-8")
    engine.close()
    admin = next(tok for tok, entry in engine.state.tokens.items() if "admin-install" in entry["scopes"])
    click.echo(f"community {engine.state.community.id} initialized in {directory}")
    click.echo(f"genesis hash: {log.head_hash}")
    click.echo(f"admin token (shown once): {admin}")


def _load_engine(directory: Path, mode: str) -> Engine:
    log_path = directory / "events.jsonl"
    if not log_path.exists():
        raise click.ClickException(f"no events.jsonl in {directory}; run `govkit init` first")
    log = EventLog(log_path)
    adapter = None
    adapter_config = directory / "adapter.json"
    if adapter_config.exists():
        adapter = get_adapter("webhook")(json.loads(adapter_config.read_text()))
    fetcher = HttpFetcher() if mode == REAL else scenario_fetcher()
    return Engine.load(log, clock=Clock(mode), fetcher=fetcher, adapter=adapter)


@main.command()
@click.option("--data", "data", type=str, default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--tick-period", default=None, type=int, help="seconds between scheduler ticks")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, path_type=Path), default=None,
              help="serve this directory as the dashboard at /")
def serve(data, host, port, tick_period, ui_dir):
    """Run the API service with a real-clock scheduler."""
    import uvicorn

    from .api import create_app

    directory = _data_dir(data)
    engine = _load_engine(directory, REAL)
    period = tick_period or engine.state.config.get("tick_period", 60)
    app = create_app(engine, data_dir=directory, static_dir=ui_dir)

    stop = threading.Event()

    def ticker():
        while not stop.wait(period):
            try:
                engine.tick()
            except GovkitError as err:
                click.echo(f"tick failed: {err.code}: {err.message}", err=True)
                return

    thread = threading.Thread(target=ticker, name="govkit-ticker", daemon=True)
    thread.start()
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)

    def handle_term(signum, frame):
        server.should_exit = True

    signal.signal(signal.SIGTERM, handle_term)
    try:
        server.run()
    finally:
        stop.set()
        engine.close()


@main.command()
@click.option("--data", "data", type=str, default=None)
@click.option("--advance", "advance", default=None, help="advance the simulated clock (e.g. 2d, 5h)")
def tick(data, advance):
    """Run one scheduler pass against the stored state and exit."""
    directory = _data_dir(data)
    engine = _load_engine(directory, SIMULATED if advance else REAL)
    try:
        decisions = engine.advance(parse_duration(advance)) if advance else engine.tick()
    except GovkitError as err:
        raise click.ClickException(f"{err.code}: {err.message}") from None
    engine.close()
    for event in decisions:
        click.echo(f"decided {event['payload']['action']}: {event['payload']['disposition']}")
    click.echo(f"{len(decisions)} decision(s)")


@main.group()
def policy() -> None:
    """Policy tooling."""


@policy.command("lint")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
def policy_lint(file: Path):
    """Parse and check a policy file; exit 0 iff clean."""
    result = lint_source(file.read_text(encoding="utf-8"))
    for diag in result["diagnostics"]:
        place = f"{file}:{diag['line']}:{diag['col']}: " if diag.get("line") else f"{file}: "
        click.echo(f"{place}{diag['severity']}: {diag['code']}: {diag['message']}")
    if result["ok"]:
        click.echo(f"{file}: ok" + (" (trial mode)" if result["trial_mode"] else ""))
    sys.exit(0 if result["ok"] else 1)


@main.group()
def scenario() -> None:
    """Scenario tooling."""


@scenario.command("run")
@click.argument("file", type=click.Path(path_type=Path))
@click.option("--report", "report_format", type=click.Choice(["text", "json"]), default="text", show_default=True)
def scenario_run(file: Path, report_format: str):
    """Execute a scenario file under the simulated clock."""
    try:
        report = run_scenario(file)
    except GovkitError as err:
        if report_format == "json":
            click.echo(canonical_json({"ok": False, "load_error": err.to_dict()}))
        else:
            click.echo(f"load error: {err.code}: {err.message}", err=True)
        sys.exit(2)
    if report_format == "json":
        click.echo(canonical_json(report))
    else:
        click.echo(f"scenario {report['name']} (seed {report['seed']})")
        for step in report["steps"]:
            if step.get("kind") == "expect":
                mark = "ok " if step["ok"] else "FAIL"
                click.echo(f"  [{mark}] step {step['i']}: expect {step['expect']} -> {step['observed']}")
            elif not step["ok"]:
                click.echo(f"  [FAIL] step {step['i']}: {step.get('kind')} {step.get('error')}")
        click.echo(f"assertions: {report['assertions']['passed']} passed, {report['assertions']['failed']} failed")
        click.echo(f"replay matches: {report['replay_matches']}")
        click.echo(f"state hash: {report['final_state_hash']}")
    sys.exit(0 if report["ok"] and report["replay_matches"] else 1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8100, show_default=True, type=int)
def scorer(host, port):
    """Serve the bundled mock text scorer."""
    import uvicorn

    from .scorer import app

    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
