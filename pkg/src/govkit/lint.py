"""Policy lint: parse, identifier, and capability diagnostics.

Shared by the CLI subcommand and the API lint endpoint so the editor and
operator tooling agree.
"""

from __future__ import annotations

from .dsl import parser as dsl_parser
from .dsl.surface import HTTP_FETCH
from .errors import MissingFunctionError, PolicySyntaxError, UnknownIdentifierError


def lint_source(source: str) -> dict:
    diagnostics: list[dict] = []
    description = dsl_parser.extract_description(source)
    trial_mode = False
    try:
        program = dsl_parser.parse_policy_source(source)
    except PolicySyntaxError as err:
        diagnostics.append(
            {"severity": "error", "code": err.code, "message": err.detail, "line": err.line, "col": err.col}
        )
    except MissingFunctionError as err:
        diagnostics.append({"severity": "error", "code": err.code, "message": err.message})
    except UnknownIdentifierError as err:
        diagnostics.append(
            {"severity": "error", "code": err.code, "message": err.message, "line": err.line, "col": err.col}
        )
    else:
        trial_mode = program.is_trial
        if not description:
            diagnostics.append(
                {"severity": "info", "code": "NO_DESCRIPTION",
                 "message": "add a `# description: ...` header so members can read what this policy does"}
            )
        if trial_mode:
            diagnostics.append(
                {"severity": "info", "code": "TRIAL_MODE",
                 "message": "pass() and fail() are empty: this policy runs in trial mode and applies no effects"}
            )
        if "http_fetch" in source:
            diagnostics.append(
                {"severity": "info", "code": "CAPABILITY_" + HTTP_FETCH,
                 "message": "http_fetch requires external calls to be enabled and the URL on the community allow-list"}
            )
    ok = not any(d["severity"] == "error" for d in diagnostics)
    return {"ok": ok, "diagnostics": diagnostics, "description": description, "trial_mode": trial_mode}
