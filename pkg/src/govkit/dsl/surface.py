"""The closed name and capability surface available to policy code.

Name resolution never escapes this set plus a policy's own helpers and
locals; anything else is rejected at compile time.
"""

from __future__ import annotations

# Capabilities a sandbox environment may grant.
NOTIFY = "NOTIFY"
EXECUTE_ACTION = "EXECUTE_ACTION"
REVERT_ACTION = "REVERT_ACTION"
HTTP_FETCH = "HTTP_FETCH"
RANDOM = "RANDOM"
CLOCK = "CLOCK"
DATA_RW = "DATA_RW"
PROPOSE_ACTION = "PROPOSE_ACTION"

ALL_CAPABILITIES = frozenset(
    {NOTIFY, EXECUTE_ACTION, REVERT_ACTION, HTTP_FETCH, RANDOM, CLOCK, DATA_RW, PROPOSE_ACTION}
)

# Filters run during policy selection against many candidate actions, so they
# are evaluated read-only.
FILTER_CAPABILITIES = frozenset({RANDOM, CLOCK})

# Status constants bound inside every environment.
CONSTANTS = ("PASSED", "FAILED", "PROPOSED")

# Community-scoped object bindings.
BINDINGS = ("action", "policy", "proposal", "bundle", "users", "roles", "documents", "policies")

# Host functions callable as bare names.
HOST_FUNCTIONS = (
    "notify_users",
    "random_sample",
    "now",
    "days",
    "hours",
    "minutes",
    "http_fetch",
    "propose_action",
    "log",
)

# Pure language builtins (no capability required).
BUILTINS = ("len", "str", "append", "contains", "keys", "get")

SURFACE_NAMES = frozenset(CONSTANTS) | frozenset(BINDINGS) | frozenset(HOST_FUNCTIONS) | frozenset(BUILTINS)

LIFECYCLE_FUNCTIONS = ("filter", "initialize", "check", "notify", "pass", "fail")
