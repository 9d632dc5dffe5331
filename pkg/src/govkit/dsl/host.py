"""Host bindings exposed to policy code.

Views wrap engine records read-only; every mutation a policy requests is
emitted as an effect for the engine to apply serially after evaluation.
Capability checks happen here, at the host boundary.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field

from ..canonical import canonical_json, is_json_value
from ..errors import CapabilityDeniedError, PolicyRuntimeError
from ..model import (
    DATA_STORE_CAP_BYTES,
    ActionRecord,
    Community,
    DataStore,
    PolicyRecord,
    Role,
    User,
)
from . import surface
from .interpreter import (
    BuiltinFn,
    Duration,
    HostObject,
    Timestamp,
    type_name,
    values_equal,
)

VOTE_KINDS = ("boolean", "choice", "none")


def _as_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise PolicyRuntimeError(f"{what} must be an integer, got {type_name(value)}")
    return value


def _as_number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise PolicyRuntimeError(f"{what} must be a number, got {type_name(value)}")
    return value


def _arity(args: list, kwargs: dict, name: str, lo: int, hi: int, kw_allowed=()) -> None:
    if not lo <= len(args) <= hi:
        raise PolicyRuntimeError(f"{name}() takes {lo}..{hi} arguments, got {len(args)}")
    for key in kwargs:
        if key not in kw_allowed:
            raise PolicyRuntimeError(f"{name}() got unexpected keyword {key!r}")


class UserView(HostObject):
    kind = "user"

    def __init__(self, user: User):
        self._user = user

    def eq_key(self):
        return ("user", self._user.id)

    def dsl_attr(self, name: str):
        if name == "id":
            return self._user.id
        if name == "name":
            return self._user.display_name
        if name == "handle":
            return self._user.platform_handle
        return super().dsl_attr(name)


class RoleView(HostObject):
    kind = "role"

    def __init__(self, role: Role, env: "SandboxEnvironment"):
        self._role = role
        self._env = env

    def eq_key(self):
        return ("role", self._role.id)

    def dsl_attr(self, name: str):
        if name == "id":
            return self._role.id
        if name == "name":
            return self._role.name
        if name == "members":
            return [self._env.user_view(uid) for uid in self._role.members]
        return super().dsl_attr(name)


class DocumentView(HostObject):
    kind = "document"

    def __init__(self, doc):
        self._doc = doc

    def eq_key(self):
        return ("document", self._doc.id)

    def dsl_attr(self, name: str):
        if name in ("id", "title", "body", "version"):
            return getattr(self._doc, name)
        return super().dsl_attr(name)


class DataView(HostObject):
    """Reads see this evaluation's pending writes; writes become effects."""

    kind = "data"

    def __init__(self, store: DataStore, scope: tuple[str, str], env: "SandboxEnvironment", read_only=False):
        self._store = store
        self._scope = scope
        self._env = env
        self._read_only = read_only

    def eq_key(self):
        return ("data",) + self._scope

    def dsl_methods(self):
        return frozenset({"get", "set"})

    def dsl_call(self, name: str, args: list, kwargs: dict):
        if name == "get":
            _arity(args, kwargs, "data.get", 1, 2)
            key = args[0]
            if not isinstance(key, str):
                raise PolicyRuntimeError("data keys must be strings")
            default = args[1] if len(args) == 2 else None
            overlay = self._env.overlays.get(self._scope, {})
            if key in overlay:
                return copy.deepcopy(overlay[key])
            return copy.deepcopy(self._store.get(key, default))
        if name == "set":
            _arity(args, kwargs, "data.set", 2, 2)
            if self._read_only:
                raise PolicyRuntimeError("this data store is read-only")
            self._env.require(surface.DATA_RW, "data.set")
            key, value = args
            if not isinstance(key, str):
                raise PolicyRuntimeError("data keys must be strings")
            if not is_json_value(value):
                raise PolicyRuntimeError(f"data value for {key!r} is not JSON-serializable")
            combined = dict(self._store.entries)
            combined.update(self._env.overlays.get(self._scope, {}))
            combined[key] = value
            if len(canonical_json(combined).encode("utf-8")) > DATA_STORE_CAP_BYTES:
                raise PolicyRuntimeError(
                    f"data store cap of {DATA_STORE_CAP_BYTES} bytes exceeded; store large records externally"
                )
            self._env.overlays.setdefault(self._scope, {})[key] = copy.deepcopy(value)
            self._env.budget.host_call()
            self._env.effects.append(
                {"kind": "data_set", "scope": list(self._scope), "key": key, "value": value}
            )
            return None
        return super().dsl_call(name, args, kwargs)


class ProposalView(HostObject):
    kind = "proposal"

    def __init__(self, record: ActionRecord, env: "SandboxEnvironment"):
        self._record = record
        self._env = env

    def eq_key(self):
        return ("proposal", self._record.id)

    def dsl_attr(self, name: str):
        if name == "status":
            return self._record.proposal.status
        if name == "created_at":
            return Timestamp(self._record.proposal.created_at)
        return super().dsl_attr(name)

    def dsl_methods(self):
        return frozenset({"get_yes_votes", "get_no_votes", "get_choice_votes", "get_choice_voters", "elapsed"})

    def _restriction_ids(self, args: list, kwargs: dict) -> set[str] | None:
        restriction = kwargs.get("users", args[0] if args else None)
        if restriction is None:
            return None
        return set(self._env.user_ids_from(restriction, "users"))

    def dsl_call(self, name: str, args: list, kwargs: dict):
        votes = self._record.proposal.live_votes()
        if name in ("get_yes_votes", "get_no_votes"):
            _arity(args, kwargs, name, 0, 1, kw_allowed=("users",))
            want = name == "get_yes_votes"
            allowed = self._restriction_ids(args, kwargs)
            return sum(
                1
                for v in votes
                if v.kind == "boolean"
                and v.value is want
                and (allowed is None or v.voter in allowed)
            )
        if name == "get_choice_votes":
            _arity(args, kwargs, name, 1, 2, kw_allowed=("users",))
            option = _as_int(args[0], "option")
            allowed = self._restriction_ids(args[1:], kwargs)
            return sum(
                1
                for v in votes
                if v.kind == "choice" and v.value == option and (allowed is None or v.voter in allowed)
            )
        if name == "get_choice_voters":
            _arity(args, kwargs, name, 1, 1)
            option = _as_int(args[0], "option")
            return [
                self._env.user_view(v.voter)
                for v in votes
                if v.kind == "choice" and v.value == option
            ]
        if name == "elapsed":
            _arity(args, kwargs, name, 0, 0)
            # Deferred actions become active at their trigger; policy windows
            # run from activation, not from submission.
            start = self._record.proposal.created_at
            if self._record.datetime_trigger is not None and self._record.datetime_trigger > start:
                start = self._record.datetime_trigger
            return Duration((self._env.now - start).total_seconds())
        return super().dsl_call(name, args, kwargs)


class ActionView(HostObject):
    kind = "action"

    def __init__(self, record: ActionRecord, env: "SandboxEnvironment"):
        self._record = record
        self._env = env

    def eq_key(self):
        return ("action", self._record.id)

    @property
    def record(self) -> ActionRecord:
        return self._record

    def dsl_attr(self, name: str):
        rec = self._record
        if name == "id":
            return rec.id
        if name == "action_type":
            return rec.action_type
        if name == "layer":
            return rec.layer
        if name == "origin":
            return rec.origin
        if name == "initiator":
            return self._env.user_view(rec.initiator)
        if name == "payload":
            return copy.deepcopy(rec.payload)
        if name == "data":
            return DataView(rec.data, ("action", rec.id), self._env)
        if name == "proposal":
            return ProposalView(rec, self._env)
        if name == "kind":
            return rec.bundle_kind
        return super().dsl_attr(name)

    def dsl_methods(self):
        return frozenset({"execute", "revert", "members", "remove"})

    def dsl_call(self, name: str, args: list, kwargs: dict):
        rec = self._record
        if name == "execute":
            _arity(args, kwargs, "execute", 0, 0)
            self._env.require(surface.EXECUTE_ACTION, "action.execute")
            self._env.budget.host_call()
            self._env.effects.append({"kind": "execute", "action": rec.id})
            return None
        if name == "revert":
            _arity(args, kwargs, "revert", 0, 0)
            self._env.require(surface.REVERT_ACTION, "action.revert")
            self._env.budget.host_call()
            self._env.effects.append({"kind": "revert", "action": rec.id})
            return None
        if name == "members":
            _arity(args, kwargs, "members", 0, 0)
            if not rec.is_bundle:
                raise PolicyRuntimeError("members() is only available on bundle actions")
            removed = self._env.removed_members.get(rec.id, set())
            return [
                ActionView(self._env.lookup_action(mid), self._env)
                for mid in rec.member_ids
                if mid not in removed
            ]
        if name == "remove":
            _arity(args, kwargs, "remove", 1, 1)
            if not rec.is_bundle:
                raise PolicyRuntimeError("remove() is only available on bundle actions")
            member = args[0]
            if not isinstance(member, ActionView):
                raise PolicyRuntimeError("remove() expects a bundle member action")
            removed = self._env.removed_members.setdefault(rec.id, set())
            live = [m for m in rec.member_ids if m not in removed]
            if member.record.id not in live:
                raise PolicyRuntimeError("not a member of this bundle")
            if len(live) <= 1:
                raise PolicyRuntimeError("cannot remove the last bundle member")
            self._env.require(surface.EXECUTE_ACTION, "bundle.remove")
            removed.add(member.record.id)
            self._env.budget.host_call()
            self._env.effects.append(
                {"kind": "bundle_remove", "bundle": rec.id, "member": member.record.id}
            )
            return None
        return super().dsl_call(name, args, kwargs)


class PolicyView(HostObject):
    kind = "policy"

    def __init__(self, policy: PolicyRecord, stage_index: int, env: "SandboxEnvironment", read_only=False):
        self._policy = policy
        self._stage_index = stage_index
        self._env = env
        self._read_only = read_only

    def eq_key(self):
        return ("policy", self._policy.id, self._stage_index)

    def dsl_attr(self, name: str):
        if name == "id":
            return self._policy.id
        if name == "description":
            return self._policy.description
        if name == "precedence":
            return self._policy.precedence
        if name == "layer":
            return self._policy.layer
        if name == "data":
            stage = self._policy.stages[self._stage_index]
            return DataView(stage.data, ("policy", stage.id), self._env, read_only=self._read_only)
        return super().dsl_attr(name)


class UsersCollection(HostObject):
    kind = "users"

    def __init__(self, env: "SandboxEnvironment"):
        self._env = env

    def dsl_iter(self):
        return [self._env.user_view(uid) for uid in self._env.community.member_ids()]

    def dsl_len(self):
        return len(self._env.community.members)

    def dsl_methods(self):
        return frozenset({"filter"})

    def dsl_call(self, name: str, args: list, kwargs: dict):
        if name == "filter":
            _arity(args, kwargs, "users.filter", 0, 0, kw_allowed=("role", "min_data"))
            ids = self._env.community.member_ids()
            if "role" in kwargs:
                role_name = kwargs["role"]
                if not isinstance(role_name, str):
                    raise PolicyRuntimeError("role filter must be a role name")
                role = self._env.community.role_by_name(role_name)
                members = set(role.members) if role else set()
                ids = [i for i in ids if i in members]
            if "min_data" in kwargs:
                spec = kwargs["min_data"]
                if (
                    not isinstance(spec, list)
                    or len(spec) != 2
                    or not isinstance(spec[0], (dict, type(None)))
                ):
                    raise PolicyRuntimeError("min_data filter must be [map, threshold]")
                table = spec[0] or {}
                threshold = _as_number(spec[1], "min_data threshold")
                picked = []
                for i in ids:
                    score = table.get(i, 0)
                    if isinstance(score, (int, float)) and not isinstance(score, bool) and score >= threshold:
                        picked.append(i)
                ids = picked
            return [self._env.user_view(uid) for uid in ids]
        return super().dsl_call(name, args, kwargs)


class RolesCollection(HostObject):
    kind = "roles"

    def __init__(self, env: "SandboxEnvironment"):
        self._env = env

    def dsl_iter(self):
        return [RoleView(r, self._env) for r in self._env.community.roles.values()]

    def dsl_len(self):
        return len(self._env.community.roles)

    def dsl_methods(self):
        return frozenset({"get"})

    def dsl_call(self, name: str, args: list, kwargs: dict):
        if name == "get":
            _arity(args, kwargs, "roles.get", 1, 1)
            if not isinstance(args[0], str):
                raise PolicyRuntimeError("roles.get() expects a role name")
            role = self._env.community.role_by_name(args[0])
            return RoleView(role, self._env) if role else None
        return super().dsl_call(name, args, kwargs)


class DocumentsCollection(HostObject):
    kind = "documents"

    def __init__(self, env: "SandboxEnvironment"):
        self._env = env

    def dsl_iter(self):
        return [DocumentView(d) for _, d in sorted(self._env.community.documents.items())]

    def dsl_len(self):
        return len(self._env.community.documents)


class PoliciesCollection(HostObject):
    """Read-only lookup over enacted policies, by id or exact description."""

    kind = "policies"

    def __init__(self, env: "SandboxEnvironment"):
        self._env = env

    def dsl_len(self):
        return len(self._env.policies)

    def dsl_methods(self):
        return frozenset({"get"})

    def dsl_call(self, name: str, args: list, kwargs: dict):
        if name == "get":
            _arity(args, kwargs, "policies.get", 1, 1)
            key = args[0]
            if not isinstance(key, str):
                raise PolicyRuntimeError("policies.get() expects an id, name, or description")
            for policy in self._env.policies:
                if policy.id == key or policy.description == key or policy.data.get("name") == key:
                    return PolicyView(policy, 0, self._env, read_only=True)
            return None
        return super().dsl_call(name, args, kwargs)


@dataclass
class SandboxEnvironment:
    """Everything one evaluation may see and do."""

    community: Community
    action: ActionRecord
    policy: PolicyRecord
    stage_index: int
    policies: list[PolicyRecord]
    capabilities: frozenset
    budget: object  # ExecutionBudget
    now: object  # datetime snapshot
    rng_seed: int
    action_lookup: object  # callable id -> ActionRecord
    fetcher: object = None  # callable (url, query) -> parsed document
    http_allowlist: tuple = ()
    bindings: dict = field(default_factory=dict)
    effects: list = field(default_factory=list)
    overlays: dict = field(default_factory=dict)
    removed_members: dict = field(default_factory=dict)
    rng: random.Random = None

    def __post_init__(self):
        self.bindings = self._build_bindings()

    def begin_evaluation(self) -> None:
        self.effects = []
        self.overlays = {}
        self.removed_members = {}
        self.rng = random.Random(self.rng_seed)
        self.budget.start()

    # -- helpers used by views

    def require(self, capability: str, what: str) -> None:
        if capability not in self.capabilities:
            raise CapabilityDeniedError(f"{what} requires the {capability} capability")

    def user_view(self, user_id: str) -> UserView:
        user = self.community.members.get(user_id)
        if user is None:
            user = User(user_id, user_id, user_id)
        return UserView(user)

    def lookup_action(self, action_id: str) -> ActionRecord:
        rec = self.action_lookup(action_id)
        if rec is None:
            raise PolicyRuntimeError(f"unknown action {action_id!r}")
        return rec

    def user_ids_from(self, value, what: str) -> list[str]:
        if isinstance(value, UsersCollection):
            return self.community.member_ids()
        if isinstance(value, RoleView):
            return list(value._role.members)
        if isinstance(value, list):
            ids = []
            for item in value:
                if isinstance(item, UserView):
                    ids.append(item._user.id)
                elif isinstance(item, str):
                    ids.append(item)
                else:
                    raise PolicyRuntimeError(f"{what} must contain users, got {type_name(item)}")
            return ids
        raise PolicyRuntimeError(f"{what} must be a list of users")

    # -- bindings

    def _build_bindings(self) -> dict:
        env = self
        action_view = ActionView(self.action, self)

        def builtin_len(args, kwargs):
            _arity(args, kwargs, "len", 1, 1)
            v = args[0]
            if isinstance(v, (list, dict, str)):
                return len(v)
            if isinstance(v, HostObject) and hasattr(v, "dsl_len"):
                return v.dsl_len()
            raise PolicyRuntimeError(f"len() of {type_name(v)}")

        def builtin_str(args, kwargs):
            _arity(args, kwargs, "str", 1, 1)
            v = args[0]
            if v is None:
                return "none"
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, (int, float, str)):
                return str(v)
            if isinstance(v, Duration):
                return f"{v.seconds:g}s"
            if isinstance(v, Timestamp):
                from ..canonical import format_ts

                return format_ts(v.at)
            raise PolicyRuntimeError(f"str() of {type_name(v)}")

        def builtin_append(args, kwargs):
            _arity(args, kwargs, "append", 2, 2)
            if not isinstance(args[0], list):
                raise PolicyRuntimeError("append() expects a list")
            return args[0] + [args[1]]

        def builtin_contains(args, kwargs):
            _arity(args, kwargs, "contains", 2, 2)
            haystack, needle = args
            if isinstance(haystack, list):
                return any(values_equal(item, needle) for item in haystack)
            if isinstance(haystack, dict):
                return isinstance(needle, str) and needle in haystack
            if isinstance(haystack, str):
                return isinstance(needle, str) and needle in haystack
            raise PolicyRuntimeError(f"contains() over {type_name(haystack)}")

        def builtin_keys(args, kwargs):
            _arity(args, kwargs, "keys", 1, 1)
            if not isinstance(args[0], dict):
                raise PolicyRuntimeError("keys() expects a map")
            return list(args[0].keys())

        def builtin_get(args, kwargs):
            _arity(args, kwargs, "get", 2, 3)
            container, key = args[0], args[1]
            default = args[2] if len(args) == 3 else None
            if isinstance(container, dict):
                if not isinstance(key, str):
                    raise PolicyRuntimeError("map keys must be strings")
                return container.get(key, default)
            if container is None:
                return default
            raise PolicyRuntimeError(f"get() over {type_name(container)}")

        def host_days(args, kwargs):
            _arity(args, kwargs, "days", 1, 1)
            return Duration(_as_number(args[0], "days") * 86400)

        def host_hours(args, kwargs):
            _arity(args, kwargs, "hours", 1, 1)
            return Duration(_as_number(args[0], "hours") * 3600)

        def host_minutes(args, kwargs):
            _arity(args, kwargs, "minutes", 1, 1)
            return Duration(_as_number(args[0], "minutes") * 60)

        def host_now(args, kwargs):
            _arity(args, kwargs, "now", 0, 0)
            env.require(surface.CLOCK, "now")
            return Timestamp(env.now)

        def host_random_sample(args, kwargs):
            _arity(args, kwargs, "random_sample", 2, 2)
            env.require(surface.RANDOM, "random_sample")
            pool = args[0]
            if isinstance(pool, HostObject) and hasattr(pool, "dsl_iter"):
                pool = list(pool.dsl_iter())
            if not isinstance(pool, list):
                raise PolicyRuntimeError("random_sample() expects a list")
            k = _as_int(args[1], "sample size")
            if not 0 <= k <= len(pool):
                raise PolicyRuntimeError(f"sample size {k} out of range for {len(pool)} items")
            env.budget.host_call()
            return env.rng.sample(pool, k)

        def host_notify_users(args, kwargs):
            _arity(args, kwargs, "notify_users", 2, 4)
            env.require(surface.NOTIFY, "notify_users")
            recipients = env.user_ids_from(args[0], "recipients")
            template = args[1]
            if not isinstance(template, str):
                raise PolicyRuntimeError("notification template must be a string")
            vote_kind = args[2] if len(args) >= 3 else "none"
            if vote_kind not in VOTE_KINDS:
                raise PolicyRuntimeError(f"vote kind must be one of {VOTE_KINDS}")
            options = args[3] if len(args) == 4 else None
            if vote_kind == "choice":
                if not isinstance(options, list) or not options:
                    raise PolicyRuntimeError("choice notifications need a non-empty options list")
                options = [o if isinstance(o, str) else builtin_str([o], {}) for o in options]
            elif options is not None:
                raise PolicyRuntimeError("options are only valid for choice notifications")
            env.budget.host_call()
            env.effects.append(
                {
                    "kind": "notify",
                    "users": recipients,
                    "template": template,
                    "vote_kind": vote_kind,
                    "options": options,
                }
            )
            return None

        def host_http_fetch(args, kwargs):
            _arity(args, kwargs, "http_fetch", 1, 2)
            env.require(surface.HTTP_FETCH, "http_fetch")
            url = args[0]
            if not isinstance(url, str):
                raise PolicyRuntimeError("http_fetch() expects a URL string")
            if not any(url.startswith(prefix) for prefix in env.http_allowlist):
                raise CapabilityDeniedError(f"url {url!r} is not on the community http allow-list")
            query = args[1] if len(args) == 2 else {}
            if not isinstance(query, dict):
                raise PolicyRuntimeError("http_fetch() query must be a map")
            if env.fetcher is None:
                raise PolicyRuntimeError("no http fetcher configured")
            env.budget.host_call()
            try:
                return env.fetcher(url, query)
            except PolicyRuntimeError:
                raise
            except Exception as err:
                raise PolicyRuntimeError(f"http_fetch failed: {err}") from None

        def host_propose_action(args, kwargs):
            _arity(args, kwargs, "propose_action", 2, 2)
            env.require(surface.PROPOSE_ACTION, "propose_action")
            action_type, payload = args
            if not isinstance(action_type, str):
                raise PolicyRuntimeError("propose_action() expects an action type name")
            if not isinstance(payload, dict) or not is_json_value(payload):
                raise PolicyRuntimeError("propose_action() payload must be a JSON map")
            env.budget.host_call()
            env.effects.append(
                {"kind": "propose_action", "action_type": action_type, "payload": payload}
            )
            return None

        def host_log(args, kwargs):
            _arity(args, kwargs, "log", 1, 1)
            text = args[0] if isinstance(args[0], str) else builtin_str([args[0]], {})
            env.budget.host_call()
            env.effects.append({"kind": "log", "text": text})
            return None

        bindings = {
            "action": action_view,
            "policy": PolicyView(self.policy, self.stage_index, self),
            "proposal": ProposalView(self.action, self),
            "bundle": action_view if self.action.is_bundle else None,
            "users": UsersCollection(self),
            "roles": RolesCollection(self),
            "documents": DocumentsCollection(self),
            "policies": PoliciesCollection(self),
            "PASSED": "PASSED",
            "FAILED": "FAILED",
            "PROPOSED": "PROPOSED",
            "len": BuiltinFn("len", builtin_len),
            "str": BuiltinFn("str", builtin_str),
            "append": BuiltinFn("append", builtin_append),
            "contains": BuiltinFn("contains", builtin_contains),
            "keys": BuiltinFn("keys", builtin_keys),
            "get": BuiltinFn("get", builtin_get),
            "days": BuiltinFn("days", host_days),
            "hours": BuiltinFn("hours", host_hours),
            "minutes": BuiltinFn("minutes", host_minutes),
            "now": BuiltinFn("now", host_now),
            "random_sample": BuiltinFn("random_sample", host_random_sample),
            "notify_users": BuiltinFn("notify_users", host_notify_users),
            "http_fetch": BuiltinFn("http_fetch", host_http_fetch),
            "propose_action": BuiltinFn("propose_action", host_propose_action),
            "log": BuiltinFn("log", host_log),
        }
        return bindings


def coerce_filter_result(value) -> bool:
    """Filter results must be boolean; none counts as a non-match."""
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    from ..errors import PolicyTypeError

    raise PolicyTypeError(f"filter() must return a boolean, got {type_name(value)}")


def coerce_check_result(value) -> str:
    """Check results normalize: a missing return means still PROPOSED."""
    if value is None:
        return "PROPOSED"
    if value in ("PASSED", "FAILED", "PROPOSED"):
        return value
    from ..errors import PolicyTypeError

    raise PolicyTypeError(f"check() must return PASSED, FAILED, or PROPOSED; got {type_name(value)}")


def host_api_surface() -> dict:
    """Catalog of everything callable from policy code, with required capability."""
    return {
        "proposal.get_yes_votes(users?)": None,
        "proposal.get_no_votes(users?)": None,
        "proposal.get_choice_votes(option, users?)": None,
        "proposal.get_choice_voters(option)": None,
        "proposal.elapsed()": None,
        "days(n) / hours(n) / minutes(n)": None,
        "now()": surface.CLOCK,
        "notify_users(users, template, vote_kind, options?)": surface.NOTIFY,
        "random_sample(list, k)": surface.RANDOM,
        "action.execute()": surface.EXECUTE_ACTION,
        "action.revert()": surface.REVERT_ACTION,
        "action.data.get/set(key, value)": surface.DATA_RW,
        "policy.data.get/set(key, value)": surface.DATA_RW,
        "http_fetch(url, query_map)": surface.HTTP_FETCH,
        "propose_action(action_type, payload)": surface.PROPOSE_ACTION,
        "users.filter(role=?, min_data=?)": None,
        "roles.get(name)": None,
        "policies.get(id_or_description)": None,
        "bundle.members() / bundle.remove(member)": surface.EXECUTE_ACTION,
        "PASSED / FAILED / PROPOSED": None,
        "log(text)": None,
        "len / str / append / contains / keys / get": None,
    }
