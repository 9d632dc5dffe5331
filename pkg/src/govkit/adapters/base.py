"""Adapter contract.

An adapter names the platform action types it can carry out, validates and
applies their execute/revert transforms, and (for remote platforms) performs
the external delivery. Every registered action type must be revertable.

Local adapters (the sandbox) keep platform state inside the engine state and
their transforms run during event application, so replay reproduces them.
Remote adapters do their I/O at derive time and only record outcomes.
"""

from __future__ import annotations

from ..errors import ExecutionFailedError


class PlatformAdapter:
    name = "abstract"
    is_local = True

    def action_types(self) -> dict[str, dict]:
        """Map of action type name -> {"required": [field, ...]}."""
        raise NotImplementedError

    def initial_platform_state(self, handles: list[str]) -> dict:
        return {}

    # -- local transforms (apply-time; must not fail after validate)

    def validate_execute(self, platform: dict, action_type: str, payload: dict) -> None:
        raise NotImplementedError

    def apply_execute(self, platform: dict, action_type: str, payload: dict, actor: str) -> dict:
        raise NotImplementedError

    def apply_revert(self, platform: dict, action_type: str, payload: dict, undo: dict, actor: str) -> None:
        raise NotImplementedError

    # -- remote delivery (derive-time; outcomes are recorded in events)

    def external_execute(self, action_type: str, payload: dict, action_id: str) -> None:
        pass

    def external_revert(self, action_type: str, payload: dict, action_id: str) -> None:
        pass

    def external_notify(self, notification: dict) -> None:
        pass

    def validate_payload(self, action_type: str, payload: dict) -> list[dict]:
        spec = self.action_types().get(action_type)
        if spec is None:
            raise ExecutionFailedError(f"no adapter binding for {action_type!r}")
        errors = []
        for field in spec.get("required", []):
            if field not in payload:
                errors.append({"field": field, "message": "required field missing"})
        return errors


_REGISTRY: dict[str, type] = {}


def register_adapter(cls) -> type:
    _REGISTRY[cls.name] = cls
    return cls


def get_adapter(name: str) -> type:
    if name not in _REGISTRY:
        raise ExecutionFailedError(f"unknown adapter: {name}")
    return _REGISTRY[name]
