"""Deterministic in-memory platform double.

Channels, messages, and membership live in a plain JSON dict inside engine
state; execute/revert are pure transforms with targeted undo records so
revert(execute(state)) restores the serialized state exactly, including
message-id counters.
"""

from __future__ import annotations

from ..errors import ExecutionFailedError
from .base import PlatformAdapter, register_adapter


def _channel(platform: dict, name: str) -> dict:
    channel = platform["channels"].get(name)
    if channel is None:
        raise ExecutionFailedError(f"no such channel: {name}")
    return channel


@register_adapter
class SandboxAdapter(PlatformAdapter):
    name = "sandbox"
    is_local = True

    def action_types(self) -> dict[str, dict]:
        return {
            "post_message": {"required": ["channel", "text"]},
            "rename_channel": {"required": ["old", "new"]},
            "set_channel_topic": {"required": ["channel", "topic"]},
            "create_channel": {"required": ["name"]},
            "join_channel": {"required": ["channel", "user"]},
        }

    def initial_platform_state(self, handles: list[str]) -> dict:
        return {
            "channels": {
                "general": {"topic": "", "members": list(handles), "messages": []},
            },
            "handles": list(handles),
            "governance_messages": [],
            "listeners": {},
            "counters": {"message": 0, "notice": 0},
        }

    def validate_execute(self, platform: dict, action_type: str, payload: dict) -> None:
        if action_type == "post_message":
            _channel(platform, payload["channel"])
            if not isinstance(payload["text"], str):
                raise ExecutionFailedError("message text must be a string")
        elif action_type == "rename_channel":
            _channel(platform, payload["old"])
            if not payload["new"] or payload["new"] in platform["channels"]:
                raise ExecutionFailedError(f"cannot rename to {payload['new']!r}")
        elif action_type == "set_channel_topic":
            _channel(platform, payload["channel"])
            if not isinstance(payload["topic"], str):
                raise ExecutionFailedError("topic must be a string")
        elif action_type == "create_channel":
            if not payload["name"] or payload["name"] in platform["channels"]:
                raise ExecutionFailedError(f"channel exists: {payload['name']!r}")
        elif action_type == "join_channel":
            channel = _channel(platform, payload["channel"])
            if payload["user"] not in platform["handles"]:
                raise ExecutionFailedError(f"unknown handle: {payload['user']!r}")
            del channel
        else:
            raise ExecutionFailedError(f"no adapter binding for {action_type!r}")

    def apply_execute(self, platform: dict, action_type: str, payload: dict, actor: str) -> dict:
        if action_type == "post_message":
            counter_before = platform["counters"]["message"]
            platform["counters"]["message"] = counter_before + 1
            message_id = f"m-{counter_before + 1:06d}"
            _channel(platform, payload["channel"])["messages"].append(
                {"id": message_id, "author": actor, "text": payload["text"]}
            )
            return {"message_id": message_id, "counter_before": counter_before}
        if action_type == "rename_channel":
            channels = platform["channels"]
            channels[payload["new"]] = channels.pop(payload["old"])
            return {}
        if action_type == "set_channel_topic":
            channel = _channel(platform, payload["channel"])
            undo = {"topic": channel["topic"]}
            channel["topic"] = payload["topic"]
            return undo
        if action_type == "create_channel":
            platform["channels"][payload["name"]] = {"topic": "", "members": [actor], "messages": []}
            return {}
        if action_type == "join_channel":
            channel = _channel(platform, payload["channel"])
            was_member = payload["user"] in channel["members"]
            if not was_member:
                channel["members"].append(payload["user"])
            return {"was_member": was_member}
        raise ExecutionFailedError(f"no adapter binding for {action_type!r}")

    def apply_revert(self, platform: dict, action_type: str, payload: dict, undo: dict, actor: str) -> None:
        if action_type == "post_message":
            channel = _channel(platform, payload["channel"])
            channel["messages"] = [m for m in channel["messages"] if m["id"] != undo["message_id"]]
            platform["counters"]["message"] = undo["counter_before"]
        elif action_type == "rename_channel":
            channels = platform["channels"]
            channels[payload["old"]] = channels.pop(payload["new"])
        elif action_type == "set_channel_topic":
            _channel(platform, payload["channel"])["topic"] = undo["topic"]
        elif action_type == "create_channel":
            platform["channels"].pop(payload["name"], None)
        elif action_type == "join_channel":
            if not undo["was_member"]:
                channel = _channel(platform, payload["channel"])
                channel["members"] = [m for m in channel["members"] if m != payload["user"]]
        else:
            raise ExecutionFailedError(f"no adapter binding for {action_type!r}")
