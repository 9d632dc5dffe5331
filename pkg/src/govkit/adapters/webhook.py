"""Generic webhook adapter.

Bridges the engine to any platform that can exchange signed JSON envelopes:
inbound events arrive at the ingress endpoint with an HMAC-SHA256 signature,
outbound execute/revert/notify calls POST to per-action-type URL bindings
and are retried with exponential backoff before being audited as failures.
"""

from __future__ import annotations

import hashlib
import hmac
import time

import httpx

from ..errors import ExecutionFailedError
from .base import PlatformAdapter, register_adapter

RETRIES = 3


def sign_body(secret: str, body: bytes) -> str:
    return hmac.new(secret.encode("utf-8"), body, hashlib.sha256).hexdigest()


def verify_signature(secret: str, body: bytes, signature: str) -> bool:
    return hmac.compare_digest(sign_body(secret, body), (signature or "").strip())


@register_adapter
class WebhookAdapter(PlatformAdapter):
    """Config shape:

    {
      "secret": "...",
      "notify_url": "https://bridge/notify",
      "bindings": {
        "post_message": {
          "execute_url": "https://bridge/execute/post_message",
          "revert_url": "https://bridge/revert/post_message",
          "required": ["channel", "text"]
        }
      }
    }
    """

    name = "webhook"
    is_local = False

    def __init__(self, config: dict | None = None, *, transport: httpx.BaseTransport | None = None,
                 backoff_base: float = 0.2):
        self.config = config or {"secret": "", "notify_url": "", "bindings": {}}
        self.secret = self.config.get("secret", "")
        self._transport = transport
        self._backoff_base = backoff_base

    def action_types(self) -> dict[str, dict]:
        return {
            name: {"required": binding.get("required", [])}
            for name, binding in self.config.get("bindings", {}).items()
        }

    # Remote platform: nothing to transform locally; applied flags are enough.

    def validate_execute(self, platform: dict, action_type: str, payload: dict) -> None:
        if action_type not in self.config.get("bindings", {}):
            raise ExecutionFailedError(f"no adapter binding for {action_type!r}")

    def apply_execute(self, platform: dict, action_type: str, payload: dict, actor: str) -> dict:
        return {}

    def apply_revert(self, platform: dict, action_type: str, payload: dict, undo: dict, actor: str) -> None:
        return None

    # -- external delivery

    def _post(self, url: str, body: dict) -> None:
        import json

        raw = json.dumps(body, sort_keys=True).encode("utf-8")
        headers = {"Content-Type": "application/json", "X-Signature": sign_body(self.secret, raw)}
        last_error: Exception | None = None
        for attempt in range(RETRIES):
            try:
                with httpx.Client(transport=self._transport, timeout=5.0) as client:
                    response = client.post(url, content=raw, headers=headers)
                if 200 <= response.status_code < 300:
                    return
                last_error = ExecutionFailedError(f"endpoint returned {response.status_code}")
            except httpx.HTTPError as err:
                last_error = err
            if attempt < RETRIES - 1:
                time.sleep(self._backoff_base * (2**attempt))
        raise ExecutionFailedError(f"delivery to {url} failed after {RETRIES} attempts: {last_error}")

    def external_execute(self, action_type: str, payload: dict, action_id: str) -> None:
        binding = self.config["bindings"][action_type]
        self._post(binding["execute_url"], {"action_id": action_id, "type": action_type, "payload": payload})

    def external_revert(self, action_type: str, payload: dict, action_id: str) -> None:
        binding = self.config["bindings"][action_type]
        url = binding.get("revert_url") or binding["execute_url"]
        self._post(url, {"action_id": action_id, "type": action_type, "payload": payload, "revert": True})

    def external_notify(self, notification: dict) -> None:
        url = self.config.get("notify_url")
        if url:
            self._post(url, notification)
