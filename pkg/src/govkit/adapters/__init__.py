"""Platform adapters: the contract binding the engine to a platform, the
deterministic in-memory sandbox, and the generic signed-webhook adapter."""

from .base import PlatformAdapter, get_adapter, register_adapter
from .sandbox import SandboxAdapter
from .webhook import WebhookAdapter

__all__ = ["PlatformAdapter", "SandboxAdapter", "WebhookAdapter", "get_adapter", "register_adapter"]
