"""HTTP surface for the web UI and external tools."""

from .app import create_app

__all__ = ["create_app"]
