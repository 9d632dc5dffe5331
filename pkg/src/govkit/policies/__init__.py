"""Bundled policy sources (the bootstrap starter kit)."""
