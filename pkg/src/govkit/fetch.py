"""HTTP fetcher behind the policy `http_fetch` host call.

Requests carry a 5 s timeout and responses are capped at 256 KiB. URL
prefixes can be mounted onto in-process ASGI apps, which is how scenarios
reach the bundled scorer deterministically and without sockets.
"""

from __future__ import annotations

import asyncio

import httpx

from .errors import PolicyRuntimeError

MAX_RESPONSE_BYTES = 256 * 1024
TIMEOUT_SECONDS = 5.0

SCORER_BASE_URL = "http://mock-scorer.local"


class HttpFetcher:
    def __init__(self, mounts: dict[str, object] | None = None, *, allow_network: bool = True):
        self._mounts = dict(mounts or {})
        self._allow_network = allow_network

    def mount(self, prefix: str, asgi_app) -> None:
        self._mounts[prefix] = asgi_app

    def _mounted_app(self, url: str):
        for prefix, asgi_app in self._mounts.items():
            if url.startswith(prefix):
                return asgi_app
        if not self._allow_network:
            raise PolicyRuntimeError(f"no mount for {url!r} and network access is disabled")
        return None

    def __call__(self, url: str, query: dict) -> object:
        params = {k: str(v) for k, v in query.items()}
        asgi_app = self._mounted_app(url)
        try:
            if asgi_app is not None:
                # Mounted apps are ASGI; drive them on a private event loop so
                # policy evaluation stays synchronous.
                async def _get():
                    transport = httpx.ASGITransport(app=asgi_app)
                    async with httpx.AsyncClient(transport=transport, timeout=TIMEOUT_SECONDS) as client:
                        return await client.get(url, params=params)

                response = asyncio.run(_get())
            else:
                with httpx.Client(timeout=TIMEOUT_SECONDS) as client:
                    response = client.get(url, params=params)
        except httpx.HTTPError as err:
            raise PolicyRuntimeError(f"http_fetch failed: {err}") from None
        if len(response.content) > MAX_RESPONSE_BYTES:
            raise PolicyRuntimeError(f"response exceeds {MAX_RESPONSE_BYTES} bytes")
        if response.status_code >= 400:
            raise PolicyRuntimeError(f"http_fetch got status {response.status_code}")
        try:
            return response.json()
        except ValueError:
            raise PolicyRuntimeError("http_fetch response is not JSON") from None


def scenario_fetcher() -> HttpFetcher:
    """Fetcher with the bundled scorer mounted at its well-known base URL."""
    from .scorer import app as scorer_app

    return HttpFetcher({SCORER_BASE_URL: scorer_app}, allow_network=False)
