"""HTTP plumbing shared by service clients: retrying POST and mock transports."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import httpx

from .errors import (
    AuthFailureError,
    ConfigError,
    GatewayTimeoutError,
    RateLimitedError,
    RequestRejectedError,
    ServiceUnavailableError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    backoff_base_s: float = 1.0
    backoff_max_s: float = 30.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def delay(self, attempt: int) -> float:
        """Sleep before retry number ``attempt`` (0-based)."""
        return min(self.backoff_max_s, self.backoff_base_s * 2**attempt)


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("retry-after")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


def post_with_retry(
    client: httpx.Client,
    url: str,
    *,
    policy: RetryPolicy,
    sleep: Callable[[float], None] = time.sleep,
    **kwargs: Any,
) -> httpx.Response:
    """POST, retrying transport errors, timeouts, 429 and 5xx.

    At most ``1 + policy.max_retries`` attempts are made. 401/403 raise
    :class:`AuthFailureError` and other 4xx raise
    :class:`RequestRejectedError`, both without retrying.
    """
    last: Exception | None = None
    hinted: float | None = None
    for attempt in range(policy.max_retries + 1):
        if attempt:
            sleep(policy.delay(attempt - 1) if hinted is None else hinted)
            hinted = None
        try:
            resp = client.post(url, **kwargs)
        except httpx.TimeoutException as exc:
            last = GatewayTimeoutError(f"timed out calling {url}: {exc}")
            log.warning("attempt %d/%d timed out", attempt + 1, policy.max_retries + 1)
            continue
        except httpx.TransportError as exc:
            last = ServiceUnavailableError(f"transport error calling {url}: {exc}")
            log.warning("attempt %d/%d transport error: %s", attempt + 1, policy.max_retries + 1, exc)
            continue

        status = resp.status_code
        if status < 400:
            return resp
        if status in (401, 403):
            raise AuthFailureError(f"{url} rejected credentials (HTTP {status})")
        if status == 429:
            last = RateLimitedError(f"{url} rate limited the request")
        elif status >= 500:
            last = ServiceUnavailableError(f"{url} returned HTTP {status}")
        else:
            raise RequestRejectedError(f"{url} returned HTTP {status}: {resp.text[:200]}")
        wait = _retry_after(resp)
        if wait is not None:
            hinted = min(wait, policy.backoff_max_s)
        log.warning("attempt %d/%d got HTTP %d", attempt + 1, policy.max_retries + 1, status)
    assert last is not None
    raise last


class FixtureTransport(httpx.MockTransport):
    """Replays recorded responses from a fixture directory.

    Every ``*.json`` file in the directory is one rule::

        {"match": "substring" | ["all", "of", "these"] | null,
         "responses": [<response>, ...]}

    Rules are tried in file-name order; the first whose ``match`` strings
    all occur in the request text wins. For chat requests the request text
    is the concatenated message contents, for TTS requests the ``text``
    field. A rule's responses are served in order and the last one repeats
    once they run out. A response is either a string (the assistant
    content of a 200 chat completion) or an object with any of
    ``status``, ``content``, ``file`` (raw body read from the fixture
    directory) and ``json`` (raw JSON body).
    """

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        if not self.fixture_dir.is_dir():
            raise ConfigError(f"mock fixture directory not found: {self.fixture_dir}")
        self.rules = []
        for path in sorted(self.fixture_dir.glob("*.json")):
            rule = json.loads(path.read_text(encoding="utf-8"))
            match = rule.get("match")
            if isinstance(match, str):
                match = [match]
            responses = rule.get("responses") or []
            if not responses:
                raise ConfigError(f"{path}: rule has no responses")
            self.rules.append({"name": path.stem, "match": match or [], "responses": responses, "served": 0})
        self.calls: list[tuple[str, dict[str, Any]]] = []
        self._lock = threading.Lock()
        super().__init__(self._handle)

    @staticmethod
    def _request_text(payload: Any) -> str:
        if isinstance(payload, dict):
            if isinstance(payload.get("messages"), list):
                return "\n".join(str(m.get("content", "")) for m in payload["messages"])
            if "text" in payload:
                return str(payload["text"])
        return json.dumps(payload)

    def _handle(self, request: httpx.Request) -> httpx.Response:
        try:
            payload = json.loads(request.content or b"null")
        except json.JSONDecodeError:
            payload = None
        text = self._request_text(payload)
        with self._lock:
            for rule in self.rules:
                if all(m in text for m in rule["match"]):
                    idx = min(rule["served"], len(rule["responses"]) - 1)
                    rule["served"] += 1
                    self.calls.append((rule["name"], payload))
                    return self._build(rule["responses"][idx])
            self.calls.append(("<unmatched>", payload))
        return httpx.Response(404, json={"error": "no fixture rule matched"})

    def _build(self, spec: Any) -> httpx.Response:
        if isinstance(spec, str):
            spec = {"content": spec}
        status = int(spec.get("status", 200))
        if "file" in spec:
            data = (self.fixture_dir / spec["file"]).read_bytes()
            ctype = "audio/wav" if spec["file"].endswith(".wav") else "application/octet-stream"
            return httpx.Response(status, content=data, headers={"content-type": ctype})
        if "json" in spec:
            return httpx.Response(status, json=spec["json"])
        if "content" in spec:
            return httpx.Response(status, json=chat_completion_body(spec["content"]))
        return httpx.Response(status, json={"error": f"HTTP {status}"})


def chat_completion_body(content: str) -> dict[str, Any]:
    return {
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
    }


def resolve_transport(spec: str | None) -> httpx.BaseTransport | None:
    """``None``/``"http"`` for the real network, ``"mock:<dir>"`` for fixtures."""
    if spec is None or spec in ("", "http"):
        return None
    if spec.startswith("mock:"):
        return FixtureTransport(spec[len("mock:"):])
    raise ConfigError(f"unknown transport {spec!r}; expected 'http' or 'mock:<fixture dir>'")
