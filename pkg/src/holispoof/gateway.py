"""Client for chat-completion text-generation services.

Requests go to ``{base_url}/chat/completions`` with a ``messages`` array;
the reply content is read from ``choices[0].message.content``.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import httpx

from .errors import ConfigError, MalformedResponseError, StructuredOutputFailureError
from .jsonblock import find_json_object
from .transport import RetryPolicy, post_with_retry, resolve_transport

log = logging.getLogger(__name__)

API_KEY_ENV = "HOLISPOOF_API_KEY"
BASE_URL_ENV = "HOLISPOOF_BASE_URL"

ROLES = ("system", "user", "assistant")

JSON_CORRECTION = (
    "Your previous reply could not be used. Reply again with only a single JSON object "
    "containing the keys {keys}, and nothing else."
)


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown message role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, Message) else Message(**m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        if not msgs:
            raise ValueError("a chat request needs at least one message")
        if msgs[0].role == "assistant":
            raise ValueError("first message must be a system or user message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def followed_by(self, *messages: Message) -> "ChatRequest":
        return replace(self, messages=self.messages + tuple(messages))

    def payload(self) -> dict[str, Any]:
        return {
            "model": self.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
        }


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str = "http://localhost:8000/v1"
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 1.0
    backoff_max_s: float = 30.0
    max_in_flight: int = 4
    transport: str | None = None
    # Read from the environment only; excluded from repr, equality and dumps.
    api_key: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if not self.timeout_s > 0:
            raise ConfigError("timeout_s must be positive")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")

    @property
    def retry_policy(self) -> RetryPolicy:
        return RetryPolicy(self.max_retries, self.backoff_base_s, self.backoff_max_s)

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None = None, env: dict[str, str] | None = None) -> "GatewayConfig":
        d = dict(d or {})
        env = os.environ if env is None else env
        if "api_key" in d:
            raise ConfigError(f"credentials must come from ${API_KEY_ENV}, not the config file")
        if env.get(BASE_URL_ENV) and "base_url" not in d:
            d["base_url"] = env[BASE_URL_ENV]
        known = {f for f in cls.__dataclass_fields__ if f != "api_key"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown gateway config keys: {sorted(unknown)}")
        return cls(**d, api_key=env.get(API_KEY_ENV) or None)

    def public_dict(self) -> dict[str, Any]:
        return {
            "base_url": self.base_url,
            "timeout_s": self.timeout_s,
            "max_retries": self.max_retries,
            "backoff_base_s": self.backoff_base_s,
            "backoff_max_s": self.backoff_max_s,
            "max_in_flight": self.max_in_flight,
            "transport": self.transport,
        }


class LLMGateway:
    """Thread-safe chat client with retries and an in-flight bound."""

    def __init__(
        self,
        config: GatewayConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        if transport is None:
            transport = resolve_transport(config.transport)
        headers = {"content-type": "application/json"}
        if config.api_key:
            headers["authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport, headers=headers)
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self._sleep = sleep
        self.url = config.base_url.rstrip("/") + "/chat/completions"

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def complete(self, request: ChatRequest) -> str:
        with self._slots:
            log.debug("chat request model=%s messages=%d", request.model_name, len(request.messages))
            resp = post_with_retry(
                self._client, self.url, policy=self.config.retry_policy, sleep=self._sleep, json=request.payload()
            )
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected chat completion body: {exc!r}") from None
        if content is None:
            return ""
        if not isinstance(content, str):
            raise MalformedResponseError("message content is not a string")
        return content

    def complete_json(self, request: ChatRequest, required_keys: Sequence[str], max_reasks: int = 2) -> dict[str, Any]:
        """Return the first JSON object in the reply that has all ``required_keys``.

        On failure the conversation is extended with the bad reply and a
        corrective instruction and re-sent, at most ``max_reasks`` times.
        """
        keys = list(required_keys)
        correction = Message("user", JSON_CORRECTION.format(keys=", ".join(f'"{k}"' for k in keys)))
        current = request
        reply = ""
        for attempt in range(max_reasks + 1):
            reply = self.complete(current)
            obj = find_json_object(reply, keys)
            if obj is not None:
                return obj
            log.info("structured output missing keys %s (attempt %d)", keys, attempt + 1)
            current = current.followed_by(Message("assistant", reply), correction)
        raise StructuredOutputFailureError(
            f"no JSON object with keys {keys} after {max_reasks + 1} replies; last reply: {reply[:200]!r}"
        )
