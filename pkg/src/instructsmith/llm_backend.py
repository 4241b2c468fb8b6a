"""Chat-completion client abstraction: HTTP backend, scriptable mock, retries.

One client shape serves both the generation model and the discrimination
model; they differ only in their `BackendConfig`. The mock backend replays a
finite script and records a byte-exact transcript of every request, which is
what the prompt-construction tests assert against.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import requests

from .errors import (
    BackendError,
    BackendTimeoutError,
    ProtocolError,
    RateLimitedError,
    ScriptedMissError,
    ServerBackendError,
)

log = logging.getLogger(__name__)

RETRYABLE_CLASSES = ("rate_limited", "server_error", "timeout")

ROLES = ("system", "user", "assistant")


@dataclass
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")


@dataclass
class ChatRequest:
    """One chat-completion call: messages plus sampling parameters."""

    messages: list[ChatMessage]
    temperature: float = 0.0
    max_output: int = 2048
    model_name: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[-1].role != "user":
            raise ValueError("last message must have role 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def user_text(self) -> str:
        """Content of the final user message (what mock predicates match on)."""
        return self.messages[-1].content


@dataclass
class ChatReply:
    content: str
    usage: dict[str, int] = field(default_factory=dict)
    model_name: str = ""


@dataclass
class RetryPolicy:
    """Exponential backoff: attempt i sleeps base_delay * multiplier**(i-1),
    scaled by a uniform jitter of +/- jitter_fraction."""

    max_attempts: int = 3
    base_delay: float = 0.5
    multiplier: float = 2.0
    jitter_fraction: float = 0.0
    retry_on: tuple[str, ...] = RETRYABLE_CLASSES

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.multiplier < 1.0:
            raise ValueError("multiplier must be >= 1")
        if not (0.0 <= self.jitter_fraction <= 1.0):
            raise ValueError("jitter_fraction must be in [0, 1]")
        unknown = set(self.retry_on) - set(RETRYABLE_CLASSES)
        if unknown:
            raise ValueError(f"unknown retry classes: {sorted(unknown)}")

    def delay_for_attempt(self, attempt: int, rng: random.Random | None = None) -> float:
        """Backoff before retrying after failed attempt ``attempt`` (1-based)."""
        base = self.base_delay * self.multiplier ** (attempt - 1)
        if self.jitter_fraction and rng is not None:
            base *= 1.0 + self.jitter_fraction * rng.uniform(-1.0, 1.0)
        elif self.jitter_fraction:
            base *= 1.0 + self.jitter_fraction * random.uniform(-1.0, 1.0)
        return max(base, 0.0)


@dataclass
class BackendConfig:
    """Where and how to reach one chat model.

    ``kind`` selects the implementation: "http" talks the common
    chat-completions JSON shape; "mock" builds a self-driving test backend
    (see `hermetic`). The credential is read from the env var named by
    ``api_key_env`` and sent as a bearer token.
    """

    kind: str = "http"
    endpoint: str = ""
    model_name: str = ""
    api_key_env: str = ""
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        retry = RetryPolicy(**d["retry"]) if "retry" in d else RetryPolicy()
        known = {"kind", "endpoint", "model_name", "api_key_env", "timeout"}
        # unknown top-level keys and the contents of an explicit "extra"
        # object both land flat in extra
        extra = {k: v for k, v in d.items() if k not in known | {"retry", "extra"}}
        if isinstance(d.get("extra"), dict):
            extra.update(d["extra"])
        return cls(kind=d.get("kind", "http"), endpoint=d.get("endpoint", ""),
                   model_name=d.get("model_name", ""),
                   api_key_env=d.get("api_key_env", ""),
                   timeout=float(d.get("timeout", 60.0)), retry=retry, extra=extra)


class HttpChatBackend:
    """POSTs the common chat-completions JSON shape and takes the first choice."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self.model_name = config.model_name

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env, "")
            if not key:
                raise BackendError(
                    f"credential env var {self.config.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def send(self, request: ChatRequest) -> ChatReply:
        body = {
            "model": request.model_name or self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        try:
            resp = requests.post(self.config.endpoint, headers=self._headers(),
                                 data=json.dumps(body), timeout=self.config.timeout)
        except requests.Timeout as exc:
            raise BackendTimeoutError(f"chat request timed out: {exc}") from exc
        except requests.RequestException as exc:
            raise ServerBackendError(f"chat request failed: {exc}") from exc
        if resp.status_code == 429:
            raise RateLimitedError(f"rate limited by {self.config.endpoint}")
        if resp.status_code >= 500:
            raise ServerBackendError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise BackendError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
        try:
            obj = resp.json()
            content = obj["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat response body: {exc}") from exc
        usage = obj.get("usage", {}) if isinstance(obj.get("usage"), dict) else {}
        return ChatReply(content=str(content), usage=usage,
                         model_name=str(obj.get("model", self.model_name)))


#: a script entry predicate; None matches any request
Predicate = Callable[[str], bool] | str | None
#: a script entry reply: literal text, an error to raise, or a function of the request
Reply = str | Exception | Callable[[ChatRequest], str]


@dataclass
class ScriptEntry:
    """One (predicate, reply) pair. ``times=None`` never exhausts."""

    predicate: Predicate
    reply: Reply
    times: int | None = 1

    def matches(self, text: str) -> bool:
        if self.predicate is None:
            return True
        if isinstance(self.predicate, str):
            return self.predicate in text
        return bool(self.predicate(text))


class MockChatBackend:
    """Deterministic scripted chat backend for hermetic tests.

    Replies are consumed in script order among entries whose predicate matches
    the request's final user message. Every request is recorded byte-exactly
    in ``transcript``.
    """

    def __init__(self, script: Sequence[ScriptEntry | tuple], model_name: str = "mock-chat"):
        self.script: list[ScriptEntry] = [
            entry if isinstance(entry, ScriptEntry) else ScriptEntry(*entry)
            for entry in script
        ]
        self.model_name = model_name
        self.transcript: list[ChatRequest] = []
        self._lock = threading.Lock()

    def send(self, request: ChatRequest) -> ChatReply:
        with self._lock:
            self.transcript.append(request)
            text = request.user_text
            for entry in self.script:
                if entry.times is not None and entry.times <= 0:
                    continue
                if not entry.matches(text):
                    continue
                if entry.times is not None:
                    entry.times -= 1
                reply = entry.reply
                break
            else:
                raise ScriptedMissError(
                    f"no script entry matches request: {text[:120]!r}")
        if isinstance(reply, Exception):
            raise reply
        content = reply(request) if callable(reply) else reply
        usage = {"prompt_tokens": sum(len(m.content) for m in request.messages) // 4,
                 "completion_tokens": len(content) // 4}
        return ChatReply(content=content, usage=usage, model_name=self.model_name)


ChatBackend = HttpChatBackend | MockChatBackend


def make_chat_backend(config: BackendConfig) -> ChatBackend:
    """Build a backend instance from config. `kind: mock` builds the canned
    self-driving backend from `hermetic` (testing and demos)."""
    if config.kind == "http":
        return HttpChatBackend(config)
    if config.kind == "mock":
        from . import hermetic
        role = config.extra.get("role", "generation")
        if role == "discrimination":
            return hermetic.canned_discrimination_backend(
                bad_modulus=int(config.extra.get("bad_modulus", 0) or 0),
                model_name=config.model_name or "mock-disc")
        return hermetic.canned_generation_backend(
            model_name=config.model_name or "mock-gen",
            no_information_modulus=int(config.extra.get("no_information_modulus", 3) or 0))
    raise ValueError(f"unknown backend kind {config.kind!r}")


def complete(request: ChatRequest, backend: ChatBackend | BackendConfig,
             policy: RetryPolicy | None = None,
             sleep: Callable[[float], None] = time.sleep) -> ChatReply:
    """Send one chat request with retry/backoff on transient failures.

    ``backend`` may be a config (a client is built from it) or an already
    constructed backend instance. Terminal failures re-raise the last
    backend error.
    """
    if isinstance(backend, BackendConfig):
        if policy is None:
            policy = backend.retry
        backend = make_chat_backend(backend)
    if policy is None:
        policy = getattr(backend, "config", None).retry if hasattr(backend, "config") else RetryPolicy()
    last: BackendError | None = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return backend.send(request)
        except BackendError as exc:
            if exc.error_class not in policy.retry_on or attempt == policy.max_attempts:
                raise
            last = exc
            delay = policy.delay_for_attempt(attempt)
            log.debug("attempt %d failed (%s); retrying in %.2fs",
                      attempt, exc.error_class, delay)
            if delay > 0:
                sleep(delay)
    raise last if last is not None else BackendError("retry loop fell through")
