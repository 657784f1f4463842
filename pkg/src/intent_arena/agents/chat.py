"""Chat-completion transport: HTTP client, scripted stub and fixture replay.

A request is ``{"model", "messages", "temperature", "max_tokens"}`` encoded
as JSON; the reply text is read from ``choices[0].message.content``.
Fixture files hold one ``{"request_hash", "reply_text"}`` object per line.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Union

import httpx

logger = logging.getLogger(__name__)

API_KEY_ENV = "INTENT_ARENA_API_KEY"
ROLES = ("system", "user", "assistant")


class TransportError(RuntimeError):
    """Network-level failure; safe to retry."""


class ProtocolError(RuntimeError):
    """The endpoint answered, but not with a usable completion."""

    def __init__(self, message: str, status: Optional[int] = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


@dataclass
class ChatExchange:
    """One agent's conversation. ``retries`` counts transport retries of the last call."""

    model: str = "gpt-4"
    temperature: float = 0.0
    max_tokens: int = 256
    messages: list = field(default_factory=list)
    response_text: str = ""
    retries: int = 0

    def add(self, role: str, content: str) -> None:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if role == "system" and self.messages:
            raise ValueError("system message must come first")
        if role != "system" and self.messages and self.messages[-1]["role"] == role:
            raise ValueError(f"two consecutive {role} messages")
        self.messages.append({"role": role, "content": content})

    def request(self) -> dict:
        return {
            "model": self.model,
            "messages": [dict(m) for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


def request_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Transport(Protocol):
    def send(self, payload: dict, timeout_s: float) -> str:
        ...


class HttpTransport:
    """OpenAI-style ``/chat/completions`` endpoint with a bearer token."""

    def __init__(self, endpoint: str, api_key: Optional[str] = None,
                 client: Optional[httpx.Client] = None):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._client = client or httpx.Client()

    def send(self, payload: dict, timeout_s: float) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._client.post(self.endpoint, json=payload, headers=headers, timeout=timeout_s)
        except httpx.TransportError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            body = resp.text[:200]
            raise ProtocolError(f"endpoint returned HTTP {resp.status_code}", resp.status_code, body)
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("malformed completion body", resp.status_code, resp.text[:200]) from exc
        if not isinstance(text, str) or not text:
            raise ProtocolError("empty completion", resp.status_code, resp.text[:200])
        return text


class StubTransport:
    """Scripted replies. Exception instances (or classes) in the script are raised instead.

    With ``cycle=True`` the script repeats; otherwise running out is a protocol error.
    """

    def __init__(self, script: Iterable[Union[str, BaseException, type]], cycle: bool = False):
        self.script = list(script)
        self.cycle = cycle
        self.calls = 0
        self.requests: list = []

    def send(self, payload: dict, timeout_s: float) -> str:
        self.requests.append(payload)
        if not self.script:
            raise ProtocolError("stub script is empty")
        if self.calls >= len(self.script) and not self.cycle:
            raise ProtocolError(f"stub script exhausted after {len(self.script)} replies")
        item = self.script[self.calls % len(self.script)]
        self.calls += 1
        if isinstance(item, BaseException) or (isinstance(item, type) and issubclass(item, BaseException)):
            raise item
        return item


class FixtureTransport:
    """Replays recorded replies keyed by request hash, in recorded order per hash."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._replies = defaultdict(deque)
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._replies[rec["request_hash"]].append(rec["reply_text"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise ProtocolError(f"{self.path}:{lineno}: bad fixture record ({exc})") from exc

    def send(self, payload: dict, timeout_s: float) -> str:
        key = request_hash(payload)
        queue = self._replies.get(key)
        if not queue:
            raise ProtocolError(f"no fixture reply for request {key[:12]}")
        return queue.popleft()


class RecordingTransport:
    """Wraps another transport and appends every successful exchange to a fixture file."""

    def __init__(self, inner: Transport, path: Union[str, Path]):
        self.inner = inner
        self.path = Path(path)

    def send(self, payload: dict, timeout_s: float) -> str:
        reply = self.inner.send(payload, timeout_s)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"request_hash": request_hash(payload), "reply_text": reply},
                                ensure_ascii=False) + "\n")
        return reply


def chat_complete(exchange: ChatExchange, transport: Transport, *, timeout_s: float = 60.0,
                  max_tries: int = 3, backoff_base_s: float = 1.0, backoff_factor: float = 2.0,
                  sleep: Callable[[float], None] = time.sleep) -> str:
    """Send the exchange, append the assistant reply and return it.

    Transport errors are retried with exponential backoff; protocol errors are not.
    """
    payload = exchange.request()
    exchange.retries = 0
    delay = backoff_base_s
    for attempt in range(1, max_tries + 1):
        try:
            text = transport.send(payload, timeout_s)
            break
        except TransportError as exc:
            if attempt == max_tries:
                raise TransportError(f"giving up after {max_tries} tries: {exc}") from exc
            logger.warning("chat transport failed (try %d/%d): %s", attempt, max_tries, exc)
            exchange.retries += 1
            sleep(delay)
            delay *= backoff_factor
    if not text:
        raise ProtocolError("empty completion")
    exchange.add("assistant", text)
    exchange.response_text = text
    return text
