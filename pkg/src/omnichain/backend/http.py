"""Chat-style HTTP client for omni-model endpoints.

Request body (canonical part names, remappable per provider)::

    {"model": ..., "temperature": 0, "seed": 0, "max_tokens": 512, "stream": true,
     "messages": [{"role": "system", "content": "<role prompt>"},
                  {"role": "user", "content": [{"type": "text", "text": ...},
                                               {"type": "audio", "ref": ..., "start": 0, "end": 8},
                                               {"type": "video", "frames": [...], ...}]}]}

Non-streaming replies may be ``{"text": ..., "usage": {...}}`` or the common
``{"choices": [{"message": {"content": ...}}]}`` shape.  Streaming replies are
server-sent events whose ``data:`` payloads carry ``text`` or
``choices[0].delta.content`` and optionally ``usage``.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any

import httpx

from omnichain.backend.base import (
    Backend,
    BackendError,
    BackendTimeout,
    DecodingParams,
    GenerateResult,
    MalformedResponse,
    TransportError,
)
from omnichain.core import MessageComposition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HttpConfig:
    endpoint: str
    model: str
    token_env: str | None = None
    timeout: float = 60.0
    retries: int = 2
    stream: bool = True
    warmup_calls: int = 1
    part_names: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.timeout > 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retry count must be >= 0")
        if self.warmup_calls < 0:
            raise ValueError("warm-up call count must be >= 0")


class _PartialResponse(BackendError):
    """Failure after response bytes arrived; never retried."""


def _chunk_text(payload: dict[str, Any]) -> str:
    if "text" in payload and isinstance(payload["text"], str):
        return payload["text"]
    choices = payload.get("choices")
    if choices:
        c0 = choices[0]
        delta = c0.get("delta") or c0.get("message") or {}
        content = delta.get("content")
        if isinstance(content, str):
            return content
    return ""


def _usage_tokens(payload: dict[str, Any]) -> int | None:
    usage = payload.get("usage") or {}
    n = usage.get("completion_tokens", usage.get("output_tokens"))
    return int(n) if n is not None else None


class HttpBackend(Backend):
    def __init__(self, config: HttpConfig, *, transport: httpx.BaseTransport | None = None, _shared=None):
        super().__init__()
        self.config = config
        if _shared is None:
            client = httpx.Client(timeout=config.timeout, transport=transport)
            _shared = {"client": client, "warm_lock": threading.Lock(), "warmed": False}
        self._shared = _shared

    @property
    def _client(self) -> httpx.Client:
        return self._shared["client"]

    def _token(self) -> str | None:
        if not self.config.token_env:
            return None
        return os.environ.get(self.config.token_env)

    def _scrub(self, text: str) -> str:
        token = self._token()
        return text.replace(token, "***") if token else text

    def request_body(self, c: MessageComposition, p: DecodingParams) -> dict[str, Any]:
        content = []
        for part in c.to_dict()["content"]:
            part = dict(part)
            part["type"] = self.config.part_names.get(part["type"], part["type"])
            content.append(part)
        return {
            "model": self.config.model,
            "temperature": p.temperature,
            "seed": p.seed,
            "max_tokens": p.max_tokens,
            "stream": self.config.stream,
            "messages": [
                {"role": "system", "content": c.role_prompt},
                {"role": "user", "content": content},
            ],
        }

    def _headers(self) -> dict[str, str]:
        token = self._token()
        return {"Authorization": f"Bearer {token}"} if token else {}

    def _warm_up(self, c: MessageComposition, p: DecodingParams) -> None:
        with self._shared["warm_lock"]:
            if self._shared["warmed"]:
                return
            self._shared["warmed"] = True
            for _ in range(self.config.warmup_calls):
                try:
                    self._attempt(c, p)
                except BackendError as exc:
                    log.warning("warm-up call failed: %s", self._scrub(str(exc)))

    def _generate(self, c: MessageComposition, p: DecodingParams) -> GenerateResult:
        if self.config.warmup_calls and not self._shared["warmed"]:
            self._warm_up(c, p)
        last: BackendError | None = None
        for attempt in range(self.config.retries + 1):
            try:
                return self._attempt(c, p)
            except _PartialResponse as exc:
                raise TransportError(str(exc)) from None
            except BackendError as exc:
                if not exc.retryable:
                    raise
                last = exc
                log.info("backend attempt %d failed: %s", attempt + 1, self._scrub(str(exc)))
        assert last is not None
        raise last

    def _attempt(self, c: MessageComposition, p: DecodingParams) -> GenerateResult:
        body = self.request_body(c, p)
        try:
            if self.config.stream:
                return self._attempt_stream(body)
            return self._attempt_plain(body)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"backend timed out after {self.config.timeout}s") from exc
        except httpx.TransportError as exc:
            raise TransportError(f"transport failure: {type(exc).__name__}") from exc

    def _check_status(self, r: httpx.Response) -> None:
        if r.status_code >= 500:
            raise TransportError(f"backend returned HTTP {r.status_code}")
        if r.status_code >= 400:
            raise BackendError(f"backend rejected request: HTTP {r.status_code}")

    def _attempt_plain(self, body: dict[str, Any]) -> GenerateResult:
        t0 = time.perf_counter()
        r = self._client.post(self.config.endpoint, json=body, headers=self._headers())
        elapsed = time.perf_counter() - t0
        self._check_status(r)
        try:
            payload = r.json()
        except ValueError as exc:
            raise MalformedResponse("backend response is not JSON") from exc
        if not isinstance(payload, dict):
            raise MalformedResponse("backend response is not a JSON object")
        text = _chunk_text(payload)
        if not text and "text" not in payload and not payload.get("choices"):
            raise MalformedResponse("backend response has no text")
        tokens = _usage_tokens(payload) or len(text.split())
        # Without streaming there is no first-token timestamp.
        return GenerateResult(text, None, elapsed / tokens if tokens else 0.0, tokens)

    def _attempt_stream(self, body: dict[str, Any]) -> GenerateResult:
        t0 = time.perf_counter()
        with self._client.stream("POST", self.config.endpoint, json=body, headers=self._headers()) as r:
            self._check_status(r)
            pieces: list[str] = []
            usage: int | None = None
            t_first: float | None = None
            received = False
            try:
                for line in r.iter_lines():
                    received = True
                    line = line.strip()
                    if not line.startswith("data:"):
                        continue
                    data = line[5:].strip()
                    if data == "[DONE]":
                        break
                    try:
                        payload = json.loads(data)
                    except ValueError as exc:
                        raise _PartialResponse("malformed stream chunk") from exc
                    piece = _chunk_text(payload)
                    if piece and t_first is None:
                        t_first = time.perf_counter()
                    pieces.append(piece)
                    usage = _usage_tokens(payload) or usage
            except httpx.HTTPError as exc:
                if received:
                    raise _PartialResponse(f"stream interrupted: {type(exc).__name__}") from exc
                raise
        t_end = time.perf_counter()
        text = "".join(pieces)
        tokens = usage or len(text.split())
        if t_first is None:
            return GenerateResult(text, None, 0.0, tokens)
        return GenerateResult(text, t_first - t0, (t_end - t_first) / tokens if tokens else 0.0, tokens)

    def fork(self) -> HttpBackend:
        return HttpBackend(self.config, _shared=self._shared)

    def close(self) -> None:
        self._client.close()
