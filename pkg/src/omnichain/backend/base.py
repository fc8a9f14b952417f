from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

from omnichain.core import MessageComposition, Stage


class BackendError(RuntimeError):
    """Base class for every failure surfaced by a model backend."""

    retryable = False


class TransportError(BackendError):
    retryable = True


class BackendTimeout(BackendError):
    retryable = True


class MalformedResponse(BackendError):
    pass


class MockMisconfigured(BackendError):
    pass


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    seed: int = 0
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class GenerateResult:
    text: str
    prefill_seconds: float | None
    generate_seconds_per_token: float
    token_count: int

    def __post_init__(self) -> None:
        if self.prefill_seconds is not None and self.prefill_seconds < 0:
            raise ValueError("prefill time must be >= 0")
        if self.generate_seconds_per_token < 0:
            raise ValueError("per-token time must be >= 0")
        if self.text.strip() and self.token_count < 1:
            raise ValueError("nonempty text needs token_count >= 1")


class LogEntry(NamedTuple):
    seq: int
    stage: Stage
    fingerprint: tuple[str, ...]


class CallLog:
    """Thread-safe, issue-ordered record of backend calls."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: list[LogEntry] = []
        self._seq = 0

    def append(self, c: MessageComposition) -> int:
        with self._lock:
            seq = self._seq
            self._seq += 1
            self._entries.append(LogEntry(seq, c.stage, c.fingerprint()))
            return seq

    def entries(self) -> list[LogEntry]:
        with self._lock:
            return list(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class Backend(ABC):
    """One model backbone shared by the planner, reasoner and decider roles.

    ``measures_real_time`` tells the pipeline whether reported timings are
    wall-clock measurements or simulated values.
    """

    measures_real_time = True

    def __init__(self) -> None:
        self._log = CallLog()

    def generate(self, c: MessageComposition, p: DecodingParams | None = None) -> GenerateResult:
        p = p or DecodingParams()
        self._log.append(c)
        return self._generate(c, p)

    @abstractmethod
    def _generate(self, c: MessageComposition, p: DecodingParams) -> GenerateResult: ...

    def call_log(self) -> list[tuple[tuple[str, ...], Stage]]:
        return [(e.fingerprint, e.stage) for e in self._log.entries()]

    def log_entries(self) -> list[LogEntry]:
        return self._log.entries()

    def reset_log(self) -> None:
        self._log.clear()

    @abstractmethod
    def fork(self) -> Backend:
        """A client sharing configuration and connections but with its own call log."""

    def close(self) -> None:
        pass
