"""Model backends: a scriptable mock and an HTTP client with identical semantics."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from omnichain.backend.base import (
    Backend,
    BackendError,
    BackendTimeout,
    CallLog,
    DecodingParams,
    GenerateResult,
    LogEntry,
    MalformedResponse,
    MockMisconfigured,
    TransportError,
)
from omnichain.backend.http import HttpBackend, HttpConfig
from omnichain.backend.mock import MockBackend, MockRule, load_rules

__all__ = [
    "Backend",
    "BackendError",
    "BackendTimeout",
    "CallLog",
    "DecodingParams",
    "GenerateResult",
    "HttpBackend",
    "HttpConfig",
    "LogEntry",
    "MalformedResponse",
    "MockBackend",
    "MockMisconfigured",
    "MockRule",
    "TransportError",
    "backend_from_config",
    "load_rules",
]


def backend_from_config(cfg: Any, base_dir: str | Path = ".") -> Backend:
    """Build a backend from a config value.

    Accepts a mock rule array, ``{"kind": "mock", "rules": [...] | "path"}``,
    ``{"kind": "http", "endpoint": ..., "model": ..., ...}``, or a path to a
    JSON file holding any of those.
    """
    if isinstance(cfg, (str, Path)):
        path = Path(base_dir) / cfg
        return backend_from_config(json.loads(path.read_text(encoding="utf-8")), path.parent)
    if isinstance(cfg, list):
        return MockBackend([MockRule.from_dict(d) for d in cfg])
    kind = cfg.get("kind", "mock")
    if kind == "mock":
        rules = cfg.get("rules", [])
        if isinstance(rules, str):
            rules = json.loads((Path(base_dir) / rules).read_text(encoding="utf-8"))
        return MockBackend([MockRule.from_dict(d) for d in rules], realtime=bool(cfg.get("realtime", False)))
    if kind == "http":
        keys = ("endpoint", "model", "token_env", "timeout", "retries", "stream", "warmup_calls", "part_names")
        return HttpBackend(HttpConfig(**{k: cfg[k] for k in keys if k in cfg}))
    raise ValueError(f"unknown backend kind {kind!r}")
