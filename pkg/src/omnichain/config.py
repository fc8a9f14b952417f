"""Application config files (JSON or YAML) with ``${VAR}`` interpolation.

Recognised keys::

    backend:      mock rule file, or {kind: mock|http, ...}
    pipeline:     {k, template, frames, temperature, seed, max_tokens, reason_in_flight}
    policy:       strict | lenient | {mode, repair_format_by_task}
    out:          report directory
    concurrency:  in-flight cap for batch runs and the gateway

Secrets belong in the environment; the HTTP backend reads its token from the
variable named by ``backend.token_env``.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from omnichain.backend import DecodingParams
from omnichain.pipeline import PipelineConfig
from omnichain.planner import PlannerPolicy, PolicyMode

_VAR = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


class ConfigError(ValueError):
    pass


def interpolate(value: Any) -> Any:
    if isinstance(value, str):
        def sub(m: re.Match) -> str:
            if m.group(1) not in os.environ:
                raise ConfigError(f"environment variable {m.group(1)} is not set")
            return os.environ[m.group(1)]

        return _VAR.sub(sub, value)
    if isinstance(value, list):
        return [interpolate(v) for v in value]
    if isinstance(value, dict):
        return {k: interpolate(v) for k, v in value.items()}
    return value


def parse_policy(value: Any) -> PlannerPolicy:
    if value is None:
        return PlannerPolicy()
    if isinstance(value, str):
        return PlannerPolicy(PolicyMode(value.lower()))
    return PlannerPolicy(PolicyMode(value.get("mode", "lenient")), bool(value.get("repair_format_by_task", True)))


@dataclass
class AppConfig:
    backend: Any = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    out: Path = Path("reports")
    concurrency: int = 8
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path: str | Path) -> AppConfig:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        raw = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
        return cls.from_dict(interpolate(raw or {}), path.parent)

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: Path = Path(".")) -> AppConfig:
        backend = d.get("backend")
        if isinstance(backend, str) and not (base_dir / backend).exists():
            raise ConfigError(f"backend file not found: {base_dir / backend}")
        if isinstance(backend, dict) and isinstance(backend.get("rules"), str):
            if not (base_dir / backend["rules"]).exists():
                raise ConfigError(f"mock rule file not found: {base_dir / backend['rules']}")
        p = d.get("pipeline", {}) or {}
        try:
            pipeline = PipelineConfig(
                policy=parse_policy(d.get("policy")),
                k=int(p.get("k", 4)),
                decoding=DecodingParams(
                    float(p.get("temperature", 0.0)), int(p.get("seed", 0)), int(p.get("max_tokens", 512))
                ),
                template=p.get("template", "open"),
                frames=p.get("frames"),
                reason_in_flight=p.get("reason_in_flight"),
            )
            concurrency = int(d.get("concurrency", 8))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        return cls(backend, pipeline, base_dir / d.get("out", "reports"), concurrency, base_dir)
