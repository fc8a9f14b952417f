"""Scriptable deterministic backend.

Rules are checked in order and the first match wins.  A response is either a
fixed string or a callable of ``(composition, params)``; callables must be pure
for the determinism contract to hold.

By default the mock runs on virtual time: it reports its configured delays
without sleeping.  With ``realtime=True`` it sleeps for the delays and reports
what it measured.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence, Union

from omnichain.backend.base import Backend, DecodingParams, GenerateResult, MockMisconfigured
from omnichain.core import MessageComposition, ModalityKind, Stage

Responder = Callable[[MessageComposition, DecodingParams], str]


def _distinct_runs(kinds: Sequence[ModalityKind]) -> tuple[ModalityKind, ...]:
    out: list[ModalityKind] = []
    for k in kinds:
        if not out or out[-1] is not k:
            out.append(k)
    return tuple(out)


@dataclass(frozen=True)
class MockRule:
    response: Union[str, Responder]
    stage: Stage | None = None
    has: frozenset[ModalityKind] = frozenset()
    lacks: frozenset[ModalityKind] = frozenset()
    order: tuple[ModalityKind, ...] | None = None
    last_kind: ModalityKind | None = None
    contains: str | None = None
    prefill_s: float = 0.0
    per_token_s: float = 0.0

    @property
    def is_catch_all(self) -> bool:
        return (
            self.stage is None
            and not self.has
            and not self.lacks
            and self.order is None
            and self.last_kind is None
            and self.contains is None
        )

    def matches(self, c: MessageComposition) -> bool:
        kinds = [p.kind for p in c.media_parts() if not p.is_empty_bucket]
        present = set(kinds)
        if self.stage is not None and c.stage is not self.stage:
            return False
        if not self.has <= present or self.lacks & present:
            return False
        if self.order is not None and _distinct_runs(kinds) != self.order:
            return False
        if self.last_kind is not None and (not kinds or kinds[-1] is not self.last_kind):
            return False
        if self.contains is not None and self.contains not in c.text():
            return False
        return True

    def respond(self, c: MessageComposition, p: DecodingParams) -> str:
        return self.response(c, p) if callable(self.response) else self.response

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MockRule:
        kinds = lambda xs: frozenset(ModalityKind(x) for x in xs)  # noqa: E731
        return cls(
            response=d["response"],
            stage=Stage(d["stage"]) if d.get("stage") else None,
            has=kinds(d.get("has", ())),
            lacks=kinds(d.get("lacks", ())),
            order=tuple(ModalityKind(x) for x in d["order"]) if d.get("order") is not None else None,
            last_kind=ModalityKind(d["last_kind"]) if d.get("last_kind") else None,
            contains=d.get("contains"),
            prefill_s=float(d.get("prefill_s", 0.0)),
            per_token_s=float(d.get("per_token_s", 0.0)),
        )


def load_rules(path: str | Path) -> list[MockRule]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: mock rules must be a JSON array")
    return [MockRule.from_dict(d) for d in data]


class MockBackend(Backend):
    def __init__(self, rules: Sequence[MockRule], *, realtime: bool = False, require_default: bool = True):
        super().__init__()
        self.rules = tuple(rules)
        self.realtime = realtime
        self.measures_real_time = realtime
        if require_default and not any(r.is_catch_all for r in self.rules):
            raise MockMisconfigured("mock rule list needs a catch-all default rule")

    @classmethod
    def echo(cls, text: str = "ok", **kw: Any) -> MockBackend:
        return cls([MockRule(text)], **kw)

    def _generate(self, c: MessageComposition, p: DecodingParams) -> GenerateResult:
        rule = next((r for r in self.rules if r.matches(c)), None)
        if rule is None:
            raise MockMisconfigured(f"no mock rule matched a {c.stage.value} composition")
        text = rule.respond(c, p)
        tokens = len(text.split())
        if not self.realtime:
            return GenerateResult(text, rule.prefill_s, rule.per_token_s, tokens)
        t0 = time.perf_counter()
        if rule.prefill_s:
            time.sleep(rule.prefill_s)
        t1 = time.perf_counter()
        if rule.per_token_s and tokens:
            time.sleep(rule.per_token_s * tokens)
        t2 = time.perf_counter()
        return GenerateResult(text, t1 - t0, (t2 - t1) / tokens if tokens else 0.0, tokens)

    def fork(self) -> MockBackend:
        return MockBackend(self.rules, realtime=self.realtime, require_default=False)
