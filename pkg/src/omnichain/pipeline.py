"""Plan -> (Reason) -> Decide execution, trace capture and trajectory export."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from omnichain import topology
from omnichain.backend import Backend, BackendError, DecodingParams, GenerateResult
from omnichain.core import (
    CallRecord,
    MessageComposition,
    Pathway,
    PlanDirective,
    Query,
    Stage,
    Streams,
    Trace,
    TopologyFormat,
    validate_directive,
)
from omnichain.decider import run_analytical, run_intuitive
from omnichain.planner import PlannerPolicy, plan_call
from omnichain.reasoner import run_reasoning

log = logging.getLogger(__name__)


class DirectiveError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class PipelineConfig:
    policy: PlannerPolicy = field(default_factory=PlannerPolicy)
    k: int = topology.DEFAULT_K
    decoding: DecodingParams = field(default_factory=DecodingParams)
    template: str = "open"
    plan_override: PlanDirective | None = None
    frames: int | None = None
    reason_in_flight: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("interleave density k must be >= 1")
        if self.frames is not None and self.frames < 1:
            raise ValueError("frame count must be >= 1")

    def with_(self, **changes: Any) -> PipelineConfig:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return PipelineConfig(**d)


def _record(c: MessageComposition, r: GenerateResult) -> CallRecord:
    return CallRecord(
        c.stage,
        c.fingerprint(),
        r.prefill_seconds,
        r.generate_seconds_per_token,
        r.token_count,
        request=c.to_dict(),
        response=r.text,
    )


def _simulated(rec: CallRecord) -> float:
    return (rec.prefill_seconds or 0.0) + rec.generate_seconds_per_token * rec.token_count


def _model_time(calls: Sequence[CallRecord], concurrent_reason: bool) -> float:
    reason = [_simulated(c) for c in calls if c.stage is Stage.REASON]
    rest = sum(_simulated(c) for c in calls if c.stage is not Stage.REASON)
    if not reason:
        return rest
    return rest + (max(reason) if concurrent_reason else sum(reason))


def check_override(d: PlanDirective, streams: Streams) -> None:
    violations = validate_directive(d, streams.available())
    if violations:
        raise DirectiveError(violations)


def run(q: Query, streams: Streams, cfg: PipelineConfig, client: Backend) -> Trace:
    """Execute one query; failures come back as a trace with ``error`` set."""
    t0 = time.perf_counter()
    calls: list[CallRecord] = []
    directive: PlanDirective | None = None
    rationale = None
    concurrent_reason = False

    def finish(answer=None, error: Exception | None = None, kind: str | None = None) -> Trace:
        if client.measures_real_time:
            wall = time.perf_counter() - t0
        else:
            wall = _model_time(calls, concurrent_reason)
        return Trace(
            q.id,
            directive,
            tuple(calls),
            answer,
            rationale,
            wall,
            None if error is None else f"{type(error).__name__}: {error}",
            kind,
        )

    try:
        if not streams.available():
            raise topology.TopologyError("query has no usable media streams")
        if cfg.frames is not None and streams.video is not None:
            streams = Streams(streams.audio, topology.subsample_frames(streams.video, cfg.frames), streams.images)
        if cfg.plan_override is not None:
            check_override(cfg.plan_override, streams)
            directive = cfg.plan_override
        else:
            outcome = plan_call(q, streams, client, cfg.policy, cfg.decoding)
            calls.append(_record(outcome.composition, outcome.result))
            directive = outcome.directive
            if outcome.parse_error:
                log.debug("query %s: planner output unusable (%s); using fallback", q.id, outcome.parse_error)

        if directive.pathway is Pathway.ANALYTICAL:
            rationale, reason_calls = run_reasoning(
                directive, streams, q, client, k=cfg.k, params=cfg.decoding, max_in_flight=cfg.reason_in_flight
            )
            concurrent_reason = (
                directive.format is TopologyFormat.PARALLEL
                and len(reason_calls) > 1
                and (cfg.reason_in_flight or len(reason_calls)) > 1
            )
            calls.extend(_record(c.composition, c.result) for c in reason_calls)
            decision = run_analytical(rationale, q, client, template=cfg.template, params=cfg.decoding)
        else:
            decision = run_intuitive(
                directive, streams, q, client, k=cfg.k, template=cfg.template, params=cfg.decoding
            )
        calls.append(_record(decision.composition, decision.result))
        return finish(decision.answer)
    except BackendError as exc:
        return finish(error=exc, kind="backend")
    except DirectiveError as exc:
        return finish(error=exc, kind="directive")
    except ValueError as exc:
        return finish(error=exc, kind="topology")


def run_batch(
    items: Iterable[tuple[Query, Streams]],
    cfg: PipelineConfig,
    client: Backend,
    max_in_flight: int = 1,
    configs: Sequence[PipelineConfig] | None = None,
) -> list[Trace]:
    """Run independent queries with bounded concurrency; output follows input order."""
    items = list(items)
    cfgs = list(configs) if configs is not None else [cfg] * len(items)
    if max_in_flight <= 1:
        return [run(q, s, c, client) for (q, s), c in zip(items, cfgs)]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda args: run(args[0][0], args[0][1], args[1], client), zip(items, cfgs)))


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class TrajectoryRecord:
    id: str
    plan: dict[str, Any]
    reason: str | None
    decide: str
    answer: str
    messages: tuple[dict[str, Any], ...]
    query: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        stages = [m["stage"] for m in self.messages]
        order = {Stage.PLAN.value: 0, Stage.REASON.value: 1, Stage.DECIDE.value: 2}
        if [order[s] for s in stages] != sorted(order[s] for s in stages):
            raise ValueError("trajectory messages must follow plan, reason, decide order")
        has_reason = Stage.REASON.value in stages
        if has_reason != (self.plan.get("pathway") == Pathway.ANALYTICAL.value):
            raise ValueError("reason section must be present exactly on analytical trajectories")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "plan": self.plan}
        if self.reason is not None:
            d["reason"] = self.reason
        d["decide"] = self.decide
        d["answer"] = self.answer
        d["messages"] = list(self.messages)
        if self.query is not None:
            d["query"] = self.query
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> TrajectoryRecord:
        return cls(d["id"], d["plan"], d.get("reason"), d["decide"], d["answer"], tuple(d["messages"]), d.get("query"))


def export_trajectory(t: Trace, query: Query | None = None) -> TrajectoryRecord:
    if not t.ok or t.directive is None or t.answer is None:
        raise ValueError(f"trace {t.query_id!r} failed and cannot be exported")
    messages = tuple({"stage": c.stage.value, "request": c.request, "response": c.response} for c in t.calls)
    decide = next(c for c in reversed(t.calls) if c.stage is Stage.DECIDE)
    return TrajectoryRecord(
        t.query_id,
        t.directive.to_dict(),
        t.rationale.render() if t.rationale is not None else None,
        decide.response,
        t.answer.choice if t.answer.choice is not None else t.answer.raw_text,
        messages,
        query.to_dict() if query is not None else None,
    )
