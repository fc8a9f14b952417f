"""Planning: one text-only call that maps a query to a :class:`PlanDirective`."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable

from omnichain import prompts
from omnichain.backend import Backend, DecodingParams, GenerateResult
from omnichain.core import (
    MessageComposition,
    ModalityKind,
    Pathway,
    PlanDirective,
    Provenance,
    Query,
    Stage,
    Streams,
    TaskCategory,
    TextPart,
    TopologyFormat,
    validate_directive,
)


class PlanParseError(ValueError):
    pass


class PolicyMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass(frozen=True)
class PlannerPolicy:
    mode: PolicyMode = PolicyMode.LENIENT
    repair_format_by_task: bool = True


def _key(s: str) -> str:
    return re.sub(r"[^a-z]", "", s.casefold())


_TASKS = {
    "audio": TaskCategory.AUDIO_CENTRIC,
    "audiocentric": TaskCategory.AUDIO_CENTRIC,
    "visual": TaskCategory.VISUAL_CENTRIC,
    "visualcentric": TaskCategory.VISUAL_CENTRIC,
    "temporal": TaskCategory.TEMPORAL_CENTRIC,
    "temporalcentric": TaskCategory.TEMPORAL_CENTRIC,
    "cross": TaskCategory.CROSS_MODAL,
    "crossmodal": TaskCategory.CROSS_MODAL,
}
_PATHWAYS = {p.value: p for p in Pathway}
_FORMATS = {f.value: f for f in TopologyFormat}
_MODALITIES = {
    "audio": ModalityKind.AUDIO,
    "video": ModalityKind.VIDEO,
    "visual": ModalityKind.VIDEO,
    "images": ModalityKind.IMAGES,
    "image": ModalityKind.IMAGES,
    "frames": ModalityKind.IMAGES,
}

CANONICAL_FORMAT = {
    TaskCategory.TEMPORAL_CENTRIC: TopologyFormat.INTERLEAVED,
    TaskCategory.AUDIO_CENTRIC: TopologyFormat.PARALLEL,
    TaskCategory.VISUAL_CENTRIC: TopologyFormat.PARALLEL,
    TaskCategory.CROSS_MODAL: TopologyFormat.SEQUENTIAL,
}


def canonical_format(task: TaskCategory) -> TopologyFormat:
    return CANONICAL_FORMAT[task]


def build_plan_prompt(q: Query, available: Iterable[ModalityKind]) -> MessageComposition:
    available = set(available)
    if not available:
        raise ValueError("planning needs at least one available modality")
    return MessageComposition(
        Stage.PLAN, prompts.plan_prompt(), (TextPart(prompts.render_plan_request(q, available)),)
    )


def _first_object(text: str) -> dict[str, Any]:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    raise PlanParseError("no JSON object found in planner output")


def _lookup(table: dict[str, Any], value: Any, field: str) -> Any:
    if not isinstance(value, str) or _key(value) not in table:
        raise PlanParseError(f"unknown {field} value {value!r}")
    return table[_key(value)]


def parse_plan(text: str) -> PlanDirective:
    obj = _first_object(text)
    for name in ("task", "pathway", "modalities", "format"):
        if name not in obj:
            raise PlanParseError(f"planner output is missing field {name!r}")
    mods = obj["modalities"]
    if not isinstance(mods, list):
        raise PlanParseError("modalities must be a list")
    return PlanDirective(
        _lookup(_TASKS, obj["task"], "task"),
        _lookup(_PATHWAYS, obj["pathway"], "pathway"),
        tuple(_lookup(_MODALITIES, m, "modality") for m in mods),
        _lookup(_FORMATS, obj["format"], "format"),
        Provenance.PLANNER,
    )


def fallback_directive(available: Iterable[ModalityKind]) -> PlanDirective:
    available = set(available)
    if not available:
        raise ValueError("fallback needs at least one available modality")
    order = tuple(k for k in (ModalityKind.AUDIO, ModalityKind.VIDEO) if k in available)
    if not order:
        order = (ModalityKind.IMAGES,)
    return PlanDirective(
        TaskCategory.CROSS_MODAL, Pathway.INTUITIVE, order, TopologyFormat.SEQUENTIAL, Provenance.FALLBACK
    )


def validate_and_repair(
    d: PlanDirective, available: Iterable[ModalityKind], policy: PlannerPolicy = PlannerPolicy()
) -> PlanDirective:
    available = set(available)
    if policy.mode is PolicyMode.STRICT:
        return fallback_directive(available) if validate_directive(d, available) else d

    repaired = d
    order = tuple(k for k in dict.fromkeys(d.order) if k in available)
    if order != d.order:
        repaired = repaired.with_(order=order, provenance=Provenance.REPAIRED)
    canon = canonical_format(repaired.task)
    if policy.repair_format_by_task and repaired.format is not canon:
        repaired = repaired.with_(format=canon, provenance=Provenance.REPAIRED)
    if validate_directive(repaired, available):
        return fallback_directive(available)
    return repaired


@dataclass(frozen=True)
class PlanOutcome:
    directive: PlanDirective
    composition: MessageComposition
    result: GenerateResult
    parse_error: str | None = None


def plan_call(
    q: Query,
    streams: Streams,
    client: Backend,
    policy: PlannerPolicy = PlannerPolicy(),
    params: DecodingParams | None = None,
) -> PlanOutcome:
    """Plan and keep the raw call, which the pipeline turns into a trace record."""
    available = streams.available()
    if not available:
        raise ValueError("planning needs at least one stream")
    comp = build_plan_prompt(q, available)
    result = client.generate(comp, params)
    try:
        parsed = parse_plan(result.text)
    except PlanParseError as exc:
        return PlanOutcome(fallback_directive(available), comp, result, str(exc))
    return PlanOutcome(validate_and_repair(parsed, available, policy), comp, result)


def plan(
    q: Query,
    streams: Streams,
    client: Backend,
    policy: PlannerPolicy = PlannerPolicy(),
    params: DecodingParams | None = None,
) -> PlanDirective:
    return plan_call(q, streams, client, policy, params).directive
