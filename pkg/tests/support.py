"""Shared test helpers: scripted mocks and random directive / stream generators."""

from __future__ import annotations

import hashlib
import itertools
import json
import random

from omnichain.backend import MockBackend, MockRule
from omnichain.core import (
    AudioStream,
    ImageSet,
    ModalityKind,
    Pathway,
    PlanDirective,
    Stage,
    Streams,
    TaskCategory,
    TopologyFormat,
    VideoStream,
)

A, V, I = ModalityKind.AUDIO, ModalityKind.VIDEO, ModalityKind.IMAGES


def plan_json(d: PlanDirective) -> str:
    return json.dumps(
        {"task": d.task.value, "pathway": d.pathway.value, "modalities": [m.value for m in d.order], "format": d.format.value}
    )


def scripted(plan: str | None = None, decide: str = "Yes", reason: str = "evidence", **kw) -> MockBackend:
    rules = []
    if plan is not None:
        rules.append(MockRule(plan, stage=Stage.PLAN))
    rules += [MockRule(reason, stage=Stage.REASON), MockRule(decide)]
    return MockBackend(rules, **kw)


def random_streams(rng: random.Random, with_images: bool = True) -> Streams:
    dur = round(rng.uniform(0.5, 120.0), 3)
    n = rng.randint(0, 40)
    ts = sorted({round(rng.uniform(0, dur), 3) for _ in range(n)})
    images = ImageSet("img", tuple(f"img{i}.jpg" for i in range(rng.randint(1, 4)))) if with_images else None
    return Streams(AudioStream("a", dur, "a.wav"), VideoStream.from_timestamps("v", dur, ts, "v.mp4"), images)


def all_valid_directives(available=(A, V, I)) -> list[PlanDirective]:
    out = []
    kinds = list(available)
    for r in range(1, len(kinds) + 1):
        for order in itertools.permutations(kinds, r):
            for fmt in TopologyFormat:
                if fmt is TopologyFormat.INTERLEAVED and set(order) != {A, V}:
                    continue
                for pw in Pathway:
                    for task in TaskCategory:
                        out.append(PlanDirective(task, pw, order, fmt))
    return out


def unit_hash(*parts) -> float:
    """Deterministic uniform value in [0, 1) from arbitrary parts."""
    h = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "big") / 2**64
