"""Batch runs over a manifest and the diagnostics built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from omnichain.backend import Backend
from omnichain.core import (
    ModalityKind,
    Pathway,
    PlanDirective,
    Provenance,
    TaskCategory,
    TopologyFormat,
    Trace,
)
from omnichain.eval.manifest import DatasetManifest
from omnichain.eval.metrics import PredictionSet, accuracy, yes_rate
from omnichain.pipeline import PipelineConfig, run_batch

A, V = ModalityKind.AUDIO, ModalityKind.VIDEO

_TASK_FOR_FORMAT = {
    TopologyFormat.SEQUENTIAL: TaskCategory.CROSS_MODAL,
    TopologyFormat.INTERLEAVED: TaskCategory.TEMPORAL_CENTRIC,
}


@dataclass(frozen=True)
class RunMode:
    """``com`` plans per record; every other kind pins a fixed directive."""

    kind: str
    order: tuple[ModalityKind, ...] = ()
    format: TopologyFormat = TopologyFormat.SEQUENTIAL
    pathway: Pathway = Pathway.INTUITIVE

    @classmethod
    def com(cls) -> RunMode:
        return cls("com")

    @classmethod
    def audio_only(cls) -> RunMode:
        return cls("audio", (A,))

    @classmethod
    def visual_only(cls) -> RunMode:
        return cls("visual", (V,))

    @classmethod
    def fixed(cls, order: Sequence[ModalityKind], format: TopologyFormat, pathway: Pathway = Pathway.INTUITIVE) -> RunMode:
        return cls("fixed", tuple(order), format, pathway)

    @property
    def label(self) -> str:
        if self.kind == "com":
            return "CoM"
        if self.kind == "audio":
            return "AudioOnly"
        if self.kind == "visual":
            return "VisualOnly"
        arrow = "->".join(m.value for m in self.order)
        return f"Fixed[{arrow},{self.format.value},{self.pathway.value}]"

    def directive(self) -> PlanDirective | None:
        if self.kind == "com":
            return None
        if self.kind == "audio":
            return PlanDirective(TaskCategory.AUDIO_CENTRIC, Pathway.INTUITIVE, (A,), TopologyFormat.SEQUENTIAL, Provenance.OVERRIDE)
        if self.kind == "visual":
            return PlanDirective(TaskCategory.VISUAL_CENTRIC, Pathway.INTUITIVE, (V,), TopologyFormat.SEQUENTIAL, Provenance.OVERRIDE)
        task = _TASK_FOR_FORMAT.get(
            self.format, TaskCategory.AUDIO_CENTRIC if self.order[:1] == (A,) else TaskCategory.VISUAL_CENTRIC
        )
        return PlanDirective(task, self.pathway, self.order, self.format, Provenance.OVERRIDE)


@dataclass(frozen=True)
class SuiteResult:
    predictions: PredictionSet
    traces: tuple[Trace, ...]

    @property
    def failures(self) -> list[Trace]:
        return [t for t in self.traces if not t.ok]


def run_suite(
    manifest: DatasetManifest, mode: RunMode, cfg: PipelineConfig, client: Backend, max_in_flight: int = 1
) -> SuiteResult:
    cfg = cfg.with_(plan_override=mode.directive()) if mode.kind != "com" else cfg
    traces = run_batch(((r.query, r.streams) for r in manifest), cfg, client, max_in_flight)
    labels = {t.query_id: (t.answer.choice if t.ok and t.answer else None) for t in traces}
    return SuiteResult(PredictionSet(mode.label, labels), tuple(traces))


# ---------------------------------------------------------------- permutation


def tag_accuracy(p: PredictionSet, manifest: DatasetManifest) -> dict[str, float]:
    out = {}
    for tag in manifest.tags():
        recs = [r for r in manifest if (r.tag or "untagged") == tag]
        out[tag] = sum(1 for r in recs if p[r.id] is not None and p[r.id] == r.query.gold) / len(recs)
    out["all"] = accuracy(p, manifest)
    return out


@dataclass(frozen=True)
class PermutationReport:
    orders: tuple[tuple[ModalityKind, ...], ...]
    columns: tuple[str, ...]
    rows: tuple[dict[str, float], ...]

    def table(self) -> list[dict]:
        return [
            {"order": " -> ".join(m.value for m in order), **row} for order, row in zip(self.orders, self.rows)
        ]


def permutation_report(
    manifest: DatasetManifest,
    orders: Sequence[Sequence[ModalityKind]],
    cfg: PipelineConfig,
    client: Backend,
    max_in_flight: int = 1,
) -> PermutationReport:
    if len(orders) < 2:
        raise ValueError("a permutation report needs at least two orders")
    rows = []
    for order in orders:
        res = run_suite(manifest, RunMode.fixed(order, TopologyFormat.SEQUENTIAL), cfg, client, max_in_flight)
        rows.append(tag_accuracy(res.predictions, manifest))
    return PermutationReport(tuple(tuple(o) for o in orders), tuple(manifest.tags()) + ("all",), tuple(rows))


# ---------------------------------------------------------------- density sweep


@dataclass(frozen=True)
class SweepPoint:
    k: int | None
    accuracy: float
    yes_rate: float | None


@dataclass(frozen=True)
class DensitySweep:
    baseline: SweepPoint
    points: tuple[SweepPoint, ...]

    def table(self) -> list[dict]:
        rows = [{"series": "sequential", "k": "", "accuracy": self.baseline.accuracy, "yes_rate": self.baseline.yes_rate}]
        rows += [{"series": "interleaved", "k": p.k, "accuracy": p.accuracy, "yes_rate": p.yes_rate} for p in self.points]
        return rows


def density_sweep(
    manifest: DatasetManifest,
    densities: Sequence[int],
    cfg: PipelineConfig,
    client: Backend,
    max_in_flight: int = 1,
) -> DensitySweep:
    if not densities or any(k < 1 for k in densities):
        raise ValueError("densities must be a nonempty list of integers >= 1")
    base = run_suite(manifest, RunMode.fixed((A, V), TopologyFormat.SEQUENTIAL), cfg, client, max_in_flight)
    # yes_rate validates that every record is a Yes/No question.
    baseline = SweepPoint(None, accuracy(base.predictions, manifest), yes_rate(base.predictions, manifest))
    points = []
    for k in densities:
        res = run_suite(manifest, RunMode.fixed((A, V), TopologyFormat.INTERLEAVED), cfg.with_(k=k), client, max_in_flight)
        points.append(SweepPoint(k, accuracy(res.predictions, manifest), yes_rate(res.predictions, manifest)))
    return DensitySweep(baseline, tuple(points))
