"""Accuracy, modality-conflict and yes-rate metrics over prediction sets.

Predictions map record id to a resolved option label, or ``None`` for an
unresolved answer.  Unresolved always counts as incorrect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from omnichain.decider import normalize
from omnichain.eval.manifest import DatasetManifest


@dataclass(frozen=True)
class PredictionSet:
    mode: str
    labels: Mapping[str, str | None] = field(default_factory=dict)

    def __getitem__(self, rid: str) -> str | None:
        return self.labels[rid]

    def keys(self):
        return self.labels.keys()

    def to_dict(self) -> dict:
        return {"mode": self.mode, "labels": dict(self.labels)}


def _check_keys(p: PredictionSet, manifest: DatasetManifest) -> None:
    if set(p.keys()) != set(manifest.ids):
        missing = sorted(set(manifest.ids) - set(p.keys()))
        extra = sorted(set(p.keys()) - set(manifest.ids))
        raise KeyError(f"prediction set {p.mode!r} misaligned with manifest (missing={missing}, extra={extra})")


def accuracy(p: PredictionSet, manifest: DatasetManifest) -> float:
    _check_keys(p, manifest)
    if not len(manifest):
        raise ValueError("accuracy over an empty manifest is undefined")
    correct = sum(1 for r in manifest if p[r.id] is not None and p[r.id] == r.query.gold)
    return correct / len(manifest)


@dataclass(frozen=True)
class ConflictReport:
    """Align/Error fields are fractions of the conflict subset, None when it is empty."""

    n: int
    n_conflict: int
    neq_rate: float
    align_a: float | None
    align_v: float | None
    error_a: float | None
    error_v: float | None

    def to_row(self) -> dict:
        return {
            "n": self.n,
            "n_conflict": self.n_conflict,
            "neq_rate": self.neq_rate,
            "align_a": self.align_a,
            "align_v": self.align_v,
            "error_a": self.error_a,
            "error_v": self.error_v,
        }


def conflict_metrics(
    audio: PredictionSet, visual: PredictionSet, joint: PredictionSet, manifest: DatasetManifest
) -> ConflictReport:
    for p in (audio, visual, joint):
        _check_keys(p, manifest)
    n = len(manifest)
    conflict = [r for r in manifest if audio[r.id] != visual[r.id]]
    c = len(conflict)
    if c == 0:
        return ConflictReport(n, 0, 0.0, None, None, None, None)
    align_a = align_v = error_a = error_v = 0
    for r in conflict:
        a, v, j, g = audio[r.id], visual[r.id], joint[r.id], r.query.gold
        if j == a:
            align_a += 1
            if a != g and v == g:
                error_a += 1
        if j == v:
            align_v += 1
            if v != g and a == g:
                error_v += 1
    return ConflictReport(n, c, c / n, align_a / c, align_v / c, error_a / c, error_v / c)


def is_binary(options) -> bool:
    return options is not None and sorted(normalize(o) for o in options) == ["no", "yes"]


def yes_rate(p: PredictionSet, manifest: DatasetManifest | None = None) -> float | None:
    """Share of resolved predictions that say Yes; None when nothing resolved."""
    if manifest is not None:
        _check_keys(p, manifest)
        bad = [r.id for r in manifest if not is_binary(r.query.options)]
        if bad:
            raise ValueError(f"yes_rate needs Yes/No questions; non-binary records: {bad[:5]}")
    resolved = [v for v in p.labels.values() if v is not None]
    for v in resolved:
        if normalize(v) not in ("yes", "no"):
            raise ValueError(f"yes_rate needs Yes/No predictions, got {v!r}")
    if not resolved:
        return None
    return sum(1 for v in resolved if normalize(v) == "yes") / len(resolved)
