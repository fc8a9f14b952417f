from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from omnichain.core import Stage, Trace


@dataclass(frozen=True)
class Stats:
    n: int
    mean: float | None
    p50: float | None
    p95: float | None

    @classmethod
    def of(cls, xs: Sequence[float]) -> Stats:
        if not xs:
            return cls(0, None, None, None)
        arr = np.asarray(xs, dtype=float)
        return cls(len(arr), float(arr.mean()), float(np.percentile(arr, 50)), float(np.percentile(arr, 95)))


@dataclass(frozen=True)
class LatencyRow:
    stage: str
    calls: int
    prefill: Stats
    per_token: Stats

    def to_row(self) -> dict:
        return {
            "stage": self.stage,
            "calls": self.calls,
            "prefill_mean": self.prefill.mean,
            "prefill_p50": self.prefill.p50,
            "prefill_p95": self.prefill.p95,
            "gen_mean": self.per_token.mean,
            "gen_p50": self.per_token.p50,
            "gen_p95": self.per_token.p95,
        }


def latency_report(traces: Iterable[Trace]) -> list[LatencyRow]:
    """Per-stage and overall prefill / per-token statistics.

    Calls without a prefill measurement (non-streaming backends) are left out
    of the prefill columns only.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("latency report needs at least one trace")
    calls = [c for t in traces for c in t.calls]
    rows = []
    for name, group in [(s.value, [c for c in calls if c.stage is s]) for s in Stage] + [("all", calls)]:
        if not group and name != "all":
            continue
        rows.append(
            LatencyRow(
                name,
                len(group),
                Stats.of([c.prefill_seconds for c in group if c.prefill_seconds is not None]),
                Stats.of([c.generate_seconds_per_token for c in group if c.token_count > 0]),
            )
        )
    return rows
