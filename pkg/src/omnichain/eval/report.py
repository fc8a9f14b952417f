"""Report emitters: CSV for machines, Markdown for people, PNG figures alongside.

Column order is fixed per report so downstream diffs stay stable.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from omnichain.eval.harness import DensitySweep, PermutationReport  # noqa: E402
from omnichain.eval.latency import LatencyRow  # noqa: E402
from omnichain.eval.metrics import ConflictReport  # noqa: E402

ACCURACY_COLUMNS = ("mode", "n", "correct", "unresolved", "failed", "accuracy")
CONFLICT_COLUMNS = ("n", "n_conflict", "neq_rate", "align_a", "align_v", "error_a", "error_v")
SWEEP_COLUMNS = ("series", "k", "accuracy", "yes_rate")
LATENCY_COLUMNS = (
    "stage", "calls",
    "prefill_mean", "prefill_p50", "prefill_p95",
    "gen_mean", "gen_p50", "gen_p95",
)

FIGSIZE = (6.0, 3.8)
STYLE = {
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _fmt(v: Any) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def write_csv(rows: Sequence[dict], columns: Sequence[str], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if row.get(c) is None else row.get(c) for c in columns])
    return path


def markdown_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(row.get(c)) for c in columns) + " |")
    return "\n".join(lines)


def write_markdown(rows: Sequence[dict], columns: Sequence[str], path: Path, title: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# {title}\n\n{markdown_table(rows, columns)}\n", encoding="utf-8")
    return path


def emit(rows: Sequence[dict], columns: Sequence[str], out: Path, stem: str, title: str) -> list[Path]:
    return [write_csv(rows, columns, out / f"{stem}.csv"), write_markdown(rows, columns, out / f"{stem}.md", title)]


# ---------------------------------------------------------------- figures


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(sweep: DensitySweep, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ks = [p.k for p in sweep.points]
        ax.plot(ks, [p.accuracy for p in sweep.points], "o-", color="C0", label="interleaved accuracy")
        ax.axhline(sweep.baseline.accuracy, color="C0", ls="--", lw=1, label="sequential accuracy")
        yr = [p.yes_rate for p in sweep.points]
        if all(y is not None for y in yr):
            ax.plot(ks, yr, "s-", color="C3", label="interleaved yes-rate")
        if sweep.baseline.yes_rate is not None:
            ax.axhline(sweep.baseline.yes_rate, color="C3", ls="--", lw=1, label="sequential yes-rate")
        ax.set_xlabel("interleave density k")
        ax.set_ylabel("fraction")
        ax.set_ylim(0, 1.05)
        ax.set_xticks(ks)
        ax.legend(fontsize=7, loc="best")
        return _save(fig, path)


def plot_permutation(report: PermutationReport, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        cols = list(report.columns)
        width = 0.8 / len(report.rows)
        for i, (order, row) in enumerate(zip(report.orders, report.rows)):
            xs = [j + i * width for j in range(len(cols))]
            ax.bar(xs, [row[c] for c in cols], width, label=" -> ".join(m.value for m in order))
        ax.set_xticks([j + 0.4 - width / 2 for j in range(len(cols))])
        ax.set_xticklabels(cols)
        ax.set_ylabel("accuracy")
        ax.set_ylim(0, 1.05)
        ax.legend(fontsize=7)
        return _save(fig, path)


def plot_latency(rows: Sequence[LatencyRow], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=FIGSIZE)
        names = [r.stage for r in rows]
        a1.bar(names, [r.prefill.mean or 0.0 for r in rows], color="C0")
        a1.set_title("prefill (s)")
        a2.bar(names, [r.per_token.mean or 0.0 for r in rows], color="C1")
        a2.set_title("generate (s/token)")
        return _save(fig, path)


# ---------------------------------------------------------------- bundles


def emit_conflict(report: ConflictReport, out: Path) -> list[Path]:
    return emit([report.to_row()], CONFLICT_COLUMNS, out, "conflict", "Modality conflict (fractions of A != V subset)")


def emit_permutation(report: PermutationReport, out: Path) -> list[Path]:
    cols = ("order",) + report.columns
    return emit(report.table(), cols, out, "permutation", "Accuracy by modality order") + [
        plot_permutation(report, out / "permutation.png")
    ]


def emit_sweep(sweep: DensitySweep, out: Path) -> list[Path]:
    return emit(sweep.table(), SWEEP_COLUMNS, out, "sweep", "Interleave density sweep") + [
        plot_sweep(sweep, out / "sweep.png")
    ]


def emit_latency(rows: Sequence[LatencyRow], out: Path) -> list[Path]:
    return emit([r.to_row() for r in rows], LATENCY_COLUMNS, out, "latency", "Latency by stage") + [
        plot_latency(rows, out / "latency.png")
    ]
