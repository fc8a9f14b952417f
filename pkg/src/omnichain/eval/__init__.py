"""Evaluation harness: manifests, metrics, ablations and diagnostics."""

from omnichain.eval.harness import (
    DensitySweep,
    PermutationReport,
    RunMode,
    SuiteResult,
    SweepPoint,
    density_sweep,
    permutation_report,
    run_suite,
    tag_accuracy,
)
from omnichain.eval.latency import LatencyRow, Stats, latency_report
from omnichain.eval.manifest import DatasetManifest, ManifestError, ManifestRecord, load_manifest, parse_record
from omnichain.eval.metrics import ConflictReport, PredictionSet, accuracy, conflict_metrics, yes_rate

__all__ = [
    "ConflictReport",
    "DatasetManifest",
    "DensitySweep",
    "LatencyRow",
    "ManifestError",
    "ManifestRecord",
    "PermutationReport",
    "PredictionSet",
    "RunMode",
    "Stats",
    "SuiteResult",
    "SweepPoint",
    "accuracy",
    "conflict_metrics",
    "density_sweep",
    "latency_report",
    "load_manifest",
    "parse_record",
    "permutation_report",
    "run_suite",
    "tag_accuracy",
    "yes_rate",
]
