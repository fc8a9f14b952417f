"""Chain-of-modality orchestration for omni-modal language models.

Plan the modality set, order and topology for a query, optionally extract
per-topology evidence, then decide; plus the diagnostics used to measure
fusion bias (modality ablations, conflict metrics, permutation and
interleave-density sweeps, latency).
"""

__version__ = "0.1.0"
