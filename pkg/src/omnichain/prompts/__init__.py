"""Role prompts (plan / reason / decide) and query rendering.

The prompt bodies live next to this file as plain-text assets so they can be
edited without touching code.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from omnichain.core import ModalityKind, Query

EVIDENCE_HEADERS = {
    ModalityKind.AUDIO: "[AUDIO EVIDENCE]",
    ModalityKind.VIDEO: "[VISUAL EVIDENCE]",
    ModalityKind.IMAGES: "[FRAME EVIDENCE]",
}

# Separates modality blocks when an intuitive parallel plan is rendered in one call.
BLOCK_SENTINEL = "<<<END OF MODALITY BLOCK>>>"

TEMPLATES = ("open", "mc")

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@lru_cache(maxsize=None)
def load(name: str, directory: str | None = None) -> str:
    """Load a prompt asset by stem (``plan``, ``reason``, ``decide_open``, ``decide_mc``)."""
    if directory is not None:
        return (Path(directory) / f"{name}.txt").read_text(encoding="utf-8").strip()
    return resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8").strip()


def plan_prompt(directory: str | None = None) -> str:
    return load("plan", directory)


def reason_prompt(directory: str | None = None) -> str:
    return load("reason", directory)


def decide_prompt(template: str = "open", directory: str | None = None) -> str:
    if template not in TEMPLATES:
        raise ValueError(f"unknown prompt template {template!r}; expected one of {TEMPLATES}")
    return load(f"decide_{template}", directory)


def option_letter(i: int) -> str:
    return _LETTERS[i] if i < len(_LETTERS) else str(i + 1)


def render_query(q: Query, template: str = "open") -> str:
    if not q.options:
        return f"Question: {q.text}"
    if template == "mc":
        lines = [f"Question: {q.text}"]
        lines += [f"{option_letter(i)}. {opt}" for i, opt in enumerate(q.options)]
        return "\n".join(lines)
    return f"Question: {q.text}\nOptions: " + "; ".join(q.options)


def render_plan_request(q: Query, available: Iterable[ModalityKind]) -> str:
    order = [k for k in ModalityKind if k in set(available)]
    return (
        "Available modalities: "
        + ", ".join(k.value for k in order)
        + "\n"
        + render_query(q, "open")
    )
