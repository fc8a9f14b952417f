"""Domain types shared across the orchestration engine.

Every type here is an immutable value with a canonical JSON encoding
(``to_dict`` / ``from_dict``).  Streams validate themselves on construction;
:class:`PlanDirective` deliberately does not, because planner output has to be
representable before it is checked by :func:`validate_directive`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Union


class ModalityKind(str, Enum):
    AUDIO = "audio"
    VIDEO = "video"
    IMAGES = "images"


class TaskCategory(str, Enum):
    AUDIO_CENTRIC = "audio"
    VISUAL_CENTRIC = "visual"
    TEMPORAL_CENTRIC = "temporal"
    CROSS_MODAL = "cross"


class Pathway(str, Enum):
    INTUITIVE = "intuitive"
    ANALYTICAL = "analytical"


class TopologyFormat(str, Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"
    INTERLEAVED = "interleaved"


class Provenance(str, Enum):
    PLANNER = "planner"
    REPAIRED = "repaired"
    FALLBACK = "fallback"
    OVERRIDE = "override"


class Stage(str, Enum):
    PLAN = "plan"
    REASON = "reason"
    DECIDE = "decide"


JOINT = "joint"


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------- inputs


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    options: tuple[str, ...] | None = None
    gold: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"query {self.id!r}: text must be nonempty")
        if self.options is not None:
            object.__setattr__(self, "options", tuple(self.options))
            if len(set(self.options)) != len(self.options):
                raise ValueError(f"query {self.id!r}: option labels must be unique")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "options": list(self.options) if self.options is not None else None,
            "gold": self.gold,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Query:
        opts = d.get("options")
        return cls(d["id"], d["text"], tuple(opts) if opts is not None else None, d.get("gold"))


@dataclass(frozen=True)
class AudioStream:
    id: str
    duration: float
    payload: str

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"audio {self.id!r}: duration must be > 0, got {self.duration}")

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "duration": self.duration, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AudioStream:
        return cls(d["id"], float(d["duration"]), d["payload"])


@dataclass(frozen=True)
class Frame:
    timestamp: float
    ref: str


@dataclass(frozen=True)
class VideoStream:
    id: str
    duration: float
    frames: tuple[Frame, ...] = ()

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"video {self.id!r}: duration must be > 0, got {self.duration}")
        object.__setattr__(self, "frames", tuple(self.frames))
        prev = None
        for f in self.frames:
            if not 0 <= f.timestamp <= self.duration:
                raise ValueError(
                    f"video {self.id!r}: frame timestamp {f.timestamp} outside [0, {self.duration}]"
                )
            if prev is not None and f.timestamp <= prev:
                raise ValueError(f"video {self.id!r}: frame timestamps must be strictly increasing")
            prev = f.timestamp

    @classmethod
    def from_timestamps(cls, id: str, duration: float, timestamps: Iterable[float], path: str = "") -> VideoStream:
        base = path or id
        return cls(id, duration, tuple(Frame(float(t), f"{base}#t={float(t):.3f}") for t in timestamps))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "duration": self.duration,
            "frames": [[f.timestamp, f.ref] for f in self.frames],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> VideoStream:
        return cls(d["id"], float(d["duration"]), tuple(Frame(float(t), r) for t, r in d["frames"]))


@dataclass(frozen=True)
class ImageSet:
    id: str
    frames: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "frames": list(self.frames)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ImageSet:
        return cls(d["id"], tuple(d["frames"]))


@dataclass(frozen=True)
class Streams:
    """The media available for one query (at most one stream per kind)."""

    audio: AudioStream | None = None
    video: VideoStream | None = None
    images: ImageSet | None = None

    def available(self) -> frozenset[ModalityKind]:
        kinds = set()
        if self.audio is not None:
            kinds.add(ModalityKind.AUDIO)
        if self.video is not None:
            kinds.add(ModalityKind.VIDEO)
        if self.images is not None and self.images.frames:
            kinds.add(ModalityKind.IMAGES)
        return frozenset(kinds)

    def get(self, kind: ModalityKind) -> AudioStream | VideoStream | ImageSet | None:
        return {
            ModalityKind.AUDIO: self.audio,
            ModalityKind.VIDEO: self.video,
            ModalityKind.IMAGES: self.images,
        }[kind]

    def to_dict(self) -> dict[str, Any]:
        return {
            "audio": self.audio.to_dict() if self.audio else None,
            "video": self.video.to_dict() if self.video else None,
            "images": self.images.to_dict() if self.images else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Streams:
        return cls(
            AudioStream.from_dict(d["audio"]) if d.get("audio") else None,
            VideoStream.from_dict(d["video"]) if d.get("video") else None,
            ImageSet.from_dict(d["images"]) if d.get("images") else None,
        )


# ---------------------------------------------------------------- planning


@dataclass(frozen=True)
class PlanDirective:
    task: TaskCategory
    pathway: Pathway
    order: tuple[ModalityKind, ...]
    format: TopologyFormat
    provenance: Provenance = Provenance.PLANNER

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", tuple(self.order))

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task.value,
            "pathway": self.pathway.value,
            "modalities": [m.value for m in self.order],
            "format": self.format.value,
            "provenance": self.provenance.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PlanDirective:
        return cls(
            TaskCategory(d["task"]),
            Pathway(d["pathway"]),
            tuple(ModalityKind(m) for m in d["modalities"]),
            TopologyFormat(d["format"]),
            Provenance(d.get("provenance", Provenance.PLANNER.value)),
        )

    def with_(self, **changes: Any) -> PlanDirective:
        fields_ = {
            "task": self.task,
            "pathway": self.pathway,
            "order": self.order,
            "format": self.format,
            "provenance": self.provenance,
        }
        fields_.update(changes)
        return PlanDirective(**fields_)


def validate_directive(d: PlanDirective, available: Iterable[ModalityKind]) -> list[str]:
    """Return every violated directive invariant; an empty list means executable."""
    available = set(available)
    violations = []
    if not d.order:
        violations.append("modality order must be nonempty")
    if len(set(d.order)) != len(d.order):
        violations.append("modality order must not repeat a modality")
    if d.format is TopologyFormat.INTERLEAVED:
        if not {ModalityKind.AUDIO, ModalityKind.VIDEO} <= set(d.order):
            violations.append("Interleaved requires Audio and Video")
        if ModalityKind.IMAGES in d.order:
            violations.append("Interleaved supports only Audio and Video")
    for kind in dict.fromkeys(d.order):
        if kind not in available:
            violations.append(f"{kind.name.capitalize()} not available")
    return violations


# ---------------------------------------------------------------- compositions


@dataclass(frozen=True)
class TextPart:
    text: str

    def descriptor(self) -> str:
        return f"text:{text_hash(self.text)}"

    def to_dict(self) -> dict[str, Any]:
        return {"type": "text", "text": self.text}


@dataclass(frozen=True)
class MediaPart:
    """A span of one stream.

    Audio parts carry ``ref`` (the stream payload); video parts carry the
    frames that fall in their window (possibly none, the empty-bucket
    marker); image parts carry every image reference and no time span.
    """

    kind: ModalityKind
    source: str
    start: float | None = None
    end: float | None = None
    ref: str | None = None
    frames: tuple[str, ...] = ()
    timestamps: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "timestamps", tuple(self.timestamps))

    @property
    def is_empty_bucket(self) -> bool:
        return self.kind is ModalityKind.VIDEO and not self.frames

    def descriptor(self) -> str:
        if self.kind is ModalityKind.IMAGES:
            return f"images:{self.source}#{len(self.frames)}"
        span = f"{self.start:.3f}-{self.end:.3f}"
        if self.kind is ModalityKind.VIDEO:
            return f"video:{self.source}@{span}#{len(self.frames)}"
        return f"audio:{self.source}@{span}"

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"type": self.kind.value, "source": self.source}
        if self.start is not None:
            d["start"] = self.start
            d["end"] = self.end
        if self.ref is not None:
            d["ref"] = self.ref
        if self.kind is not ModalityKind.AUDIO:
            d["frames"] = list(self.frames)
        if self.timestamps:
            d["timestamps"] = list(self.timestamps)
        return d


MessagePart = Union[TextPart, MediaPart]


def part_from_dict(d: dict[str, Any]) -> MessagePart:
    if d["type"] == "text":
        return TextPart(d["text"])
    return MediaPart(
        ModalityKind(d["type"]),
        d["source"],
        d.get("start"),
        d.get("end"),
        d.get("ref"),
        tuple(d.get("frames", ())),
        tuple(d.get("timestamps", ())),
    )


@dataclass(frozen=True)
class MessageComposition:
    stage: Stage
    role_prompt: str
    parts: tuple[MessagePart, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("composition must contain at least one part")
        if not self.role_prompt:
            raise ValueError("composition role prompt must be nonempty")

    def fingerprint(self) -> tuple[str, ...]:
        return tuple(p.descriptor() for p in self.parts)

    def media_parts(self) -> list[MediaPart]:
        return [p for p in self.parts if isinstance(p, MediaPart)]

    def media_kinds(self) -> list[ModalityKind]:
        return [p.kind for p in self.media_parts()]

    def text(self) -> str:
        return "\n".join(p.text for p in self.parts if isinstance(p, TextPart))

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage.value,
            "system": self.role_prompt,
            "content": [p.to_dict() for p in self.parts],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MessageComposition:
        return cls(Stage(d["stage"]), d["system"], tuple(part_from_dict(p) for p in d["content"]))


# ---------------------------------------------------------------- outputs


@dataclass(frozen=True)
class Rationale:
    segments: tuple[tuple[ModalityKind | str, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple((s, t) for s, t in self.segments))

    def __bool__(self) -> bool:
        return any(t.strip() for _, t in self.segments)

    def render(self) -> str:
        from omnichain.prompts import EVIDENCE_HEADERS

        lines = []
        for source, text in self.segments:
            if source == JOINT:
                lines.append(text)
            else:
                lines.append(f"{EVIDENCE_HEADERS[ModalityKind(source)]} {text}")
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {
            "segments": [
                {"source": s.value if isinstance(s, ModalityKind) else s, "text": t}
                for s, t in self.segments
            ]
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Rationale:
        segs = []
        for seg in d["segments"]:
            src = seg["source"]
            segs.append((src if src == JOINT else ModalityKind(src), seg["text"]))
        return cls(tuple(segs))


@dataclass(frozen=True)
class Answer:
    raw_text: str
    choice: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"raw": self.raw_text, "choice": self.choice}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Answer:
        return cls(d["raw"], d.get("choice"))


@dataclass(frozen=True)
class CallRecord:
    stage: Stage
    fingerprint: tuple[str, ...]
    prefill_seconds: float | None
    generate_seconds_per_token: float
    token_count: int
    request: dict[str, Any] | None = field(default=None, compare=True)
    response: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "fingerprint", tuple(self.fingerprint))
        if self.prefill_seconds is not None and self.prefill_seconds < 0:
            raise ValueError("prefill time must be nonnegative")
        if self.generate_seconds_per_token < 0 or self.token_count < 0:
            raise ValueError("generate timing and token count must be nonnegative")

    @property
    def media_part_count(self) -> int:
        return sum(1 for d in self.fingerprint if not d.startswith("text:"))

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage.value,
            "fingerprint": list(self.fingerprint),
            "prefill_s": self.prefill_seconds,
            "gen_s_per_tok": self.generate_seconds_per_token,
            "tokens": self.token_count,
            "request": self.request,
            "response": self.response,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> CallRecord:
        return cls(
            Stage(d["stage"]),
            tuple(d["fingerprint"]),
            d["prefill_s"],
            d["gen_s_per_tok"],
            d["tokens"],
            d.get("request"),
            d.get("response", ""),
        )


@dataclass(frozen=True)
class Trace:
    query_id: str
    directive: PlanDirective | None
    calls: tuple[CallRecord, ...]
    answer: Answer | None
    rationale: Rationale | None = None
    wall_seconds: float = 0.0
    error: str | None = None
    error_kind: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "calls", tuple(self.calls))

    @property
    def ok(self) -> bool:
        return self.error is None

    def stages(self) -> list[Stage]:
        return [c.stage for c in self.calls]

    def to_dict(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "directive": self.directive.to_dict() if self.directive else None,
            "calls": [c.to_dict() for c in self.calls],
            "rationale": self.rationale.to_dict() if self.rationale is not None else None,
            "answer": self.answer.to_dict() if self.answer else None,
            "wall_s": self.wall_seconds,
            "error": self.error,
            "error_kind": self.error_kind,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Trace:
        return cls(
            d["query_id"],
            PlanDirective.from_dict(d["directive"]) if d.get("directive") else None,
            tuple(CallRecord.from_dict(c) for c in d["calls"]),
            Answer.from_dict(d["answer"]) if d.get("answer") else None,
            Rationale.from_dict(d["rationale"]) if d.get("rationale") is not None else None,
            d.get("wall_s", 0.0),
            d.get("error"),
            d.get("error_kind"),
        )


def dumps(obj: Any) -> str:
    """Canonical one-line JSON used for every JSONL artifact."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
