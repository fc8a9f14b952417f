"""Pure builders that turn a modality order and format into compositions.

Nothing here talks to a backend.  Segmentation uses equal time windows with
the last window absorbing the floating-point remainder, so concatenating the
windows reproduces ``[0, duration]`` exactly.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from omnichain.core import (
    AudioStream,
    ImageSet,
    MediaPart,
    MessageComposition,
    MessagePart,
    ModalityKind,
    Stage,
    Streams,
    TextPart,
    VideoStream,
)
from omnichain.prompts import BLOCK_SENTINEL

DEFAULT_K = 4
DURATION_TOLERANCE = 0.050


class TopologyError(ValueError):
    """A composition cannot be built from the given streams."""


@dataclass(frozen=True)
class SegmentPlan:
    k: int
    boundaries: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if self.k < 1 or len(self.boundaries) != self.k:
            raise ValueError("segment plan needs k >= 1 windows")
        if self.boundaries[0][0] != 0.0:
            raise ValueError("segment plan must start at 0")
        for (_, e), (s, _) in zip(self.boundaries, self.boundaries[1:]):
            if e != s:
                raise ValueError("segment windows must be contiguous")

    @property
    def duration(self) -> float:
        return self.boundaries[-1][1]

    @property
    def starts(self) -> list[float]:
        return [s for s, _ in self.boundaries]

    @classmethod
    def equal(cls, duration: float, k: int) -> SegmentPlan:
        if k < 1:
            raise TopologyError(f"segment count must be >= 1, got {k}")
        if not duration > 0:
            raise TopologyError(f"duration must be > 0, got {duration}")
        edges = [i * (duration / k) for i in range(k)] + [duration]
        return cls(k, tuple((edges[i], edges[i + 1]) for i in range(k)))


def segment_audio(a: AudioStream, k: int) -> list[MediaPart]:
    plan = SegmentPlan.equal(a.duration, k)
    return [MediaPart(ModalityKind.AUDIO, a.id, s, e, ref=a.payload) for s, e in plan.boundaries]


def segment_video(v: VideoStream, plan: SegmentPlan, tolerance: float = DURATION_TOLERANCE) -> list[MediaPart]:
    """Bucket frames into the plan's windows (half-open, last window closed).

    Windows without frames come back as empty-bucket parts so that callers can
    keep strict audio/video alternation.
    """
    if abs(plan.duration - v.duration) > tolerance:
        raise TopologyError(
            f"segment plan covers {plan.duration:.3f}s but video {v.id!r} lasts {v.duration:.3f}s"
        )
    starts = plan.starts
    buckets: list[list] = [[] for _ in range(plan.k)]
    for f in v.frames:
        i = min(max(bisect_right(starts, f.timestamp) - 1, 0), plan.k - 1)
        buckets[i].append(f)
    parts = []
    for i, (s, e) in enumerate(plan.boundaries):
        s = min(s, v.duration)
        e = v.duration if i == plan.k - 1 else min(e, v.duration)
        parts.append(
            MediaPart(
                ModalityKind.VIDEO,
                v.id,
                s,
                e,
                frames=tuple(f.ref for f in buckets[i]),
                timestamps=tuple(f.timestamp for f in buckets[i]),
            )
        )
    return parts


def interleave(
    a: AudioStream, v: VideoStream, k: int = DEFAULT_K, tolerance: float = DURATION_TOLERANCE
) -> list[MediaPart]:
    """Return ``(A_1, V_1, ..., A_k, V_k)``."""
    if k < 1:
        raise TopologyError(f"interleave density must be >= 1, got {k}")
    if abs(a.duration - v.duration) > tolerance:
        raise TopologyError(
            f"audio {a.id!r} ({a.duration:.3f}s) and video {v.id!r} ({v.duration:.3f}s) "
            f"differ by more than {tolerance * 1000:.0f} ms"
        )
    plan = SegmentPlan.equal(a.duration, k)
    audio = [MediaPart(ModalityKind.AUDIO, a.id, s, e, ref=a.payload) for s, e in plan.boundaries]
    video = segment_video(v, plan, tolerance)
    out: list[MediaPart] = []
    for pa, pv in zip(audio, video):
        out += [pa, pv]
    return out


def subsample_frames(v: VideoStream, n: int) -> VideoStream:
    """Keep ``n`` frames spread evenly over the original list."""
    if n < 1:
        raise TopologyError(f"frame count must be >= 1, got {n}")
    if n >= len(v.frames):
        return v
    idx = np.unique(np.linspace(0, len(v.frames) - 1, n).round().astype(int))
    return VideoStream(v.id, v.duration, tuple(v.frames[i] for i in idx))


def whole_part(kind: ModalityKind, streams: Streams) -> MediaPart:
    stream = streams.get(kind)
    if stream is None:
        raise TopologyError(f"no {kind.value} stream available")
    if isinstance(stream, AudioStream):
        return MediaPart(kind, stream.id, 0.0, stream.duration, ref=stream.payload)
    if isinstance(stream, VideoStream):
        return MediaPart(
            kind,
            stream.id,
            0.0,
            stream.duration,
            frames=tuple(f.ref for f in stream.frames),
            timestamps=tuple(f.timestamp for f in stream.frames),
        )
    assert isinstance(stream, ImageSet)
    if not stream.frames:
        raise TopologyError(f"image set {stream.id!r} is empty")
    return MediaPart(kind, stream.id, frames=stream.frames)


def _check_order(order: Sequence[ModalityKind]) -> None:
    if not order:
        raise TopologyError("modality order is empty")
    if len(set(order)) != len(order):
        raise TopologyError("modality order repeats a modality")


def build_sequential(
    order: Sequence[ModalityKind], streams: Streams, query_text: str, *, prompt: str, stage: Stage
) -> MessageComposition:
    _check_order(order)
    parts: list[MessagePart] = [whole_part(k, streams) for k in order]
    parts.append(TextPart(query_text))
    return MessageComposition(stage, prompt, tuple(parts))


def build_parallel(
    order: Sequence[ModalityKind], streams: Streams, query_text: str, *, prompt: str, stage: Stage
) -> list[MessageComposition]:
    _check_order(order)
    return [
        MessageComposition(stage, prompt, (whole_part(k, streams), TextPart(query_text))) for k in order
    ]


def build_interleaved(
    streams: Streams,
    query_text: str,
    k: int = DEFAULT_K,
    *,
    prompt: str,
    stage: Stage,
    tolerance: float = DURATION_TOLERANCE,
) -> MessageComposition:
    if streams.audio is None or streams.video is None:
        raise TopologyError("interleaved format needs both an audio and a video stream")
    parts: list[MessagePart] = list(interleave(streams.audio, streams.video, k, tolerance))
    parts.append(TextPart(query_text))
    return MessageComposition(stage, prompt, tuple(parts))


def build_blocks(
    order: Sequence[ModalityKind], streams: Streams, query_text: str, *, prompt: str, stage: Stage
) -> MessageComposition:
    """Parallel-format rendering inside a single call: delimited independent blocks."""
    _check_order(order)
    parts: list[MessagePart] = []
    for i, kind in enumerate(order):
        if i:
            parts.append(TextPart(BLOCK_SENTINEL))
        parts.append(whole_part(kind, streams))
    parts.append(TextPart(query_text))
    return MessageComposition(stage, prompt, tuple(parts))
