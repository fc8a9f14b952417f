"""JSONL dataset manifests.

One record per line::

    {"id": "q1", "query": "Is the dog barking?", "options": ["Yes", "No"], "gold": "Yes",
     "tag": "exist",
     "audio": {"path": "media/q1.wav", "duration": 8.0},
     "video": {"path": "media/q1.mp4", "duration": 8.0, "timestamps": [0.5, 1.5, ...]},
     "images": ["media/q1_0.jpg"]}

Media paths are relative to the manifest root (the manifest's directory unless
given explicitly).  Nothing is decoded; frames are addressed by timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from omnichain.core import AudioStream, ImageSet, Query, Streams, VideoStream


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRecord:
    query: Query
    streams: Streams
    tag: str | None = None
    media_paths: tuple[Path, ...] = ()

    @property
    def id(self) -> str:
        return self.query.id


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    root: Path = Path(".")

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise ManifestError(f"duplicate record id {r.id!r}")
            seen.add(r.id)
            if r.query.gold is None or not r.query.options or r.query.gold not in r.query.options:
                raise ManifestError(f"record {r.id!r}: gold label must be one of its options")

    def __iter__(self) -> Iterator[ManifestRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def by_id(self) -> dict[str, ManifestRecord]:
        return {r.id: r for r in self.records}

    def tags(self) -> list[str]:
        return list(dict.fromkeys(r.tag or "untagged" for r in self.records))

    def missing_media(self) -> list[Path]:
        return [p for r in self.records for p in r.media_paths if not p.exists()]


def parse_record(d: dict[str, Any], root: Path) -> ManifestRecord:
    rid = str(d["id"])
    opts = d.get("options")
    query = Query(rid, d["query"], tuple(opts) if opts is not None else None, d.get("gold"))
    paths: list[Path] = []
    audio = video = images = None
    if d.get("audio"):
        a = d["audio"]
        p = root / a["path"]
        paths.append(p)
        audio = AudioStream(f"{rid}/audio", float(a["duration"]), str(p))
    if d.get("video"):
        v = d["video"]
        p = root / v["path"]
        paths.append(p)
        video = VideoStream.from_timestamps(f"{rid}/video", float(v["duration"]), v.get("timestamps", []), str(p))
    if d.get("images"):
        ps = [root / x for x in d["images"]]
        paths += ps
        images = ImageSet(f"{rid}/images", tuple(str(x) for x in ps))
    return ManifestRecord(query, Streams(audio, video, images), d.get("tag"), tuple(paths))


def load_manifest(path: str | Path, root: str | Path | None = None) -> DatasetManifest:
    path = Path(path)
    base = Path(root) if root is not None else path.parent
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(parse_record(json.loads(line), base))
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    return DatasetManifest(tuple(records), base)
