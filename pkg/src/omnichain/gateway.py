"""HTTP gateway exposing the pipeline.

``POST /v1/infer`` takes a query plus server-local media references and
returns the answer and the directive that produced it.  At most ``cap``
pipelines run at once; further requests wait for a slot.  On shutdown the app
waits for in-flight requests to finish.
"""

from __future__ import annotations

import asyncio
import logging
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field
from fastapi.concurrency import run_in_threadpool

from omnichain.backend import Backend
from omnichain.core import AudioStream, ImageSet, PlanDirective, Query, Streams, VideoStream, validate_directive
from omnichain.pipeline import PipelineConfig, run

log = logging.getLogger(__name__)


class AudioIn(BaseModel):
    path: str
    duration: float = Field(gt=0)


class VideoIn(BaseModel):
    path: str
    duration: float = Field(gt=0)
    timestamps: list[float] = Field(default_factory=list)


class InferRequest(BaseModel):
    id: str = "request"
    query: str = Field(min_length=1)
    options: Optional[list[str]] = None
    audio: Optional[AudioIn] = None
    video: Optional[VideoIn] = None
    images: Optional[list[str]] = None
    plan_override: Optional[dict[str, Any]] = None
    k: Optional[int] = Field(default=None, ge=1)


def _unprocessable(detail: Any) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": detail})


def _secrets(client: Backend) -> list[str]:
    token = getattr(client, "_token", None)
    value = token() if callable(token) else None
    return [value] if value else []


def _scrub(text: str, secrets: list[str]) -> str:
    for s in secrets:
        text = text.replace(s, "***")
    return text


def create_app(client: Backend, cfg: PipelineConfig | None = None, cap: int = 8, check_media: bool = True) -> FastAPI:
    cfg = cfg or PipelineConfig()
    if cap < 1:
        raise ValueError("concurrency cap must be >= 1")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.slots = asyncio.Semaphore(cap)
        app.state.idle = asyncio.Event()
        app.state.idle.set()
        yield
        if app.state.accepted:
            log.info("draining %d requests", app.state.accepted)
        await app.state.idle.wait()

    app = FastAPI(title="omnichain gateway", lifespan=lifespan)
    app.state.in_flight = 0
    app.state.accepted = 0
    app.state.max_in_flight = 0
    app.state.cap = cap

    def _slots() -> asyncio.Semaphore:
        # Lifespan may not run under some test transports.
        if not hasattr(app.state, "slots"):
            app.state.slots = asyncio.Semaphore(cap)
            app.state.idle = asyncio.Event()
            app.state.idle.set()
        return app.state.slots

    @app.get("/v1/healthz", response_class=PlainTextResponse)
    async def healthz() -> str:
        return "ok"

    @app.post("/v1/infer")
    async def infer(req: InferRequest):
        try:
            q = Query(req.id, req.query, tuple(req.options) if req.options else None)
            audio = AudioStream(f"{req.id}/audio", req.audio.duration, req.audio.path) if req.audio else None
            video = (
                VideoStream.from_timestamps(f"{req.id}/video", req.video.duration, req.video.timestamps, req.video.path)
                if req.video
                else None
            )
            images = ImageSet(f"{req.id}/images", tuple(req.images)) if req.images else None
        except ValueError as exc:
            return _unprocessable(str(exc))
        streams = Streams(audio, video, images)
        if not streams.available():
            return _unprocessable("request carries no media")
        if check_media:
            paths = [m.path for m in (req.audio, req.video) if m] + list(req.images or [])
            missing = [p for p in paths if not Path(p).exists()]
            if missing:
                return _unprocessable(f"media not found: {', '.join(missing)}")

        req_cfg = cfg if req.k is None else cfg.with_(k=req.k)
        if req.plan_override is not None:
            try:
                override = PlanDirective.from_dict({"provenance": "override", **req.plan_override})
            except (KeyError, ValueError, TypeError) as exc:
                return _unprocessable(f"malformed plan override: {exc}")
            violations = validate_directive(override, streams.available())
            if violations:
                return _unprocessable({"violations": violations})
            req_cfg = req_cfg.with_(plan_override=override)

        slots = _slots()
        # Drain tracks accepted requests, including those still queued for a slot.
        app.state.accepted += 1
        app.state.idle.clear()
        try:
            async with slots:
                app.state.in_flight += 1
                app.state.max_in_flight = max(app.state.max_in_flight, app.state.in_flight)
                try:
                    trace = await run_in_threadpool(run, q, streams, req_cfg, client.fork())
                finally:
                    app.state.in_flight -= 1
        finally:
            app.state.accepted -= 1
            if not app.state.accepted:
                app.state.idle.set()

        if not trace.ok:
            message = _scrub(trace.error or "", _secrets(client))
            status = 502 if trace.error_kind == "backend" else 422
            return JSONResponse(status_code=status, content={"error": {"kind": trace.error_kind, "message": message}})
        return {
            "id": trace.query_id,
            "answer": trace.answer.to_dict(),
            "plan": trace.directive.to_dict(),
            "calls": len(trace.calls),
        }

    return app
