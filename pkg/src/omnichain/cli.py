"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from omnichain import __version__
from omnichain.backend import Backend, BackendError, backend_from_config
from omnichain.config import AppConfig, ConfigError, parse_policy
from omnichain.core import (
    AudioStream,
    ImageSet,
    ModalityKind,
    PlanDirective,
    Provenance,
    Query,
    Streams,
    Trace,
    TopologyFormat,
    Pathway,
    VideoStream,
    dumps,
    validate_directive,
)
from omnichain.eval import (
    RunMode,
    accuracy,
    conflict_metrics,
    density_sweep,
    latency_report,
    load_manifest,
    permutation_report,
    run_suite,
)
from omnichain.eval import report
from omnichain.eval.manifest import ManifestError
from omnichain.pipeline import export_trajectory, run
from omnichain.planner import fallback_directive

log = logging.getLogger("omnichain")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is our data-error code
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_KIND_ALIASES = {
    "a": ModalityKind.AUDIO,
    "audio": ModalityKind.AUDIO,
    "v": ModalityKind.VIDEO,
    "video": ModalityKind.VIDEO,
    "visual": ModalityKind.VIDEO,
    "i": ModalityKind.IMAGES,
    "images": ModalityKind.IMAGES,
}


def parse_order(text: str) -> tuple[ModalityKind, ...]:
    try:
        return tuple(_KIND_ALIASES[t.strip().lower()] for t in text.split(",") if t.strip())
    except KeyError as exc:
        raise UsageError(f"unknown modality {exc.args[0]!r} in order {text!r}") from None


def parse_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- setup


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML app config")
    p.add_argument("--backend", help="backend config or mock rule file (overrides config)")
    p.add_argument("--policy", choices=("strict", "lenient"))
    p.add_argument("--k", type=int, help="interleave density")
    p.add_argument("--plan-override", help="directive JSON (inline or file), or 'fallback'")
    p.add_argument("--prompt-template", choices=("open", "mc"))
    p.add_argument("--frames", type=int, help="subsample video to N frames")
    p.add_argument("--out", help="report / output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--concurrency", type=int, help="in-flight request cap")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omnichain", description="Chain-of-modality orchestration and diagnostics")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="answer one query")
    _common(p)
    p.add_argument("--query-file", help="one manifest-style JSON record")
    p.add_argument("--query", help="inline question text")
    p.add_argument("--id", default="query")
    p.add_argument("--option", action="append", dest="options", help="answer option (repeatable)")
    p.add_argument("--audio", help="audio path")
    p.add_argument("--audio-duration", type=float)
    p.add_argument("--video", help="video path")
    p.add_argument("--video-duration", type=float)
    p.add_argument("--timestamps", help="comma-separated frame timestamps in seconds")
    p.add_argument("--image", action="append", dest="images")
    p.add_argument("--emit-trace", help="append the trace as one JSONL line to this file")

    p = sub.add_parser("eval", help="batch evaluation over a manifest")
    _common(p)
    p.add_argument("manifest")
    p.add_argument("--root", help="media root (default: manifest directory)")
    p.add_argument("--mode", choices=("com", "audio", "visual", "fixed"), default="com")
    p.add_argument("--order", default="audio,video", help="fixed-mode modality order")
    p.add_argument("--format", choices=[f.value for f in TopologyFormat], default="sequential")
    p.add_argument("--pathway", choices=[x.value for x in Pathway], default="intuitive")
    p.add_argument("--ablate", action="store_true", help="also run audio-only and visual-only; emit conflict report")
    p.add_argument("--permute", nargs="+", metavar="ORDER", help="orders such as A,V V,A")

    p = sub.add_parser("sweep", help="interleave density sweep with yes-rate")
    _common(p)
    p.add_argument("manifest")
    p.add_argument("--root")
    p.add_argument("--densities", default="1,2,4,8,15")

    p = sub.add_parser("export", help="convert trace JSONL into trajectory JSONL")
    p.add_argument("traces")
    p.add_argument("--manifest", help="attach query records from this manifest")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    _common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--no-check-media", action="store_true")
    return parser


def load_app(args: argparse.Namespace) -> tuple[AppConfig, Backend]:
    try:
        app = AppConfig.load(args.config) if args.config else AppConfig()
    except ConfigError as exc:
        raise DataError(str(exc)) from exc
    cfg = app.pipeline
    if args.policy:
        cfg = cfg.with_(policy=parse_policy({"mode": args.policy, "repair_format_by_task": cfg.policy.repair_format_by_task}))
    if args.k is not None:
        if args.k < 1:
            raise UsageError("--k must be >= 1")
        cfg = cfg.with_(k=args.k)
    if args.prompt_template:
        cfg = cfg.with_(template=args.prompt_template)
    if args.frames is not None:
        if args.frames < 1:
            raise UsageError("--frames must be >= 1")
        cfg = cfg.with_(frames=args.frames)
    if args.seed is not None:
        cfg = cfg.with_(decoding=type(cfg.decoding)(cfg.decoding.temperature, args.seed, cfg.decoding.max_tokens))
    app.pipeline = cfg
    if args.out:
        app.out = Path(args.out)
    if args.concurrency is not None:
        if args.concurrency < 1:
            raise UsageError("--concurrency must be >= 1")
        app.concurrency = args.concurrency

    spec, base = (args.backend, Path(".")) if args.backend else (app.backend, app.base_dir)
    if spec is None:
        raise UsageError("no backend configured: pass --backend or set 'backend' in --config")
    if isinstance(spec, str) and not (base / spec).exists():
        raise DataError(f"backend file not found: {base / spec}")
    try:
        client = backend_from_config(spec, base)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"invalid backend config: {exc}") from exc
    return app, client


def _load_override(text: str, streams: Streams | None) -> PlanDirective:
    if text == "fallback":
        if streams is None:
            raise UsageError("--plan-override fallback needs concrete streams")
        return fallback_directive(streams.available())
    path = Path(text)
    raw = path.read_text(encoding="utf-8") if not text.lstrip().startswith("{") and path.exists() else text
    try:
        return PlanDirective.from_dict({"provenance": Provenance.OVERRIDE.value, **json.loads(raw)})
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed plan override: {exc}") from exc


# ---------------------------------------------------------------- commands


def _infer_inputs(args) -> tuple[Query, Streams, list[Path]]:
    from omnichain.eval.manifest import parse_record

    if args.query_file:
        path = Path(args.query_file)
        if not path.exists():
            raise DataError(f"query file not found: {path}")
        try:
            rec = parse_record(json.loads(path.read_text(encoding="utf-8")), path.parent)
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: {exc}") from exc
        return rec.query, rec.streams, list(rec.media_paths)
    if not args.query:
        raise UsageError("infer needs --query or --query-file")
    paths: list[Path] = []
    try:
        q = Query(args.id, args.query, tuple(args.options) if args.options else None)
        audio = video = images = None
        if args.audio:
            if args.audio_duration is None:
                raise UsageError("--audio needs --audio-duration")
            audio = AudioStream(f"{args.id}/audio", args.audio_duration, args.audio)
            paths.append(Path(args.audio))
        if args.video:
            if args.video_duration is None:
                raise UsageError("--video needs --video-duration")
            ts = [float(x) for x in args.timestamps.split(",")] if args.timestamps else []
            video = VideoStream.from_timestamps(f"{args.id}/video", args.video_duration, ts, args.video)
            paths.append(Path(args.video))
        if args.images:
            images = ImageSet(f"{args.id}/images", tuple(args.images))
            paths += [Path(x) for x in args.images]
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return q, Streams(audio, video, images), paths


def cmd_infer(args) -> int:
    app, client = load_app(args)
    q, streams, paths = _infer_inputs(args)
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise DataError("media file not found: " + ", ".join(str(p) for p in missing))
    if not streams.available():
        raise UsageError("infer needs at least one of --audio, --video, --image")
    cfg = app.pipeline
    if args.plan_override:
        override = _load_override(args.plan_override, streams)
        violations = validate_directive(override, streams.available())
        if violations:
            raise DataError("plan override violates: " + "; ".join(violations))
        cfg = cfg.with_(plan_override=override)
    trace = run(q, streams, cfg, client)
    if args.emit_trace:
        with open(args.emit_trace, "a", encoding="utf-8") as fh:
            fh.write(dumps(trace) + "\n")
    if not trace.ok:
        print(f"error: {trace.error}", file=sys.stderr)
        return EXIT_BACKEND if trace.error_kind == "backend" else EXIT_DATA
    print(dumps({"id": q.id, "answer": trace.answer.to_dict(), "plan": trace.directive.to_dict()}))
    return EXIT_OK


def _manifest(args):
    try:
        manifest = load_manifest(args.manifest, args.root)
    except FileNotFoundError:
        raise DataError(f"manifest not found: {args.manifest}") from None
    except ManifestError as exc:
        raise DataError(str(exc)) from exc
    missing = manifest.missing_media()
    if missing:
        raise DataError(f"{len(missing)} media file(s) missing, first: {missing[0]}")
    return manifest


def _write_traces(traces: Sequence[Trace], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(dumps(t) + "\n")


def _accuracy_row(res, manifest) -> dict:
    labels = res.predictions.labels
    return {
        "mode": res.predictions.mode,
        "n": len(manifest),
        "correct": sum(1 for r in manifest if labels[r.id] is not None and labels[r.id] == r.query.gold),
        "unresolved": sum(1 for v in labels.values() if v is None),
        "failed": len(res.failures),
        "accuracy": accuracy(res.predictions, manifest),
    }


def cmd_eval(args) -> int:
    app, client = load_app(args)
    manifest = _manifest(args)
    cfg, out, cap = app.pipeline, app.out, app.concurrency
    if args.plan_override:
        cfg = cfg.with_(plan_override=_load_override(args.plan_override, None))
    if args.mode == "fixed":
        mode = RunMode.fixed(parse_order(args.order), TopologyFormat(args.format), Pathway(args.pathway))
    else:
        mode = {"com": RunMode.com(), "audio": RunMode.audio_only(), "visual": RunMode.visual_only()}[args.mode]

    written: list[Path] = []
    main = run_suite(manifest, mode, cfg, client, cap)
    results = [main]
    if args.ablate:
        audio = run_suite(manifest, RunMode.audio_only(), cfg, client, cap)
        visual = run_suite(manifest, RunMode.visual_only(), cfg, client, cap)
        results += [audio, visual]
        rep = conflict_metrics(audio.predictions, visual.predictions, main.predictions, manifest)
        written += report.emit_conflict(rep, out)
    written += report.emit([_accuracy_row(r, manifest) for r in results], report.ACCURACY_COLUMNS, out, "accuracy", "Accuracy")
    if args.permute:
        orders = [parse_order(o) for o in args.permute]
        if len(orders) < 2:
            raise UsageError("--permute needs at least two orders")
        written += report.emit_permutation(permutation_report(manifest, orders, cfg, client, cap), out)
    traces = [t for r in results for t in r.traces]
    _write_traces(main.traces, out / "traces.jsonl")
    written.append(out / "traces.jsonl")
    written += report.emit_latency(latency_report(traces), out)
    for r in results:
        for t in r.failures:
            print(f"record {t.query_id} failed ({r.predictions.mode}): {t.error}", file=sys.stderr)
    for p in written:
        print(p)
    return EXIT_OK


def cmd_sweep(args) -> int:
    app, client = load_app(args)
    manifest = _manifest(args)
    densities = parse_ints(args.densities)
    if not densities or min(densities) < 1:
        raise UsageError("--densities must list integers >= 1")
    try:
        sweep = density_sweep(manifest, densities, app.pipeline, client, app.concurrency)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    for p in report.emit_sweep(sweep, app.out):
        print(p)
    return EXIT_OK


def cmd_export(args) -> int:
    queries = {}
    if args.manifest:
        queries = {r.id: r.query for r in load_manifest(args.manifest)}
    path = Path(args.traces)
    if not path.exists():
        raise DataError(f"trace file not found: {path}")
    n = skipped = 0
    with path.open(encoding="utf-8") as src, open(args.out, "w", encoding="utf-8") as dst:
        for line in src:
            if not line.strip():
                continue
            t = Trace.from_dict(json.loads(line))
            if not t.ok:
                skipped += 1
                continue
            dst.write(dumps(export_trajectory(t, queries.get(t.query_id))) + "\n")
            n += 1
    print(f"wrote {n} trajectories to {args.out} ({skipped} failed traces skipped)")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from omnichain.gateway import create_app

    app, client = load_app(args)
    cfg = app.pipeline
    if args.plan_override:
        cfg = cfg.with_(plan_override=_load_override(args.plan_override, None))
    api = create_app(client, cfg, cap=app.concurrency, check_media=not args.no_check_media)
    uvicorn.run(api, host=args.host, port=args.port, timeout_graceful_shutdown=30)
    return EXIT_OK


COMMANDS = {"infer": cmd_infer, "eval": cmd_eval, "sweep": cmd_sweep, "export": cmd_export, "serve": cmd_serve}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ManifestError, ConfigError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
