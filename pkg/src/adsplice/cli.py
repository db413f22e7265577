"""Command-line interface.

Subcommands: gen-corpus, detect, place, run, train, bench, serve, feed.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .admeta import metadata_from_dict
from .corpus import (
    CorpusConfig,
    DEFAULT_SCHEDULE,
    STREAM_DIR,
    generate_corpus,
    parse_schedule,
)
from .delivery import DeliveryServer, paced_segments
from .features import TrainConfig
from .media import MANIFEST_NAME, read_stream, write_segment, write_stream
from .pipeline import (
    ENGINES,
    ENGINE_FEATURES,
    ENGINE_XCORR,
    MODEL_NAME,
    PipelineConfig,
    bench_engines,
    classify_stream,
    corpus_artifacts,
    detect_intervals,
    load_model,
    process_corpus,
    save_model,
    train_on_corpus,
)
from .placer import splice
from .restapi import (
    DEFAULT_PORT,
    DEFAULT_WS_PORT,
    ENV_DATA_ROOT,
    ENV_PORT,
    ENV_WS_PORT,
    create_app,
)


def _fraction(text: str) -> Fraction:
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(text), 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adsplice",
        description="Edge ad-replacement service: corpus, pipeline, server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--fps", type=_fraction, default=Fraction(30, 1))
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--segment-seconds", type=float, default=10.0)
    p.add_argument(
        "--schedule",
        type=parse_schedule,
        default=DEFAULT_SCHEDULE,
        help="e.g. p60,a30:auto,p60,a30:food,p60",
    )

    p = sub.add_parser("detect", help="classify segments, print intervals")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--engine", choices=ENGINES, default=ENGINE_XCORR)
    p.add_argument("--model", type=Path)
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")

    p = sub.add_parser("place", help="splice given metadata into a stream")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--metadata", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("run", help="detect and splice in one pass")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--engine", choices=ENGINES, default=ENGINE_XCORR)
    p.add_argument("--model", type=Path)

    p = sub.add_parser("train", help="fit the feature-engine classifier")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--out", type=Path, help="default: <corpus>/model.json")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--k-max", type=int, default=10)

    p = sub.add_parser("bench", help="compare both engines on a corpus")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--model", type=Path, help="default: <corpus>/model.json")

    p = sub.add_parser("serve", help="host the REST API and delivery server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get(ENV_PORT, DEFAULT_PORT)))
    p.add_argument("--ws-port", type=int,
                   default=int(os.environ.get(ENV_WS_PORT, DEFAULT_WS_PORT)))
    p.add_argument("--data-root", type=Path,
                   default=Path(os.environ.get(ENV_DATA_ROOT, "adsplice-data")))

    p = sub.add_parser("feed", help="replay a stream into a directory at pace")
    p.add_argument("--stream", required=True, type=Path)
    p.add_argument("--dest", required=True, type=Path)
    p.add_argument("--speed", type=float, default=1.0)

    return parser


# ---------------------------------------------------------------------------
# command handlers


def _cmd_gen_corpus(args) -> int:
    config = CorpusConfig(
        seed=args.seed,
        width=args.width,
        height=args.height,
        fps=args.fps,
        sample_rate=args.sample_rate,
        segment_seconds=args.segment_seconds,
        schedule=tuple(args.schedule),
    )
    summary = generate_corpus(config, args.out)
    print(
        f"corpus: {summary.total_segments} segments, {summary.total_frames} frames, "
        f"{len(summary.truth)} ad intervals -> {summary.root}"
    )
    return 0


def _require_model(parser, args) -> Path | None:
    """Resolve the model path for the features engine; usage error if absent."""
    if args.engine != ENGINE_FEATURES:
        return None
    path = args.model or (args.corpus / MODEL_NAME)
    if not path.is_file():
        parser.error(f"features engine needs --model (no file at {path})")
    return path


def _cmd_detect(parser, args) -> int:
    model_path = _require_model(parser, args)
    config = PipelineConfig(engine=args.engine)
    logo, _, _ = corpus_artifacts(args.corpus)
    model = load_model(model_path) if model_path else None
    segments = read_stream(args.corpus / STREAM_DIR)
    decisions = classify_stream(segments, config, logo=logo, model=model)
    intervals = detect_intervals(segments, decisions)
    report = {
        "engine": args.engine,
        "decisions": [
            {"segment_id": d.segment_id, "is_ad": d.is_ad, "category": d.category}
            for d in decisions
        ],
        "intervals": [m.to_dict() for m in intervals],
    }
    text = json.dumps(report, indent=2)
    if args.out:
        args.out.write_text(text)
    else:
        print(text)
    return 0


def _cmd_place(args) -> int:
    _, repo, policy = corpus_artifacts(args.corpus)
    raw = json.loads(args.metadata.read_text())
    metadata = [metadata_from_dict(entry) for entry in raw]
    segments = read_stream(args.corpus / STREAM_DIR)
    out_segments = splice(segments, metadata, policy, repo)
    out_stream = args.out / STREAM_DIR
    write_stream(out_stream, out_segments)
    print(f"placed {len(metadata)} intervals -> {out_stream}")
    return 0


def _cmd_run(parser, args) -> int:
    model_path = _require_model(parser, args)
    result = process_corpus(
        args.corpus, args.out, PipelineConfig(engine=args.engine), model_path
    )
    print(f"intervals: {len(result.intervals)}")
    print(f"processing_ms: {result.processing_ms}")
    return 0


def _cmd_train(args) -> int:
    model = train_on_corpus(
        args.corpus,
        TrainConfig(learning_rate=args.lr, epochs=args.epochs),
        k_max=args.k_max,
    )
    out = args.out or (args.corpus / MODEL_NAME)
    save_model(model, out)
    print(f"model: classes={list(model.classes)} "
          f"features={list(model.feature_indices)} -> {out}")
    return 0


def _cmd_bench(parser, args) -> int:
    model_path = args.model or (args.corpus / MODEL_NAME)
    if not model_path.is_file():
        parser.error(f"bench needs a trained model (no file at {model_path})")
    print(f"{'engine':<10}{'mean ms/segment':>18}{'accuracy':>12}")
    for row in bench_engines(args.corpus, load_model(model_path)):
        print(f"{row.engine:<10}{row.mean_ms:>18.1f}{row.accuracy * 100:>11.1f}%")
    return 0


async def _serve_async(args) -> None:
    import uvicorn

    bindings: dict = {}
    delivery = DeliveryServer(bindings.get, host=args.host, port=args.ws_port)
    await delivery.start()
    app = create_app(args.data_root, ws_url=lambda: delivery.ws_url,
                     bindings=bindings)
    config = uvicorn.Config(app, host=args.host, port=args.port,
                            log_level="warning")
    server = uvicorn.Server(config)
    print(f"api: http://{args.host}:{args.port}  ws: {delivery.ws_url}",
          flush=True)
    try:
        await server.serve()
    finally:
        await delivery.stop()


def _cmd_serve(args) -> int:
    try:
        asyncio.run(_serve_async(args))
    except KeyboardInterrupt:
        pass
    return 0


async def _feed_async(args) -> int:
    dest = args.dest
    dest.mkdir(parents=True, exist_ok=True)
    ids: list[str] = []
    count = 0
    async for seg in paced_segments(args.stream, args.speed):
        (dest / f"{count:06d}.lvs").write_bytes(write_segment(seg))
        ids.append(seg.segment_id)
        (dest / MANIFEST_NAME).write_text(
            json.dumps(
                {
                    "fps": [seg.fps.numerator, seg.fps.denominator],
                    "width": seg.width,
                    "height": seg.height,
                    "segment_ids": ids,
                },
                indent=2,
            )
        )
        count += 1
    print(f"fed {count} segments -> {dest}")
    return 0


def _cmd_feed(args) -> int:
    return asyncio.run(_feed_async(args))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-corpus":
            return _cmd_gen_corpus(args)
        if args.command == "detect":
            return _cmd_detect(parser, args)
        if args.command == "place":
            return _cmd_place(args)
        if args.command == "run":
            return _cmd_run(parser, args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "bench":
            return _cmd_bench(parser, args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "feed":
            return _cmd_feed(args)
        parser.error(f"unknown command {args.command!r}")
    except SystemExit:
        raise
    except Exception as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
