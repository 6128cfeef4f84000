"""Command-line entry point: one subcommand per pipeline stage plus serve."""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .errors import PvkitError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable; wins over the file)",
    )
    parser.add_argument("--audio", help="mono/stereo PCM WAV file")
    parser.add_argument("--frames", help="directory of PGM/PPM frames or a .y4m stream")
    parser.add_argument("--histogram-cache", help="precomputed PVHIST cache file")
    parser.add_argument("--transcript", help="word,t_start,t_end CSV or plain text")
    parser.add_argument("--theme-list", help="theme phrases, one per line")
    parser.add_argument("--slides", help="slide text, one phrase per line")
    parser.add_argument("--output-dir", help="artifact directory")
    parser.add_argument("--video-id", help="identifier used in the timeline document")
    parser.add_argument("--fps", type=float, help="frame rate for frame directories")
    parser.add_argument("--frames-per-pixel", type=int, help="timeline zoom scale (1..30)")
    parser.add_argument("--threads", type=int, help="worker cap for parallel stages")
    parser.add_argument("--dump-features", action="store_true", help="also write the MFCC CSV")


_FLAG_KEYS = (
    "audio", "frames", "histogram_cache", "transcript", "theme_list", "slides",
    "output_dir", "video_id", "fps", "frames_per_pixel", "threads",
)


def _config_from_args(args) -> pipeline.RunConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "dump_features", False):
        overrides["dump_features"] = "true"
    return pipeline.load_config(args.config, overrides)


def _run_stage(args, stage) -> int:
    cfg = _config_from_args(args)
    pipeline.echo_config(cfg)
    produced = stage(cfg)
    for name, path in produced.items():
        print(f"{name}: {path}")
    return 0


def cmd_analyze(args) -> int:
    cfg = _config_from_args(args)
    produced = pipeline.analyze(cfg)
    for name, path in produced.items():
        print(f"{name}: {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _config_from_args(args)
    app = create_app(cfg.output_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvkit",
        description="Segment presentation videos by speaker and shot, index noisy "
        "transcripts, and build a zoomable timeline document.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stages = {
        "analyze": ("run all stages available for the given inputs", cmd_analyze),
        "segment-audio": ("detect speaker changes in the audio track", lambda a: _run_stage(a, pipeline.stage_segment_audio)),
        "segment-video": ("detect shot boundaries and pick keyframes", lambda a: _run_stage(a, pipeline.stage_segment_video)),
        "index-text": ("filter the transcript against phrase lists", lambda a: _run_stage(a, pipeline.stage_index_text)),
        "cluster": ("cluster audio segments by speaker", lambda a: _run_stage(a, pipeline.stage_cluster)),
        "render": ("render the timeline document to SVG", lambda a: _run_stage(a, pipeline.stage_render)),
    }
    for name, (help_text, handler) in stages.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(handler=handler, stage_name=name)

    serve = sub.add_parser(
        "serve",
        help="serve analyzed outputs over localhost HTTP "
        "(output-dir is one analyzed video or a directory of them)",
    )
    _add_common(serve)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8750)
    serve.add_argument("--ui-dir", help="built browser UI to serve at /")
    serve.set_defaults(handler=cmd_serve, stage_name="serve")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (PvkitError, ValueError, OSError) as e:
        print(f"{args.stage_name}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
