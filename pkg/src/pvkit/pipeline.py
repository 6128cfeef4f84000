"""Stage orchestration shared by the CLI and the HTTP service.

Stages communicate through files in the output directory, so each one can be
run, inspected, and re-run on its own. Outputs are deterministic: the same
inputs and config produce byte-identical artifacts.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import media_io, text_index
from .audio_features import (
    ActivityGraph,
    amplitude_envelope,
    extract_features,
    write_features_csv,
)
from .audio_segmentation import BicConfig, detect_speaker_changes
from .errors import IoFailure, MissingInput
from .segments import read_segments_csv, segments_from_boundaries, write_segments_csv
from .speaker_analysis import cluster_segments, write_clusters_csv
from .timeline import build_timeline, export_doc, import_doc, render_static
from .video_segmentation import KeyframeRef, ShotConfig, detect_shots, select_keyframe, video_activity

ARTIFACTS = {
    "audio_segments": "audio_segments.csv",
    "audio_activity": "audio_activity.json",
    "features": "features.csv",
    "video_segments": "video_segments.csv",
    "video_activity": "video_activity.json",
    "histogram_cache": "histograms.pvhist",
    "keyframes": "keyframes.csv",
    "phrase_hits": "phrase_hits.csv",
    "clusters": "clusters.csv",
    "timeline": "timeline.json",
    "svg": "timeline.svg",
    "config_echo": "run_config.txt",
}


@dataclass
class RunConfig:
    audio: Path | None = None
    frames: Path | None = None
    histogram_cache: Path | None = None
    transcript: Path | None = None
    theme_list: Path | None = None
    slides: Path | None = None
    output_dir: Path = Path("pvkit-out")
    video_id: str = "video"
    fps: float = 25.0
    bins: int = 512
    phrase_threshold: float = 0.75
    frames_per_pixel: int = 28
    audio_bin_s: float = 0.5
    transcript_duration_s: float | None = None
    threads: int = 1
    dump_features: bool = False
    bic: BicConfig = field(default_factory=BicConfig)
    shot: ShotConfig = field(default_factory=ShotConfig)


_PATH_KEYS = ("audio", "frames", "histogram_cache", "transcript", "theme_list", "slides", "output_dir")
_SUBCONFIGS = {"bic": BicConfig, "shot": ShotConfig}


def config_to_flat(cfg: RunConfig) -> dict:
    """Flatten to the key=value form used by config files and the echo."""
    flat = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _SUBCONFIGS:
            for sub in fields(value):
                flat[f"{f.name}.{sub.name}"] = repr(getattr(value, sub.name))
        elif f.name in _PATH_KEYS:
            flat[f.name] = "" if value is None else str(value)
        elif isinstance(value, bool):
            flat[f.name] = "true" if value else "false"
        else:
            flat[f.name] = "" if value is None else repr(value) if isinstance(value, float) else str(value)
    return dict(sorted(flat.items()))


def _coerce(name: str, text: str, target_type):
    text = text.strip()
    if name in _PATH_KEYS:
        return Path(text) if text else None
    if target_type is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if text == "":
        return None
    return target_type(text)


def apply_flat(cfg: RunConfig, flat: dict) -> RunConfig:
    """Overlay flat key=value settings onto a config."""
    sub_updates: dict[str, dict] = {name: {} for name in _SUBCONFIGS}
    updates = {}
    field_types = {
        f.name: (type(getattr(cfg, f.name)) if getattr(cfg, f.name) is not None else str)
        for f in fields(cfg)
    }
    type_overrides = {
        "fps": float, "phrase_threshold": float, "audio_bin_s": float,
        "transcript_duration_s": float, "bins": int, "frames_per_pixel": int,
        "threads": int, "dump_features": bool, "video_id": str,
    }
    field_types.update(type_overrides)
    for key, text in flat.items():
        if "." in key:
            group, sub = key.split(".", 1)
            if group not in _SUBCONFIGS:
                raise ValueError(f"unknown config group {group!r}")
            sub_fields = {f.name: f for f in fields(_SUBCONFIGS[group])}
            if sub not in sub_fields:
                raise ValueError(f"unknown config key {key!r}")
            current = getattr(getattr(cfg, group), sub)
            sub_updates[group][sub] = _coerce(sub, text, type(current))
        elif key in field_types:
            updates[key] = _coerce(key, text, field_types[key])
        else:
            raise ValueError(f"unknown config key {key!r}")
    for group, vals in sub_updates.items():
        if vals:
            updates[group] = replace(getattr(cfg, group), **vals)
    return replace(cfg, **updates)


def read_config_file(path) -> dict:
    """Parse flat key=value lines; '#' starts a comment."""
    flat = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = stripped.split("=", 1)
        flat[key.strip()] = value.strip()
    return flat


def load_config(config_file=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then config file, then overrides."""
    cfg = RunConfig()
    if config_file:
        cfg = apply_flat(cfg, read_config_file(config_file))
    if overrides:
        cfg = apply_flat(cfg, overrides)
    return cfg


def _out(cfg: RunConfig, artifact: str) -> Path:
    return Path(cfg.output_dir) / ARTIFACTS[artifact]


def echo_config(cfg: RunConfig) -> Path:
    """Write the fully resolved config next to the outputs."""
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    path = _out(cfg, "config_echo")
    lines = [f"{k}={v}" for k, v in config_to_flat(cfg).items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_activity_json(path: Path, activity: ActivityGraph) -> None:
    data = {
        "kind": activity.kind,
        "bin_duration_s": activity.bin_duration_s,
        "values": [float(v) for v in activity.values],
    }
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _read_activity_json(path: Path) -> ActivityGraph:
    data = json.loads(path.read_text())
    return ActivityGraph(
        kind=data["kind"], values=data["values"], bin_duration_s=data["bin_duration_s"]
    )


def stage_segment_audio(cfg: RunConfig) -> dict:
    """Audio pipeline: features, speaker boundaries, segments, activity."""
    if cfg.audio is None:
        raise MissingInput("segment-audio needs an audio file")
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    clip = media_io.read_wav(cfg.audio)
    features = extract_features(clip)
    boundaries = detect_speaker_changes(features, cfg.bic)
    segments = segments_from_boundaries(boundaries, clip.duration_s, kind="audio")
    write_segments_csv(_out(cfg, "audio_segments"), segments)
    _write_activity_json(_out(cfg, "audio_activity"), amplitude_envelope(clip, cfg.audio_bin_s))
    produced = {
        "audio_segments": _out(cfg, "audio_segments"),
        "audio_activity": _out(cfg, "audio_activity"),
    }
    if cfg.dump_features:
        write_features_csv(_out(cfg, "features"), features)
        produced["features"] = _out(cfg, "features")
    return produced


def _load_histograms(cfg: RunConfig):
    """Histogram series from the cache if given, else decoded frames."""
    if cfg.histogram_cache is not None:
        return media_io.read_histogram_cache(cfg.histogram_cache), None
    if cfg.frames is None:
        raise MissingInput("segment-video needs frames or a histogram cache")
    frames = media_io.read_frames(cfg.frames, fps=cfg.fps)
    series = media_io.compute_histograms(frames, bins=cfg.bins, threads=cfg.threads)
    return series, frames


def stage_segment_video(cfg: RunConfig) -> dict:
    """Video pipeline: histograms, shot boundaries, segments, keyframes."""
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    series, frames = _load_histograms(cfg)
    if frames is not None:
        media_io.write_histogram_cache(_out(cfg, "histogram_cache"), series)
    boundaries = detect_shots(series, cfg.shot)
    segments = segments_from_boundaries(boundaries, series.duration_s, kind="video")
    write_segments_csv(_out(cfg, "video_segments"), segments)
    _write_activity_json(_out(cfg, "video_activity"), video_activity(series))

    keyframes = [select_keyframe(series, seg) for seg in segments]
    with open(_out(cfg, "keyframes"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "t"])
        for ref in keyframes:
            writer.writerow([ref.frame_index, repr(ref.t)])
    produced = {
        "video_segments": _out(cfg, "video_segments"),
        "video_activity": _out(cfg, "video_activity"),
        "keyframes": _out(cfg, "keyframes"),
    }
    if frames is not None:
        produced["histogram_cache"] = _out(cfg, "histogram_cache")
        kf_dir = Path(cfg.output_dir) / "keyframes"
        kf_dir.mkdir(exist_ok=True)
        for ref in keyframes:
            media_io.write_ppm(kf_dir / f"frame_{ref.frame_index:06d}.ppm", frames.frames[ref.frame_index])
        produced["keyframe_images"] = kf_dir
    return produced


def stage_index_text(cfg: RunConfig) -> dict:
    """Text pipeline: transcript against theme and topic phrase lists."""
    if cfg.transcript is None:
        raise MissingInput("index-text needs a transcript")
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    tokens = text_index.load_transcript(cfg.transcript, duration_s=cfg.transcript_duration_s)
    theme = (
        text_index.load_phrase_list(cfg.theme_list, kind="theme")
        if cfg.theme_list
        else text_index.default_theme_list()
    )
    hits = text_index.filter_phrases(tokens, theme, cfg.phrase_threshold)
    if cfg.slides is not None:
        topic = text_index.load_slide_phrases(cfg.slides)
        hits = hits + text_index.filter_phrases(tokens, topic, cfg.phrase_threshold)
    text_index.write_hits_csv(_out(cfg, "phrase_hits"), hits)
    return {"phrase_hits": _out(cfg, "phrase_hits")}


def stage_cluster(cfg: RunConfig) -> dict:
    """Cluster previously segmented audio; requires the segments artifact."""
    seg_path = _out(cfg, "audio_segments")
    if not seg_path.exists():
        raise MissingInput(f"cluster needs {seg_path.name}; run segment-audio first")
    if cfg.audio is None:
        raise MissingInput("cluster needs the audio file for features")
    segments = read_segments_csv(seg_path)
    features = extract_features(media_io.read_wav(cfg.audio))
    clusters = cluster_segments(segments, features, cfg.bic.penalty_weight)
    write_clusters_csv(_out(cfg, "clusters"), clusters)
    return {"clusters": _out(cfg, "clusters")}


def _read_keyframes_csv(path: Path) -> list[KeyframeRef]:
    refs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if row:
                refs.append(KeyframeRef(frame_index=int(row[0]), t=float(row[1])))
    return refs


def stage_build_timeline(cfg: RunConfig) -> dict:
    """Merge whatever stage outputs exist into the timeline document."""
    out_dir = Path(cfg.output_dir)
    audio_segs = video_segs = None
    audio_act = video_act = None
    theme_hits = topic_hits = None
    keyframes = {}
    keyframe_images = {}

    if _out(cfg, "audio_segments").exists():
        audio_segs = read_segments_csv(_out(cfg, "audio_segments"))
        audio_act = _read_activity_json(_out(cfg, "audio_activity"))
    if _out(cfg, "video_segments").exists():
        video_segs = read_segments_csv(_out(cfg, "video_segments"))
        video_act = _read_activity_json(_out(cfg, "video_activity"))
        refs = _read_keyframes_csv(_out(cfg, "keyframes"))
        for i, ref in enumerate(refs):
            keyframes[i] = ref
            image = out_dir / "keyframes" / f"frame_{ref.frame_index:06d}.ppm"
            if image.exists():
                keyframe_images[i] = f"keyframes/{image.name}"
    if _out(cfg, "phrase_hits").exists():
        hits = text_index.read_hits_csv(_out(cfg, "phrase_hits"))
        theme_hits = [h for h in hits if h.kind == "theme"]
        topic_hits = [h for h in hits if h.kind == "topic"] if cfg.slides is not None else None

    if audio_segs is None and video_segs is None:
        raise MissingInput("timeline needs at least one segmented track")

    duration = 0.0
    fps = cfg.fps
    if audio_segs:
        duration = max(duration, audio_segs[-1].t_end)
    if video_segs:
        duration = max(duration, video_segs[-1].t_end)
    if video_act is not None:
        fps = 1.0 / video_act.bin_duration_s

    doc = build_timeline(
        video_id=cfg.video_id,
        duration_s=duration,
        fps=fps,
        video_segments=video_segs,
        audio_segments=audio_segs,
        video_activity=video_act,
        audio_activity=audio_act,
        theme_hits=theme_hits,
        topic_hits=topic_hits,
        keyframes=keyframes,
        keyframe_images=keyframe_images,
        frames_per_pixel=cfg.frames_per_pixel,
    )
    export_doc(doc, _out(cfg, "timeline"))
    return {"timeline": _out(cfg, "timeline")}


def stage_render(cfg: RunConfig) -> dict:
    """Render the exported document to SVG."""
    tl_path = _out(cfg, "timeline")
    if not tl_path.exists():
        raise MissingInput(f"render needs {tl_path.name}; run analyze or build the timeline first")
    render_static(import_doc(tl_path), _out(cfg, "svg"))
    return {"svg": _out(cfg, "svg")}


def analyze(cfg: RunConfig) -> dict:
    """Run every stage whose inputs are present, then merge and render."""
    if cfg.audio is None and cfg.frames is None and cfg.histogram_cache is None:
        raise MissingInput("analyze needs audio, frames, or a histogram cache")
    echo_config(cfg)
    produced = {"config_echo": _out(cfg, "config_echo")}
    if cfg.audio is not None:
        produced.update(stage_segment_audio(cfg))
    if cfg.frames is not None or cfg.histogram_cache is not None:
        produced.update(stage_segment_video(cfg))
    if cfg.transcript is not None:
        produced.update(stage_index_text(cfg))
    produced.update(stage_build_timeline(cfg))
    produced.update(stage_render(cfg))
    return produced
