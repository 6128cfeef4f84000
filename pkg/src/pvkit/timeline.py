"""The merged timeline document and its JSON/SVG exports.

The document is a six-row model: thumbnails, time markers, video segments
with activity, audio segments with activity, theme phrases, topic phrases.
Every element carries pixel x extents derived from its time at the
document's frames-per-pixel scale, so renderers never recompute analysis.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .audio_features import ActivityGraph
from .errors import IoFailure, ScaleOutOfRange
from .segments import Segment
from .text_index import PhraseHit
from .video_segmentation import KeyframeRef

SCHEMA_KEY = "pvtl"
SCHEMA_VERSION = 1
MIN_FRAMES_PER_PIXEL = 1
MAX_FRAMES_PER_PIXEL = 30
DEFAULT_FRAMES_PER_PIXEL = 28
DEFAULT_THUMBNAIL_WIDTH_PX = 80
DEFAULT_MARKER_INTERVAL_S = 60.0

ROW_KINDS = ("thumbnails", "markers", "video", "audio", "theme_phrases", "topic_phrases")


@dataclass(frozen=True)
class Thumbnail:
    segment_index: int
    frame_index: int
    t: float
    x: int
    x_end: int
    image: str | None


@dataclass(frozen=True)
class Marker:
    t: float
    x: int
    label: str


@dataclass(frozen=True)
class TimelineSegment:
    t_start: float
    t_end: float
    x: int
    x_end: int
    score: float | None = None
    cluster_id: int | None = None


@dataclass(frozen=True)
class PhraseMark:
    phrase: str
    t_start: float
    t_end: float
    x: int
    x_end: int
    score: float


@dataclass(frozen=True)
class TrackRow:
    segments: tuple
    activity_values: tuple
    activity_bin_s: float


@dataclass(frozen=True)
class TimelineDoc:
    video_id: str
    duration_s: float
    fps: float
    frames_per_pixel: int
    width_px: int
    markers: tuple
    thumbnails: tuple | None = None
    video: TrackRow | None = None
    audio: TrackRow | None = None
    theme_phrases: tuple | None = None
    topic_phrases: tuple | None = None


def pixel_of(t: float, fps: float, frames_per_pixel: int) -> int:
    return round(t * fps / frames_per_pixel)


def _marker_label(t: float) -> str:
    total = round(t)
    h, rem = divmod(total, 3600)
    m, s = divmod(rem, 60)
    return f"{h}:{m:02d}:{s:02d}" if h else f"{m}:{s:02d}"


def build_timeline(
    *,
    video_id: str = "video",
    duration_s: float,
    fps: float,
    video_segments: list[Segment] | None = None,
    audio_segments: list[Segment] | None = None,
    video_activity: ActivityGraph | None = None,
    audio_activity: ActivityGraph | None = None,
    theme_hits: list[PhraseHit] | None = None,
    topic_hits: list[PhraseHit] | None = None,
    keyframes: dict[int, KeyframeRef] | None = None,
    keyframe_images: dict[int, str] | None = None,
    frames_per_pixel: int = DEFAULT_FRAMES_PER_PIXEL,
    thumbnail_width_px: int = DEFAULT_THUMBNAIL_WIDTH_PX,
    marker_interval_s: float = DEFAULT_MARKER_INTERVAL_S,
) -> TimelineDoc:
    """Assemble the six-row document from per-track analysis outputs.

    Inputs left as None omit their row. Thumbnails attach only to video
    segments at least thumbnail_width_px wide at this zoom.
    """
    if not MIN_FRAMES_PER_PIXEL <= frames_per_pixel <= MAX_FRAMES_PER_PIXEL:
        raise ScaleOutOfRange(
            f"frames_per_pixel {frames_per_pixel} outside "
            f"[{MIN_FRAMES_PER_PIXEL}, {MAX_FRAMES_PER_PIXEL}]"
        )
    if duration_s <= 0 or fps <= 0:
        raise ValueError("duration_s and fps must be positive")
    duration_s = float(duration_s)
    fps = float(fps)

    def px(t: float) -> int:
        return pixel_of(t, fps, frames_per_pixel)

    markers = []
    t = 0.0
    while t <= duration_s + 1e-9:
        markers.append(Marker(t=t, x=px(t), label=_marker_label(t)))
        t += marker_interval_s

    def track(segments, activity):
        if segments is None and activity is None:
            return None
        rows = tuple(
            TimelineSegment(
                t_start=s.t_start,
                t_end=s.t_end,
                x=px(s.t_start),
                x_end=px(s.t_end),
                score=s.confidence,
                cluster_id=s.cluster_id,
            )
            for s in (segments or [])
        )
        values = tuple(float(v) for v in activity.values) if activity is not None else ()
        bin_s = float(activity.bin_duration_s) if activity is not None else 0.0
        return TrackRow(segments=rows, activity_values=values, activity_bin_s=bin_s)

    video = track(video_segments, video_activity)
    audio = track(audio_segments, audio_activity)

    thumbnails = None
    if video_segments is not None:
        thumbnails = []
        for i, seg in enumerate(video_segments):
            ref = (keyframes or {}).get(i)
            if ref is None:
                continue
            x, x_end = px(seg.t_start), px(seg.t_end)
            if x_end - x < thumbnail_width_px:
                continue
            thumbnails.append(
                Thumbnail(
                    segment_index=i,
                    frame_index=ref.frame_index,
                    t=ref.t,
                    x=x,
                    x_end=x_end,
                    image=(keyframe_images or {}).get(i),
                )
            )
        thumbnails = tuple(thumbnails)

    def phrase_row(hits):
        if hits is None:
            return None
        return tuple(
            PhraseMark(
                phrase=h.phrase,
                t_start=h.t_start,
                t_end=h.t_end,
                x=px(h.t_start),
                x_end=px(h.t_end),
                score=h.score,
            )
            for h in sorted(hits, key=lambda h: (h.t_start, h.phrase))
        )

    return TimelineDoc(
        video_id=video_id,
        duration_s=duration_s,
        fps=fps,
        frames_per_pixel=int(frames_per_pixel),
        width_px=px(duration_s),
        markers=tuple(markers),
        thumbnails=thumbnails,
        video=video,
        audio=audio,
        theme_phrases=phrase_row(theme_hits),
        topic_phrases=phrase_row(topic_hits),
    )


def doc_to_dict(doc: TimelineDoc) -> dict:
    rows = []
    if doc.thumbnails is not None:
        rows.append(
            {
                "row": 1,
                "kind": "thumbnails",
                "items": [
                    {
                        "segment_index": th.segment_index,
                        "frame_index": th.frame_index,
                        "t": th.t,
                        "x": th.x,
                        "x_end": th.x_end,
                        "image": th.image,
                    }
                    for th in doc.thumbnails
                ],
            }
        )
    rows.append(
        {
            "row": 2,
            "kind": "markers",
            "items": [{"t": m.t, "x": m.x, "label": m.label} for m in doc.markers],
        }
    )
    for number, kind, row in ((3, "video", doc.video), (4, "audio", doc.audio)):
        if row is None:
            continue
        rows.append(
            {
                "row": number,
                "kind": kind,
                "segments": [
                    {
                        "t_start": s.t_start,
                        "t_end": s.t_end,
                        "x": s.x,
                        "x_end": s.x_end,
                        "score": s.score,
                        "cluster_id": s.cluster_id,
                    }
                    for s in row.segments
                ],
                "activity": {
                    "kind": kind,
                    "bin_duration_s": row.activity_bin_s,
                    "values": list(row.activity_values),
                },
            }
        )
    for number, kind, marks in (
        (5, "theme_phrases", doc.theme_phrases),
        (6, "topic_phrases", doc.topic_phrases),
    ):
        if marks is None:
            continue
        rows.append(
            {
                "row": number,
                "kind": kind,
                "items": [
                    {
                        "phrase": p.phrase,
                        "t_start": p.t_start,
                        "t_end": p.t_end,
                        "x": p.x,
                        "x_end": p.x_end,
                        "score": p.score,
                    }
                    for p in marks
                ],
            }
        )
    return {
        SCHEMA_KEY: SCHEMA_VERSION,
        "video_id": doc.video_id,
        "duration_s": doc.duration_s,
        "fps": doc.fps,
        "frames_per_pixel": doc.frames_per_pixel,
        "width_px": doc.width_px,
        "rows": rows,
    }


def doc_from_dict(data: dict) -> TimelineDoc:
    if data.get(SCHEMA_KEY) != SCHEMA_VERSION:
        raise ValueError(f"not a {SCHEMA_KEY} v{SCHEMA_VERSION} document")
    by_kind = {row["kind"]: row for row in data["rows"]}

    def track(kind):
        row = by_kind.get(kind)
        if row is None:
            return None
        return TrackRow(
            segments=tuple(
                TimelineSegment(
                    t_start=s["t_start"],
                    t_end=s["t_end"],
                    x=s["x"],
                    x_end=s["x_end"],
                    score=s["score"],
                    cluster_id=s["cluster_id"],
                )
                for s in row["segments"]
            ),
            activity_values=tuple(row["activity"]["values"]),
            activity_bin_s=row["activity"]["bin_duration_s"],
        )

    def phrases(kind):
        row = by_kind.get(kind)
        if row is None:
            return None
        return tuple(PhraseMark(**item) for item in row["items"])

    thumbnails = None
    if "thumbnails" in by_kind:
        thumbnails = tuple(Thumbnail(**item) for item in by_kind["thumbnails"]["items"])
    return TimelineDoc(
        video_id=data["video_id"],
        duration_s=data["duration_s"],
        fps=data["fps"],
        frames_per_pixel=data["frames_per_pixel"],
        width_px=data["width_px"],
        markers=tuple(Marker(**item) for item in by_kind["markers"]["items"]),
        thumbnails=thumbnails,
        video=track("video"),
        audio=track("audio"),
        theme_phrases=phrases("theme_phrases"),
        topic_phrases=phrases("topic_phrases"),
    )


def export_doc(doc: TimelineDoc, path) -> None:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(doc_to_dict(doc), sort_keys=True, indent=2, ensure_ascii=True)
    try:
        Path(path).write_text(text + "\n")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def import_doc(path) -> TimelineDoc:
    return doc_from_dict(json.loads(Path(path).read_text()))


# --- static SVG rendering ---------------------------------------------------

ROW_HEIGHTS = {
    "thumbnails": 64,
    "markers": 24,
    "video": 72,
    "audio": 72,
    "theme_phrases": 26,
    "topic_phrases": 26,
}
ROW_GAP = 4
ACTIVITY_COLORS = {"video": "red", "audio": "green"}
PHRASE_FILL = "yellow"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _activity_polyline(row: TrackRow, doc: TimelineDoc, y0: int, h: int, color: str) -> str:
    if not row.activity_values:
        return ""
    peak = max(max(row.activity_values), 1e-9)
    points = []
    for i, v in enumerate(row.activity_values):
        x = pixel_of(i * row.activity_bin_s, doc.fps, doc.frames_per_pixel)
        y = y0 + h - round(v / peak * (h - 2)) - 1
        points.append(f"{x},{y}")
    return f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{" ".join(points)}"/>\n'


def render_static(doc: TimelineDoc, path) -> None:
    """One SVG with the six rows stacked in document order."""
    present = [("markers", doc.markers)]
    if doc.thumbnails is not None:
        present.insert(0, ("thumbnails", doc.thumbnails))
    if doc.video is not None:
        present.append(("video", doc.video))
    if doc.audio is not None:
        present.append(("audio", doc.audio))
    if doc.theme_phrases is not None:
        present.append(("theme_phrases", doc.theme_phrases))
    if doc.topic_phrases is not None:
        present.append(("topic_phrases", doc.topic_phrases))

    width = max(doc.width_px, 1)
    height = sum(ROW_HEIGHTS[kind] + ROW_GAP for kind, _ in present)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
    ]
    y = 0
    for kind, row in present:
        h = ROW_HEIGHTS[kind]
        parts.append(f'<g data-row="{kind}">\n')
        if kind == "thumbnails":
            for th in row:
                parts.append(
                    f'<rect x="{th.x}" y="{y}" width="{th.x_end - th.x}" height="{h - 2}" '
                    f'fill="none" stroke="gray"/>\n'
                )
                if th.image:
                    parts.append(
                        f'<image x="{th.x}" y="{y}" width="{th.x_end - th.x}" '
                        f'height="{h - 2}" href="{_esc(th.image)}"/>\n'
                    )
        elif kind == "markers":
            parts.append(f'<line x1="0" y1="{y + h - 6}" x2="{width}" y2="{y + h - 6}" stroke="black"/>\n')
            for m in row:
                parts.append(f'<line x1="{m.x}" y1="{y + h - 12}" x2="{m.x}" y2="{y + h}" stroke="black"/>\n')
                parts.append(
                    f'<text x="{m.x + 2}" y="{y + h - 14}" font-size="10" font-family="sans-serif">'
                    f"{_esc(m.label)}</text>\n"
                )
        elif kind in ("video", "audio"):
            color = ACTIVITY_COLORS[kind]
            for s in row.segments:
                parts.append(
                    f'<line x1="{s.x}" y1="{y}" x2="{s.x}" y2="{y + h}" stroke="{color}"/>\n'
                )
                parts.append(
                    f'<line x1="{s.x_end}" y1="{y}" x2="{s.x_end}" y2="{y + h}" stroke="{color}"/>\n'
                )
            parts.append(_activity_polyline(row, doc, y, h, color))
        else:
            parts.append(
                f'<rect x="0" y="{y}" width="{width}" height="{h - 2}" '
                f'fill="{PHRASE_FILL}" fill-opacity="0.3"/>\n'
            )
            for p in row:
                parts.append(
                    f'<rect x="{p.x}" y="{y + 2}" width="{max(p.x_end - p.x, 1)}" '
                    f'height="{h - 6}" fill="{PHRASE_FILL}" stroke="olive"/>\n'
                )
                parts.append(
                    f'<text x="{p.x + 1}" y="{y + h - 8}" font-size="9" font-family="sans-serif">'
                    f"{_esc(p.phrase)}</text>\n"
                )
        parts.append("</g>\n")
        y += h + ROW_GAP
    parts.append("</svg>\n")
    try:
        Path(path).write_text("".join(parts))
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
