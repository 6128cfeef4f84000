"""Time segments shared by the audio and video tracks."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import IoFailure, UnsortedBoundaries


@dataclass(frozen=True)
class Boundary:
    """A detected change point with its peak detector score."""

    t: float
    score: float


@dataclass(frozen=True)
class Segment:
    """Half-open interval [t_start, t_end) on one media track."""

    kind: str
    t_start: float
    t_end: float
    confidence: float | None = None
    cluster_id: int | None = None

    def __post_init__(self):
        if self.kind not in ("audio", "video"):
            raise ValueError(f"kind must be audio or video, got {self.kind!r}")
        if not self.t_start < self.t_end:
            raise ValueError(f"empty interval [{self.t_start}, {self.t_end})")

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_start


def segments_from_boundaries(
    boundaries: list[Boundary], total_duration: float, kind: str = "audio"
) -> list[Segment]:
    """Split [0, total_duration) at the boundary times.

    The boundary score is carried as the confidence of the segment it opens.
    """
    times = [b.t for b in boundaries]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise UnsortedBoundaries(f"boundaries not strictly increasing: {times}")
    if times and not (0.0 < times[0] and times[-1] < total_duration):
        raise ValueError(f"boundaries must lie inside (0, {total_duration})")
    edges = [0.0] + times + [total_duration]
    scores = [None] + [b.score for b in boundaries]
    return [
        Segment(kind=kind, t_start=a, t_end=b, confidence=s)
        for a, b, s in zip(edges[:-1], edges[1:], scores)
    ]


def write_segments_csv(path, segments: list[Segment]) -> None:
    """Segment export: kind,t_start,t_end,score."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "t_start", "t_end", "score"])
            for s in segments:
                writer.writerow(
                    [s.kind, repr(s.t_start), repr(s.t_end), "" if s.confidence is None else repr(s.confidence)]
                )
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_segments_csv(path) -> list[Segment]:
    segments = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if not row:
                continue
            kind, t_start, t_end, score = row
            segments.append(
                Segment(
                    kind=kind,
                    t_start=float(t_start),
                    t_end=float(t_end),
                    confidence=float(score) if score else None,
                )
            )
    return segments
