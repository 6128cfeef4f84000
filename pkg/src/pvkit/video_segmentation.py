"""Shot boundary detection from frame-to-frame histogram change.

The activity series is the L1 distance between consecutive frame histograms.
A candidate cut is judged by how far the change at the junction of two
adjacent windows sticks out above the mean change across both windows,
measured in pooled standard deviations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_features import ActivityGraph
from .errors import BinMismatch, EmptySegment, EmptySequence, SeriesTooShort
from .media_io import HistogramSeries
from .segments import Boundary, Segment


@dataclass(frozen=True)
class ShotConfig:
    window_s: float = 4.0
    deviation_k: float = 3.0
    min_shot_s: float = 1.0

    def __post_init__(self):
        if self.window_s <= 0 or self.deviation_k <= 0:
            raise ValueError("window_s and deviation_k must be positive")


@dataclass(frozen=True)
class KeyframeRef:
    """A representative frame for a segment."""

    frame_index: int
    t: float


def frame_distance(h1: np.ndarray, h2: np.ndarray) -> float:
    """L1 distance between two normalized histograms, in [0, 2]."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise BinMismatch(f"histogram sizes differ: {h1.shape} vs {h2.shape}")
    return float(np.abs(h1 - h2).sum())


def video_activity(hs: HistogramSeries) -> ActivityGraph:
    """Adjacent-frame histogram distance; value i covers the step i -> i+1."""
    if len(hs) < 2:
        raise EmptySequence("activity needs at least 2 frames")
    h = hs.histograms
    values = np.abs(h[1:] - h[:-1]).sum(axis=1)
    return ActivityGraph(kind="video", values=values, bin_duration_s=1.0 / hs.fps)


def detect_shots(hs: HistogramSeries, cfg: ShotConfig = ShotConfig()) -> list[Boundary]:
    """Find shot boundaries; stronger candidates suppress weaker neighbors.

    For a candidate cut before frame c+1, the two windows cover activity
    steps [c-w, c) and [c, c+w). The cut is declared when the junction step
    d[c] exceeds the mean over both windows by deviation_k pooled standard
    deviations. Candidates within min_shot_s keep only the largest deviation
    (earlier wins ties).
    """
    if len(hs) / hs.fps < 2 * cfg.window_s:
        raise SeriesTooShort(
            f"{len(hs)} frames span {len(hs) / hs.fps:.2f}s < two windows of {cfg.window_s}s"
        )
    activity = video_activity(hs).values
    w = max(1, round(cfg.window_s * hs.fps))
    candidates = []
    for c in range(w, len(activity) - w + 1):
        pooled = activity[c - w : c + w]
        mu = pooled.mean()
        sigma = pooled.std()
        if activity[c] - mu > cfg.deviation_k * sigma:
            z = (activity[c] - mu) / sigma
            candidates.append((z, (c + 1) / hs.fps))

    candidates.sort(key=lambda cand: (-cand[0], cand[1]))
    kept: list[Boundary] = []
    for z, t in candidates:
        if all(abs(t - b.t) >= cfg.min_shot_s for b in kept):
            kept.append(Boundary(t=t, score=z))
    kept.sort(key=lambda b: b.t)
    return kept


def select_keyframe(hs: HistogramSeries, segment: Segment) -> KeyframeRef:
    """The frame closest (L1) to the segment's mean histogram; earliest wins ties."""
    first = int(np.ceil(segment.t_start * hs.fps - 1e-9))
    last = int(np.ceil(segment.t_end * hs.fps - 1e-9))  # exclusive
    first = max(first, 0)
    last = min(last, len(hs))
    if first >= last:
        raise EmptySegment(f"no frames in [{segment.t_start}, {segment.t_end})")
    window = hs.histograms[first:last]
    mean = window.mean(axis=0)
    distances = np.abs(window - mean).sum(axis=1)
    index = first + int(np.argmin(distances))
    return KeyframeRef(frame_index=index, t=index / hs.fps)
