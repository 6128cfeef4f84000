"""Bottom-up speaker clustering, motion-consistency hints, and MFCC scatter.

Clustering reuses the segmentation features: the merge score for two
clusters is the same split score used for change detection, applied to
their concatenated features at the junction. Pairs merge while the most
negative score stays below zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .audio_features import FeatureSequence, extract_features
from .errors import InsufficientSamples, IoFailure
from .media_io import AudioClip
from .audio_segmentation import bic_delta
from .segments import Segment

VALID_SCATTER_LABELS = ("female", "male", "film", "silence", "unlabeled")
DEFAULT_SCATTER_PAIRS = ((1, 2), (2, 3), (3, 4))


@dataclass(frozen=True)
class Cluster:
    id: int
    member_segments: tuple
    label: str | None = None


@dataclass(frozen=True)
class MotionHint:
    """Adjacent audio segments whose surrounding video activity stayed steady."""

    left_index: int
    right_index: int
    cv: float


@dataclass(frozen=True)
class LabeledClip:
    clip_id: str
    clip: AudioClip
    label: str = "unlabeled"

    def __post_init__(self):
        if self.label not in VALID_SCATTER_LABELS:
            raise ValueError(f"label must be one of {VALID_SCATTER_LABELS}")


@dataclass(frozen=True)
class ScatterPoint:
    clip_id: str
    label: str
    coords: tuple

    def __post_init__(self):
        if not all(np.isfinite(c) for c in self.coords):
            raise ValueError("scatter coords must be finite")


def _segment_features(segment: Segment, features: FeatureSequence) -> np.ndarray:
    times = features.times()
    mask = (times >= segment.t_start) & (times < segment.t_end)
    return features.matrix()[mask]


def cluster_segments(
    segments: list[Segment],
    features: FeatureSequence,
    penalty_weight: float = 1.0,
    hints: list[MotionHint] | None = None,
    hint_bonus: float = 0.0,
) -> list[Cluster]:
    """Greedy agglomeration of segments by merge score.

    Each round merges the pair with the most negative junction score
    (lowest-index pair on ties) and stops when every pair scores >= 0.
    Hints subtract hint_bonus from pairs joining hinted adjacent segments;
    with the default bonus of 0 they are advisory only.
    """
    dim = 13
    members: list[list[int]] = []
    feats: list[np.ndarray] = []
    for i, segment in enumerate(segments):
        x = _segment_features(segment, features)
        if x.shape[0] < 2 * (dim + 1):
            raise InsufficientSamples(
                f"segment {i} has {x.shape[0]} frames, needs {2 * (dim + 1)}"
            )
        members.append([i])
        feats.append(x)

    hinted = {(h.left_index, h.right_index) for h in (hints or [])}

    def pair_delta(a: int, b: int) -> float:
        delta = bic_delta(np.vstack([feats[a], feats[b]]), len(feats[a]), penalty_weight)
        crosses_hint = any(
            (l in members[a] and r in members[b]) or (l in members[b] and r in members[a])
            for l, r in hinted
        )
        return delta - hint_bonus if crosses_hint else delta

    while len(members) > 1:
        best = None
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                delta = pair_delta(a, b)
                if delta < 0 and (best is None or delta < best[0]):
                    best = (delta, a, b)
        if best is None:
            break
        _, a, b = best
        merged = sorted(members[a] + members[b], key=lambda i: segments[i].t_start)
        members[a] = merged
        feats[a] = np.vstack([_segment_features(segments[i], features) for i in merged])
        del members[b], feats[b]

    members.sort(key=lambda m: segments[m[0]].t_start)
    return [
        Cluster(id=cid, member_segments=tuple(segments[i] for i in member))
        for cid, member in enumerate(members)
    ]


def motion_consistency_hints(
    audio_segments: list[Segment], activity, cv_threshold: float = 0.3
) -> list[MotionHint]:
    """Hint adjacent segment pairs whose video activity varies little.

    The coefficient of variation of the activity over the pair's union span
    must stay below cv_threshold; an all-zero span counts as perfectly steady.
    """
    hints = []
    for i in range(len(audio_segments) - 1):
        left, right = audio_segments[i], audio_segments[i + 1]
        lo = int(np.floor(left.t_start / activity.bin_duration_s))
        hi = int(np.ceil(right.t_end / activity.bin_duration_s))
        span = activity.values[max(lo, 0) : hi]
        if span.size == 0:
            continue
        mean = span.mean()
        cv = 0.0 if mean == 0 else float(span.std() / mean)
        if cv < cv_threshold:
            hints.append(MotionHint(left_index=i, right_index=i + 1, cv=cv))
    return hints


def mfcc_scatter(
    clips: list[LabeledClip], pairs: tuple = DEFAULT_SCATTER_PAIRS
) -> dict[tuple, list[ScatterPoint]]:
    """One point per clip per coefficient pair: the clip's mean MFCC values."""
    for i, j in pairs:
        if not (1 <= i <= 12 and 1 <= j <= 12):
            raise ValueError(f"coefficient indices must be in 1..12, got ({i}, {j})")
    means = {}
    for lc in clips:
        means[lc.clip_id] = extract_features(lc.clip).matrix().mean(axis=0)
    out = {}
    for pair in pairs:
        i, j = pair
        out[pair] = [
            ScatterPoint(
                clip_id=lc.clip_id,
                label=lc.label,
                coords=(float(means[lc.clip_id][i]), float(means[lc.clip_id][j])),
            )
            for lc in clips
        ]
    return out


def write_clusters_csv(path, clusters: list[Cluster]) -> None:
    """Cluster export: cluster_id,t_start,t_end, one row per member segment."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cluster_id", "t_start", "t_end"])
            for cluster in clusters:
                for segment in cluster.member_segments:
                    writer.writerow([cluster.id, repr(segment.t_start), repr(segment.t_end)])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def write_scatter_csv(path, scatter: dict) -> None:
    """Scatter export: pair,clip_id,label,x,y."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["pair", "clip_id", "label", "x", "y"])
            for (i, j), points in scatter.items():
                for p in points:
                    writer.writerow([f"c{i}-c{j}", p.clip_id, p.label, repr(p.coords[0]), repr(p.coords[1])])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
