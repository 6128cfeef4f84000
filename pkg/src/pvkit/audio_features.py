"""Sparse MFCC feature extraction and the audio amplitude activity graph.

Framing is deliberately sparse: with the default 8 sample sets per second and
set lengths of sample_rate/62.5, each set covers roughly an eighth of a
syllable and consecutive sets do not overlap.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .errors import ClipTooShort, IoFailure
from .media_io import AudioClip

N_COEFFS = 13
N_FILTERS = 26
LOG_FLOOR = 1e-10

DEFAULT_SETS_PER_SECOND = 8.0
SET_LENGTH_DIVISOR = 62.5


@dataclass(frozen=True)
class FeatureFrame:
    """13 MFCC values (c0..c12) for the sample set starting at t_start."""

    t_start: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        object.__setattr__(self, "coeffs", c)
        if c.shape != (N_COEFFS,):
            raise ValueError(f"expected {N_COEFFS} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")


@dataclass(frozen=True)
class FeatureSequence:
    frames: list
    sets_per_second: float
    set_length_samples: int

    def __len__(self) -> int:
        return len(self.frames)

    def matrix(self) -> np.ndarray:
        """Frames stacked as an (n, 13) array."""
        return np.array([f.coeffs for f in self.frames])

    def times(self) -> np.ndarray:
        return np.array([f.t_start for f in self.frames])

    @property
    def duration_s(self) -> float:
        if not self.frames:
            return 0.0
        return self.frames[-1].t_start + 1.0 / self.sets_per_second


@dataclass(frozen=True)
class ActivityGraph:
    """Per-bin activity: RMS amplitude for audio, adjacent-frame change for video."""

    kind: str
    values: np.ndarray = field(repr=False)
    bin_duration_s: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if self.kind not in ("audio", "video"):
            raise ValueError(f"kind must be audio or video, got {self.kind!r}")
        if v.size and v.min() < 0:
            raise ValueError("activity values must be nonnegative")
        if self.kind == "audio" and v.size and v.max() > 1.0 + 1e-9:
            raise ValueError("audio activity must not exceed 1.0")

    @property
    def duration_s(self) -> float:
        return len(self.values) * self.bin_duration_s


def auto_set_length(sample_rate: int) -> int:
    """Set length in samples for a rate: sample_rate / 62.5 (512 at 32 kHz)."""
    return round(sample_rate / SET_LENGTH_DIVISOR)


def frame_audio(
    clip: AudioClip,
    sets_per_second: float = DEFAULT_SETS_PER_SECOND,
    set_length: int | None = None,
) -> list[tuple[int, np.ndarray]]:
    """Cut the clip into sample sets; returns (start_sample, window) pairs.

    Windows start every sample_rate/sets_per_second samples; a final partial
    window is dropped.
    """
    if set_length is None:
        set_length = auto_set_length(clip.sample_rate)
    n = len(clip.samples)
    if n < set_length:
        raise ClipTooShort(f"{n} samples < one set of {set_length}")
    hop = clip.sample_rate / sets_per_second
    count = int((n - set_length) // hop) + 1
    out = []
    for i in range(count):
        start = min(round(i * hop), n - set_length)
        out.append((start, clip.samples[start : start + set_length]))
    return out


def mel_from_hz(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def hz_from_mel(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(
    sample_rate: int, n_fft: int, n_filters: int = N_FILTERS
) -> tuple[np.ndarray, np.ndarray]:
    """Triangular filters with mel-spaced corners from 0 to sample_rate/2.

    Returns (weights, centers_hz) where weights is (n_filters, n_fft//2 + 1);
    triangle flanks are linear in Hz between the corner frequencies.
    """
    corners_hz = hz_from_mel(np.linspace(0.0, float(mel_from_hz(sample_rate / 2)), n_filters + 2))
    bin_hz = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    weights = np.zeros((n_filters, bin_hz.size))
    for i in range(n_filters):
        left, center, right = corners_hz[i], corners_hz[i + 1], corners_hz[i + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        weights[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights, corners_hz[1:-1]


def _next_pow2(n: int) -> int:
    size = 1
    while size < n:
        size *= 2
    return size


def mfcc(window: np.ndarray, sample_rate: int) -> np.ndarray:
    """MFCC of one sample set: Hann window, magnitude spectrum, 26 mel
    filters, floored log, DCT-II; returns c0..c12."""
    window = np.asarray(window, dtype=np.float64)
    if window.size < 32:
        raise ClipTooShort(f"window of {window.size} samples is below the 32-sample minimum")
    tapered = window * np.hanning(window.size)
    n_fft = _next_pow2(window.size)
    spectrum = np.abs(np.fft.rfft(tapered, n_fft))
    weights, _ = mel_filterbank(sample_rate, n_fft)
    energies = weights @ spectrum
    log_energies = np.log(np.maximum(energies, LOG_FLOOR))
    return dct(log_energies, type=2, norm="ortho")[:N_COEFFS]


def extract_features(
    clip: AudioClip,
    sets_per_second: float = DEFAULT_SETS_PER_SECOND,
    set_length: int | None = None,
) -> FeatureSequence:
    """Frame the clip and compute MFCCs, in time order."""
    if set_length is None:
        set_length = auto_set_length(clip.sample_rate)
    frames = [
        FeatureFrame(t_start=start / clip.sample_rate, coeffs=mfcc(window, clip.sample_rate))
        for start, window in frame_audio(clip, sets_per_second, set_length)
    ]
    return FeatureSequence(
        frames=frames, sets_per_second=sets_per_second, set_length_samples=set_length
    )


def amplitude_envelope(clip: AudioClip, bin_duration_s: float = 0.5) -> ActivityGraph:
    """Per-bin RMS amplitude; a full-scale square wave maps to 1.0."""
    if bin_duration_s <= 0:
        raise ValueError("bin_duration_s must be positive")
    bin_samples = max(1, round(bin_duration_s * clip.sample_rate))
    n_bins = int(np.ceil(len(clip.samples) / bin_samples))
    values = np.zeros(n_bins)
    for i in range(n_bins):
        chunk = clip.samples[i * bin_samples : (i + 1) * bin_samples]
        values[i] = np.sqrt(np.mean(chunk**2))
    return ActivityGraph(kind="audio", values=values, bin_duration_s=bin_duration_s)


def write_features_csv(path, features: FeatureSequence) -> None:
    """Feature dump: header t_start,c0..c12, one row per frame."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_start"] + [f"c{i}" for i in range(N_COEFFS)])
            for frame in features.frames:
                writer.writerow([repr(frame.t_start)] + [repr(c) for c in frame.coeffs])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
