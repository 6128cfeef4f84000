"""Media parsing: WAV audio, image frame sequences, and cached color histograms.

Video decoding is deliberately decoupled from analysis: frames can be turned
into a histogram cache file once, and every later run works from the cache.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptySequence,
    InconsistentDimensions,
    IoFailure,
    MalformedContainer,
    UnsupportedEncoding,
)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

HISTOGRAM_CACHE_MAGIC = "PVHIST v1"


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM audio with samples normalized to [-1.0, +1.0]."""

    sample_rate: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.size and float(np.abs(samples).max()) > 1.0 + 1e-12:
            raise ValueError("samples must lie in [-1.0, +1.0]")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames of identical size; frame i is at time i / fps.

    Images are uint8 arrays, (h, w) for grayscale or (h, w, 3) for RGB.
    """

    fps: float
    frames: list = field(repr=False)

    def __post_init__(self):
        if not self.frames:
            raise EmptySequence("frame sequence is empty")
        shape = self.frames[0].shape
        for i, frame in enumerate(self.frames):
            if frame.shape != shape:
                raise InconsistentDimensions(
                    f"frame {i} is {frame.shape[1]}x{frame.shape[0]}, "
                    f"expected {shape[1]}x{shape[0]}"
                )

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class HistogramSeries:
    """Per-frame L1-normalized histograms, one row per frame."""

    fps: float
    bins: int
    histograms: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.histograms, dtype=np.float64)
        object.__setattr__(self, "histograms", h)
        if h.ndim != 2 or h.shape[1] != self.bins:
            raise ValueError(f"histograms must be (n, {self.bins}), got {h.shape}")
        sums = h.sum(axis=1)
        if h.shape[0] and float(np.abs(sums - 1.0).max()) > 1e-9:
            raise ValueError("each histogram must sum to 1.0 within 1e-9")

    def __len__(self) -> int:
        return self.histograms.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.fps


def read_wav(path) -> AudioClip:
    """Parse a RIFF/WAVE file into a mono AudioClip.

    Accepts PCM 8/16/24-bit and 32-bit float, 1 or 2 channels. Stereo is
    downmixed by per-sample channel average.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer(f"{path}: not a RIFF/WAVE file")

    fmt_body = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedContainer(f"{path}: fmt chunk truncated")
            fmt_body = body
        elif chunk_id == b"data":
            if len(body) < size:
                raise MalformedContainer(f"{path}: data chunk truncated")
            payload = body
        # chunks are word-aligned: odd sizes carry one pad byte
        pos += 8 + size + (size & 1)

    if fmt_body is None or payload is None:
        raise MalformedContainer(f"{path}: missing fmt or data chunk")

    format_tag, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt_body, 0)
    if format_tag == WAVE_FORMAT_EXTENSIBLE:
        # sub-format GUID starts with the effective format tag
        if len(fmt_body) < 26:
            raise MalformedContainer(f"{path}: extensible fmt chunk truncated")
        (format_tag,) = struct.unpack_from("<H", fmt_body, 24)
    if format_tag not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedEncoding(f"{path}: format tag 0x{format_tag:04x} is not PCM/float")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {channels} channels (only mono/stereo)")

    if format_tag == WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(f"{path}: {bits}-bit float")
        samples = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    elif bits == 8:
        samples = (np.frombuffer(payload, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        samples = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 24:
        usable = len(payload) // 3 * 3
        b = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        raw = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        raw = (raw ^ 0x800000) - 0x800000
        samples = raw.astype(np.float64) / 8388608.0
    else:
        raise UnsupportedEncoding(f"{path}: {bits}-bit PCM")

    if channels == 2:
        samples = samples[: len(samples) // 2 * 2].reshape(-1, 2).mean(axis=1)
    return AudioClip(sample_rate=sample_rate, samples=np.clip(samples, -1.0, 1.0))


def write_wav(path, clip: AudioClip, bits: int = 16) -> None:
    """Write an AudioClip as mono PCM WAV (16-bit only)."""
    if bits != 16:
        raise UnsupportedEncoding(f"write_wav supports 16-bit PCM, got {bits}")
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    fmt = struct.pack(
        "<HHIIHH", WAVE_FORMAT_PCM, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16
    )
    out = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<I", len(fmt)),
            fmt,
            b"data",
            struct.pack("<I", len(payload)),
            payload,
        ]
    )
    try:
        Path(path).write_bytes(out)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def _read_pnm(path: Path) -> np.ndarray:
    """Read one PGM/PPM image (P2/P3 ASCII or P5/P6 binary)."""
    data = path.read_bytes()
    if len(data) < 2 or data[0:1] != b"P" or data[1:2] not in b"2356":
        raise MalformedContainer(f"{path}: not a PGM/PPM image")
    kind = data[1:2]

    # header tokens may be separated by whitespace and '#' comments
    tokens = []
    pos = 2
    while len(tokens) < 3 and pos < len(data):
        c = data[pos : pos + 1]
        if c == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise MalformedContainer(f"{path}: truncated header")
            continue
        if c.isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if len(tokens) < 3:
        raise MalformedContainer(f"{path}: truncated header")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise MalformedContainer(f"{path}: bad header") from e
    if maxval <= 0 or maxval > 255:
        raise UnsupportedEncoding(f"{path}: maxval {maxval} (8-bit only)")

    color = kind in (b"3", b"6")
    count = width * height * (3 if color else 1)
    if kind in (b"5", b"6"):
        pos += 1  # single whitespace byte after maxval
        pixels = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
        if pixels.size < count:
            raise MalformedContainer(f"{path}: pixel data truncated")
    else:
        values = data[pos:].split()
        if len(values) < count:
            raise MalformedContainer(f"{path}: pixel data truncated")
        pixels = np.array(values[:count], dtype=np.int64)
        if pixels.max(initial=0) > maxval:
            raise MalformedContainer(f"{path}: sample exceeds maxval")
        pixels = pixels.astype(np.uint8)
    if maxval != 255:
        pixels = (pixels.astype(np.uint32) * 255 // maxval).astype(np.uint8)
    shape = (height, width, 3) if color else (height, width)
    return pixels.reshape(shape)


def write_ppm(path, image: np.ndarray) -> None:
    """Write a uint8 image as binary PPM (P6) or PGM (P5)."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    magic = b"P6" if image.ndim == 3 else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, image.shape[1], image.shape[0])
    try:
        Path(path).write_bytes(header + image.tobytes())
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def _yuv_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # BT.601 limited range
    yf = (y.astype(np.float64) - 16.0) * (255.0 / 219.0)
    uf = u.astype(np.float64) - 128.0
    vf = v.astype(np.float64) - 128.0
    r = yf + 1.596 * vf
    g = yf - 0.392 * uf - 0.813 * vf
    b = yf + 2.017 * uf
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)


def _read_y4m(path: Path, fps: float | None) -> FrameSequence:
    data = path.read_bytes()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"YUV4MPEG2"):
        raise MalformedContainer(f"{path}: not a YUV4MPEG2 stream")
    width = height = None
    colorspace = "420"
    file_fps = None
    for token in data[9:nl].split():
        tag, val = token[:1], token[1:].decode("ascii", "replace")
        if tag == b"W":
            width = int(val)
        elif tag == b"H":
            height = int(val)
        elif tag == b"F":
            num, den = val.split(":")
            file_fps = int(num) / int(den)
        elif tag == b"C":
            colorspace = val
    if width is None or height is None:
        raise MalformedContainer(f"{path}: stream header lacks W/H")
    fps = file_fps if file_fps else fps
    if not fps:
        raise MalformedContainer(f"{path}: no frame rate in stream and none configured")

    if colorspace.startswith("420"):
        cw, ch = (width + 1) // 2, (height + 1) // 2
    elif colorspace.startswith("444"):
        cw, ch = width, height
    elif colorspace.startswith("mono"):
        cw = ch = 0
    else:
        raise UnsupportedEncoding(f"{path}: colorspace C{colorspace}")
    frame_bytes = width * height + 2 * cw * ch

    frames = []
    pos = nl + 1
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0 or data[pos : pos + 5] != b"FRAME":
            raise MalformedContainer(f"{path}: bad FRAME marker at byte {pos}")
        pos = end + 1
        if pos + frame_bytes > len(data):
            raise MalformedContainer(f"{path}: frame data truncated")
        y = np.frombuffer(data, np.uint8, width * height, pos).reshape(height, width)
        if cw:
            u = np.frombuffer(data, np.uint8, cw * ch, pos + width * height).reshape(ch, cw)
            v = np.frombuffer(data, np.uint8, cw * ch, pos + width * height + cw * ch).reshape(ch, cw)
            if (cw, ch) != (width, height):
                u = u.repeat(2, axis=0)[:height].repeat(2, axis=1)[:, :width]
                v = v.repeat(2, axis=0)[:height].repeat(2, axis=1)[:, :width]
            frames.append(_yuv_to_rgb(y, u, v))
        else:
            frames.append(y.copy())
        pos += frame_bytes
    if not frames:
        raise EmptySequence(f"{path}: stream holds no frames")
    return FrameSequence(fps=fps, frames=frames)


def read_frames(path, fps: float | None = None) -> FrameSequence:
    """Load a frame sequence from a directory of PGM/PPM images or a .y4m stream.

    Directory entries are taken in lexicographic order; `fps` is required for
    directories and used as a fallback when a stream lacks a rate header.
    """
    p = Path(path)
    if p.is_dir():
        names = sorted(
            f for f in p.iterdir() if f.suffix.lower() in (".pgm", ".ppm", ".pnm")
        )
        if not names:
            raise EmptySequence(f"{path}: no PGM/PPM frames found")
        if not fps:
            raise ValueError("fps is required when reading a frame directory")
        return FrameSequence(fps=fps, frames=[_read_pnm(f) for f in names])
    return _read_y4m(p, fps)


def compute_histograms(seq: FrameSequence, bins: int = 512, threads: int = 1) -> HistogramSeries:
    """Map every frame to an L1-normalized color histogram.

    For RGB frames `bins` must be a cube b**3 (default 8**3 = 512); channels
    are quantized to b levels each. Grayscale frames use `bins` flat levels.
    """
    color = seq.frames[0].ndim == 3

    if color:
        per_channel = round(bins ** (1 / 3))
        if per_channel**3 != bins:
            raise ValueError(f"bins={bins} is not a cube; RGB histograms need b**3")

    def one(frame: np.ndarray) -> np.ndarray:
        if color:
            q = (frame.astype(np.uint32) * per_channel) >> 8
            flat = (q[..., 0] * per_channel + q[..., 1]) * per_channel + q[..., 2]
        else:
            flat = (frame.astype(np.uint32) * bins) >> 8
        counts = np.bincount(flat.ravel(), minlength=bins).astype(np.float64)
        return counts / counts.sum()

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, seq.frames))
    else:
        rows = [one(f) for f in seq.frames]
    return HistogramSeries(fps=seq.fps, bins=bins, histograms=np.stack(rows))


def write_histogram_cache(path, series: HistogramSeries) -> None:
    """Write the cache format: a PVHIST header line, then one line per frame."""
    lines = [
        f"{HISTOGRAM_CACHE_MAGIC} fps={series.fps!r} bins={series.bins} frames={len(series)}"
    ]
    for row in series.histograms:
        lines.append(" ".join(repr(v) for v in row))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_histogram_cache(path) -> HistogramSeries:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HISTOGRAM_CACHE_MAGIC):
        raise MalformedContainer(f"{path}: missing {HISTOGRAM_CACHE_MAGIC} header")
    header = dict(kv.split("=", 1) for kv in lines[0].split()[2:])
    try:
        fps = float(header["fps"])
        bins = int(header["bins"])
        frames = int(header["frames"])
    except (KeyError, ValueError) as e:
        raise MalformedContainer(f"{path}: bad cache header") from e
    if len(lines) - 1 < frames:
        raise MalformedContainer(f"{path}: expected {frames} rows, found {len(lines) - 1}")
    rows = np.zeros((frames, bins))
    for i, line in enumerate(lines[1 : frames + 1]):
        values = line.split()
        if len(values) != bins:
            raise MalformedContainer(f"{path}: row {i} has {len(values)} values, expected {bins}")
        rows[i] = [float(v) for v in values]
    return HistogramSeries(fps=fps, bins=bins, histograms=rows)
