"""Importance-map state: paint/erase strokes, normalization, aggregation.

Maps are byte grids, one per frame, initialized to the neutral value 127.
Brush and eraser are additive kernels that decay linearly to zero at the
brush radius.  Normalization rescales the whole spatio-temporal volume to
a mean of 127 so that raising importance somewhere costs importance
elsewhere.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FormatError, TruncationError

NEUTRAL = 127
VIMP_MAGIC = b"VIMP"
VIMP_VERSION = 1

POLARITIES = ("paint", "erase")


@dataclass
class ImportanceVolume:
    """Per-frame importance grids at the unpadded video dimensions."""

    width: int
    height: int
    maps: np.ndarray  # (frames, height, width) uint8

    @property
    def frame_count(self) -> int:
        return self.maps.shape[0]

    def copy(self) -> "ImportanceVolume":
        return ImportanceVolume(self.width, self.height, self.maps.copy())

    def mean(self) -> float:
        return float(self.maps.mean(dtype=np.float64))


@dataclass
class Stroke:
    frame: int
    cx: float
    cy: float
    radius: float
    strength: int
    polarity: str  # "paint" | "erase"

    def validate(self, width: int, height: int, frames: int) -> None:
        if not 0 <= self.frame < frames:
            raise ValueError(f"stroke frame {self.frame} out of range 0..{frames - 1}")
        if not (0 <= self.cx < width and 0 <= self.cy < height):
            raise ValueError(f"stroke center ({self.cx}, {self.cy}) outside {width}x{height}")
        if self.radius < 1:
            raise ValueError(f"stroke radius {self.radius} must be >= 1")
        if not 0 <= self.strength <= 255:
            raise ValueError(f"stroke strength {self.strength} must be a byte")
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")


@dataclass
class StrokeDelta:
    """Sparse signed delta: values[dy, dx] applies to pixel (x0+dx, y0+dy)."""

    frame: int
    x0: int
    y0: int
    values: np.ndarray  # int16


class NormalizeResult(NamedTuple):
    volume: ImportanceVolume
    scale: float
    degenerate: bool


def new_volume(width: int, height: int, frames: int) -> ImportanceVolume:
    if width <= 0 or height <= 0 or frames <= 0:
        raise ValueError(f"dimensions must be positive, got {width}x{height}x{frames}")
    maps = np.full((frames, height, width), NEUTRAL, dtype=np.uint8)
    return ImportanceVolume(width, height, maps)


def stroke_kernel(stroke: Stroke) -> StrokeDelta:
    """Radially decaying additive kernel: ±strength * max(0, 1 - d/radius)."""
    if stroke.radius < 1:
        raise ValueError("radius must be >= 1")
    if stroke.polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {stroke.polarity!r}")
    r = float(stroke.radius)
    x0 = int(np.floor(stroke.cx - r))
    x1 = int(np.ceil(stroke.cx + r))
    y0 = int(np.floor(stroke.cy - r))
    y1 = int(np.ceil(stroke.cy + r))
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    dist = np.hypot(xs[None, :] - stroke.cx, ys[:, None] - stroke.cy)
    falloff = np.maximum(0.0, 1.0 - dist / r)
    sign = 1.0 if stroke.polarity == "paint" else -1.0
    values = np.floor(stroke.strength * falloff + 0.5) * sign
    return StrokeDelta(stroke.frame, x0, y0, values.astype(np.int16))


def _delta_window(delta: StrokeDelta, width: int, height: int):
    """Intersection of the delta bounding box with the frame, or None."""
    dh, dw = delta.values.shape
    x0 = max(delta.x0, 0)
    y0 = max(delta.y0, 0)
    x1 = min(delta.x0 + dw, width)
    y1 = min(delta.y0 + dh, height)
    if x0 >= x1 or y0 >= y1:
        return None
    sub = delta.values[y0 - delta.y0:y1 - delta.y0, x0 - delta.x0:x1 - delta.x0]
    return x0, y0, x1, y1, sub


def apply_delta_inplace(vol: ImportanceVolume, delta: StrokeDelta) -> None:
    if not 0 <= delta.frame < vol.frame_count:
        raise ValueError(f"delta frame {delta.frame} out of range")
    win = _delta_window(delta, vol.width, vol.height)
    if win is None:
        return
    x0, y0, x1, y1, sub = win
    region = vol.maps[delta.frame, y0:y1, x0:x1].astype(np.int16)
    vol.maps[delta.frame, y0:y1, x0:x1] = np.clip(region + sub, 0, 255).astype(np.uint8)


def apply_delta(vol: ImportanceVolume, delta: StrokeDelta) -> ImportanceVolume:
    """clamp(map + delta) on the delta's frame; other frames untouched."""
    out = vol.copy()
    apply_delta_inplace(out, delta)
    return out


def normalize(vol: ImportanceVolume, max_iterations: int = 8) -> NormalizeResult:
    """Rescale so the volume-wide mean lands within 127 ± 0.5.

    Multiplicative scaling v' = clamp(round(v*s)) with s refined
    iteratively because clamping at 255 shifts the post-scale mean.
    A near-black volume (mean < 1.0) has no expressed preference and
    normalizes to uniform 127 with the scale flagged degenerate.
    """
    if vol.maps.size == 0:
        raise ValueError("cannot normalize an empty volume")
    counts = np.bincount(vol.maps.ravel(), minlength=256).astype(np.float64)
    n = float(vol.maps.size)
    values = np.arange(256, dtype=np.float64)
    mean = float(counts @ values / n)
    if mean < 1.0:
        uniform = ImportanceVolume(
            vol.width, vol.height, np.full_like(vol.maps, NEUTRAL))
        return NormalizeResult(uniform, float("nan"), True)

    scale = 1.0
    for _ in range(max_iterations):
        if abs(mean - 127.0) <= 0.5:
            break
        scale *= 127.0 / mean
        lut = np.clip(np.floor(values * scale + 0.5), 0, 255)
        mean = float(counts @ lut / n)
    lut = np.clip(np.floor(values * scale + 0.5), 0, 255).astype(np.uint8)
    out = ImportanceVolume(vol.width, vol.height, lut[vol.maps])
    return NormalizeResult(out, scale, False)


def average_volumes(volumes: list[ImportanceVolume]) -> ImportanceVolume:
    """Per-pixel arithmetic mean across annotators, rounded to bytes."""
    if not volumes:
        raise ValueError("need at least one volume to average")
    first = volumes[0]
    for v in volumes[1:]:
        if v.maps.shape != first.maps.shape:
            raise ValueError(
                f"volume shape {v.maps.shape} differs from {first.maps.shape}")
    total = np.zeros(first.maps.shape, dtype=np.int64)
    for v in volumes:
        total += v.maps
    mean = total.astype(np.float64) / len(volumes)
    return ImportanceVolume(
        first.width, first.height,
        np.floor(mean + 0.5).astype(np.uint8))


def write_vimp(vol: ImportanceVolume, sink) -> int:
    """Importance-volume binary format: magic, version, dims, raw byte grids."""
    header = VIMP_MAGIC + struct.pack(
        "<IIII", VIMP_VERSION, vol.width, vol.height, vol.frame_count)
    written = sink.write(header)
    written += sink.write(np.ascontiguousarray(vol.maps).tobytes())
    return written


def vimp_bytes(vol: ImportanceVolume) -> bytes:
    buf = io.BytesIO()
    write_vimp(vol, buf)
    return buf.getvalue()


def read_vimp(stream) -> ImportanceVolume:
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    data = bytes(data)
    if data[:4] != VIMP_MAGIC:
        raise FormatError(f"bad importance-volume magic {data[:4]!r}")
    if len(data) < 20:
        raise TruncationError("importance-volume header truncated")
    version, width, height, frames = struct.unpack_from("<IIII", data, 4)
    if version != VIMP_VERSION:
        raise FormatError(f"unsupported importance-volume version {version}")
    if width == 0 or height == 0 or frames == 0:
        raise FormatError("importance-volume header declares zero dimension")
    expected = 20 + width * height * frames
    if len(data) < expected:
        raise TruncationError(
            f"importance-volume payload truncated ({len(data)} of {expected} bytes)")
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after payload")
    maps = np.frombuffer(data, dtype=np.uint8, offset=20).reshape(frames, height, width)
    return ImportanceVolume(width, height, maps.copy())
