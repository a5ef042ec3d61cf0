"""Macroblock means of the importance volume and their mapping to QP offsets.

Importance is averaged per 16x16 macroblock (edge blocks average only
their in-frame pixels), rescaled to [0, 1], and mapped linearly to a
quantizer offset: full importance lowers QP by the range (finer
quantization, more bits), zero importance raises it symmetrically.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, TruncationError
from .map_engine import ImportanceVolume
from .video_io import MB

VDQP_MAGIC = b"VDQP"
VDQP_VERSION = 1

QP_OFFSET_RANGE = 10.0


@dataclass
class DeltaQpMap:
    mb_cols: int
    mb_rows: int
    frames: np.ndarray  # (frame_count, mb_rows, mb_cols) float32

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @classmethod
    def zeros(cls, mb_cols: int, mb_rows: int, frame_count: int) -> "DeltaQpMap":
        return cls(mb_cols, mb_rows,
                   np.zeros((frame_count, mb_rows, mb_cols), dtype=np.float32))


def block_means(vol: ImportanceVolume) -> np.ndarray:
    """Arithmetic mean of importance per macroblock, (frames, rows, cols) float64."""
    h, w = vol.height, vol.width
    row_starts = np.arange(0, h, MB)
    col_starts = np.arange(0, w, MB)
    sums = np.add.reduceat(
        np.add.reduceat(vol.maps.astype(np.int64), row_starts, axis=1),
        col_starts, axis=2)
    row_counts = np.minimum(row_starts + MB, h) - row_starts
    col_counts = np.minimum(col_starts + MB, w) - col_starts
    area = row_counts[:, None].astype(np.float64) * col_counts[None, :]
    return sums / area


def to_delta_qp(means: np.ndarray, qp_range: float = QP_OFFSET_RANGE) -> DeltaQpMap:
    """Linear map of normalized importance v = mean/255 to qp_range*(1 - 2v).

    v = 1 gives -qp_range (finest), v = 0 gives +qp_range, v = 0.5 gives 0.
    """
    v = np.asarray(means, dtype=np.float64) / 255.0
    dqp = np.clip(qp_range * (1.0 - 2.0 * v), -qp_range, qp_range)
    frames = dqp.astype(np.float32)
    return DeltaQpMap(mb_cols=frames.shape[2], mb_rows=frames.shape[1], frames=frames)


def volume_to_delta_qp(vol: ImportanceVolume, qp_range: float = QP_OFFSET_RANGE) -> DeltaQpMap:
    return to_delta_qp(block_means(vol), qp_range)


def serialize_qpmap(dqp: DeltaQpMap, sink) -> int:
    header = VDQP_MAGIC + struct.pack(
        "<IIII", VDQP_VERSION, dqp.mb_cols, dqp.mb_rows, dqp.frame_count)
    written = sink.write(header)
    written += sink.write(dqp.frames.astype("<f4").tobytes())
    return written


def qpmap_bytes(dqp: DeltaQpMap) -> bytes:
    buf = io.BytesIO()
    serialize_qpmap(dqp, buf)
    return buf.getvalue()


def parse_qpmap(stream) -> DeltaQpMap:
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    data = bytes(data)
    if data[:4] != VDQP_MAGIC:
        raise FormatError(f"bad qp-map magic {data[:4]!r}")
    if len(data) < 20:
        raise TruncationError("qp-map header truncated")
    version, mb_cols, mb_rows, frame_count = struct.unpack_from("<IIII", data, 4)
    if version != VDQP_VERSION:
        raise FormatError(f"unsupported qp-map version {version}")
    if mb_cols == 0 or mb_rows == 0 or frame_count == 0:
        raise FormatError("qp-map header declares zero dimension")
    expected = 20 + mb_cols * mb_rows * frame_count * 4
    if len(data) != expected:
        raise (TruncationError if len(data) < expected else FormatError)(
            f"qp-map payload is {len(data)} bytes, expected {expected}")
    frames = np.frombuffer(data, dtype="<f4", offset=20).reshape(
        frame_count, mb_rows, mb_cols)
    return DeltaQpMap(mb_cols, mb_rows, frames.copy())
