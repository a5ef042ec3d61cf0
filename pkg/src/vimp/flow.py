"""Dense forward optical flow between consecutive frames.

The native estimator is exhaustive block-matching SAD with bilinear
upsampling of the block-center displacements; externally computed flow
(e.g. from a variational estimator) can be imported through the same
binary format.  Fields map content at frame t to its position in t+1.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import FormatError, TruncationError
from .video_io import FrameBuffer, FrameSequence

VFLO_MAGIC = b"VFLO"
VFLO_VERSION = 1


@dataclass
class FlowParams:
    block: int = 16
    search_range: int = 24
    step: int = 1  # refinement stride reserved for diamond-search variants

    def validate(self) -> None:
        if self.block < 4:
            raise ValueError(f"block size {self.block} must be >= 4")
        if self.search_range < 1:
            raise ValueError(f"search range {self.search_range} must be >= 1")


@dataclass
class FlowField:
    from_frame: int
    dx: np.ndarray  # float32 (h, w)
    dy: np.ndarray  # float32 (h, w)


def _upsample_bilinear(block_vals: np.ndarray, block: int, h: int, w: int) -> np.ndarray:
    """Bilinear interpolation of per-block values to per-pixel, edge-replicated.

    Anchors sit at pixel (bx*block + block//2, by*block + block//2), so the
    per-pixel field at each block's anchor equals the block value exactly.
    """
    rows, cols = block_vals.shape
    center = block // 2
    gy = (np.arange(h, dtype=np.float64) - center) / block
    gx = (np.arange(w, dtype=np.float64) - center) / block
    y0 = np.clip(np.floor(gy), 0, rows - 1).astype(np.int64)
    x0 = np.clip(np.floor(gx), 0, cols - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, rows - 1)
    x1 = np.minimum(x0 + 1, cols - 1)
    wy = np.clip(gy - y0, 0.0, 1.0)[:, None]
    wx = np.clip(gx - x0, 0.0, 1.0)[None, :]
    v = block_vals.astype(np.float64)
    out = ((1.0 - wy) * (1.0 - wx) * v[np.ix_(y0, x0)]
           + (1.0 - wy) * wx * v[np.ix_(y0, x1)]
           + wy * (1.0 - wx) * v[np.ix_(y1, x0)]
           + wy * wx * v[np.ix_(y1, x1)])
    return out.astype(np.float32)


def estimate_flow(a, b, params: FlowParams | None = None) -> FlowField:
    """Block-matching flow from frame ``a`` to ``b`` (same dimensions).

    Per-block integer displacement minimizes luma SAD over the full
    ±search_range window (out-of-frame samples clamp to the border);
    ties break on smallest |dx|+|dy|, then dy, then dx, so the result is
    deterministic.  The per-pixel field is the bilinear upsampling of
    the block-center displacement grid.
    """
    params = params or FlowParams()
    params.validate()
    from_frame = 0
    if isinstance(a, FrameBuffer):
        from_frame = a.index
        a = a.luma
    if isinstance(b, FrameBuffer):
        b = b.luma
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    h, w = a.shape
    bdx, bdy = kernels.sad_search(a, b, params.block, params.search_range)
    dx = _upsample_bilinear(bdx, params.block, h, w)
    dy = _upsample_bilinear(bdy, params.block, h, w)
    return FlowField(from_frame=from_frame, dx=dx, dy=dy)


class FlowStore:
    """Keyed store of flow fields with optional file persistence."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._fields: dict[int, FlowField] = {}
        if self.path is not None and self.path.exists():
            with open(self.path, "rb") as fh:
                for f in import_flow(fh):
                    self._fields[f.from_frame] = f

    def get(self, from_frame: int) -> FlowField | None:
        return self._fields.get(from_frame)

    def put(self, f: FlowField) -> None:
        if self._fields:
            ref = next(iter(self._fields.values()))
            if f.dx.shape != ref.dx.shape:
                raise ValueError(f"field shape {f.dx.shape} differs from {ref.dx.shape}")
        self._fields[f.from_frame] = f

    def __len__(self) -> int:
        return len(self._fields)

    def fields(self) -> list[FlowField]:
        return [self._fields[k] for k in sorted(self._fields)]

    def flush(self) -> None:
        if self.path is None or not self._fields:
            return
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            export_flow(self.fields(), fh)
        tmp.replace(self.path)


def precompute_sequence(seq: FrameSequence, params: FlowParams | None = None,
                        store: FlowStore | None = None) -> int:
    """Estimate and persist flow for every consecutive frame pair.

    Fields are stored at the unpadded video dimensions.  Pairs already
    in the store are not re-estimated.  Returns the number of fields
    covering the sequence after the call (frame count - 1).
    """
    if seq.frame_count < 2:
        raise ValueError("need at least 2 frames to compute flow")
    store = store if store is not None else FlowStore()
    oh, ow = seq.orig_height, seq.orig_width
    for t in range(seq.frame_count - 1):
        if store.get(t) is not None:
            continue
        f = estimate_flow(seq.frames[t], seq.frames[t + 1], params)
        store.put(FlowField(t, f.dx[:oh, :ow].copy(), f.dy[:oh, :ow].copy()))
    store.flush()
    return seq.frame_count - 1


def export_flow(fields: list[FlowField], sink) -> int:
    if not fields:
        raise ValueError("no fields to export")
    h, w = fields[0].dx.shape
    written = sink.write(VFLO_MAGIC + struct.pack("<IIII", VFLO_VERSION, w, h, len(fields)))
    for f in fields:
        if f.dx.shape != (h, w) or f.dy.shape != (h, w):
            raise ValueError("inconsistent field dimensions")
        written += sink.write(struct.pack("<I", f.from_frame))
        written += sink.write(f.dx.astype("<f4").tobytes())
        written += sink.write(f.dy.astype("<f4").tobytes())
    return written


def flow_bytes(fields: list[FlowField]) -> bytes:
    buf = io.BytesIO()
    export_flow(fields, buf)
    return buf.getvalue()


def import_flow(stream) -> list[FlowField]:
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    data = bytes(data)
    if data[:4] != VFLO_MAGIC:
        raise FormatError(f"bad flow magic {data[:4]!r}")
    if len(data) < 20:
        raise TruncationError("flow header truncated")
    version, w, h, count = struct.unpack_from("<IIII", data, 4)
    if version != VFLO_VERSION:
        raise FormatError(f"unsupported flow version {version}")
    if w == 0 or h == 0:
        raise FormatError("flow header declares zero dimension")
    grid_bytes = w * h * 4
    fields = []
    pos = 20
    for k in range(count):
        if len(data) - pos < 4 + 2 * grid_bytes:
            raise TruncationError(f"flow payload truncated at field {k}", index=k)
        (from_frame,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dx = np.frombuffer(data, dtype="<f4", count=w * h, offset=pos).reshape(h, w)
        pos += grid_bytes
        dy = np.frombuffer(data, dtype="<f4", count=w * h, offset=pos).reshape(h, w)
        pos += grid_bytes
        fields.append(FlowField(from_frame, dx.copy(), dy.copy()))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after flow payload")
    return fields
