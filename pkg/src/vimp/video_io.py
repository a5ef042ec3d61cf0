"""Y4M (YUV4MPEG2) decoding/encoding and frame-level analysis.

Frames are stored padded to multiples of 16 (edge replication) so the
macroblock grid tiles exactly; the pre-padding dimensions are kept on
the sequence.  Only planar 4:2:0 and mono streams are supported.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, TruncationError

MB = 16

_C420_TOKENS = {"420", "420jpeg", "420mpeg2", "420paldv"}


def _pad_to_multiple(plane: np.ndarray, multiple: int) -> np.ndarray:
    h, w = plane.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return plane
    return np.pad(plane, ((0, ph), (0, pw)), mode="edge")


@dataclass
class FrameBuffer:
    """One decoded frame; planes are padded, luma is (height, width) uint8."""

    luma: np.ndarray
    chroma_u: np.ndarray | None
    chroma_v: np.ndarray | None
    index: int


@dataclass
class FrameSequence:
    width: int          # padded, multiple of 16
    height: int         # padded, multiple of 16
    orig_width: int
    orig_height: int
    fps_num: int
    fps_den: int
    chroma_mode: str    # "mono" or "420"
    frames: list[FrameBuffer] = field(default_factory=list)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def duration_seconds(self) -> float:
        return len(self.frames) * self.fps_den / self.fps_num

    @property
    def mb_cols(self) -> int:
        return self.width // MB

    @property
    def mb_rows(self) -> int:
        return self.height // MB


@dataclass
class EdgeMask:
    magnitude: np.ndarray  # uint8, same shape as the source luma
    threshold: int


def _parse_header(line: bytes) -> tuple[int, int, int, int, str]:
    tokens = line.split(b" ")
    if tokens[0] != b"YUV4MPEG2":
        raise FormatError(f"not a YUV4MPEG2 stream (signature {tokens[0][:16]!r})")
    width = height = None
    fps_num, fps_den = None, None
    chroma = "420jpeg"
    for tok in tokens[1:]:
        if not tok:
            continue
        key, val = tok[:1], tok[1:].decode("ascii", "replace")
        if key == b"W":
            width = _parse_int(tok, val)
        elif key == b"H":
            height = _parse_int(tok, val)
        elif key == b"F":
            if ":" not in val:
                raise FormatError(f"malformed frame-rate token {tok!r}")
            n, d = val.split(":", 1)
            fps_num, fps_den = _parse_int(tok, n), _parse_int(tok, d)
        elif key == b"C":
            chroma = val
        # I (interlace), A (aspect), X (extensions) are accepted and ignored
    if width is None or height is None:
        raise FormatError("header missing W or H token")
    if width <= 0 or height <= 0:
        raise FormatError(f"non-positive dimensions {width}x{height}")
    if fps_num is None:
        raise FormatError("header missing F token")
    if fps_num <= 0 or fps_den <= 0:
        raise FormatError("non-positive frame rate")
    if chroma == "mono":
        mode = "mono"
    elif chroma in _C420_TOKENS:
        mode = "420"
        if width % 2 or height % 2:
            raise FormatError(f"4:2:0 stream requires even dimensions, got {width}x{height}")
    else:
        raise FormatError(f"unsupported colorspace token C{chroma}")
    return width, height, fps_num, fps_den, mode


def _parse_int(tok: bytes, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"malformed header token {tok!r}") from None


def load_y4m(stream) -> FrameSequence:
    """Decode a Y4M stream (bytes or binary file) into a FrameSequence."""
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    data = bytes(data)
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("stream has no header line")
    width, height, fps_num, fps_den, mode = _parse_header(data[:nl])

    luma_size = width * height
    chroma_size = (width // 2) * (height // 2) if mode == "420" else 0
    frame_size = luma_size + 2 * chroma_size

    seq = FrameSequence(
        width=width + ((-width) % MB),
        height=height + ((-height) % MB),
        orig_width=width,
        orig_height=height,
        fps_num=fps_num,
        fps_den=fps_den,
        chroma_mode=mode,
    )

    pos = nl + 1
    index = 0
    while pos < len(data):
        marker_end = data.find(b"\n", pos)
        if marker_end < 0:
            raise TruncationError(f"frame {index}: unterminated FRAME marker", index=index)
        if not data[pos:marker_end].startswith(b"FRAME"):
            raise FormatError(f"expected FRAME marker at frame {index}, got {data[pos:pos + 8]!r}")
        pos = marker_end + 1
        if len(data) - pos < frame_size:
            raise TruncationError(
                f"frame {index}: payload truncated ({len(data) - pos} of {frame_size} bytes)",
                index=index,
            )
        payload = data[pos:pos + frame_size]
        pos += frame_size
        luma = np.frombuffer(payload, dtype=np.uint8, count=luma_size).reshape(height, width)
        luma = _pad_to_multiple(luma.copy(), MB)
        cu = cv = None
        if mode == "420":
            cw, ch = width // 2, height // 2
            cu = np.frombuffer(payload, dtype=np.uint8, count=chroma_size,
                               offset=luma_size).reshape(ch, cw)
            cv = np.frombuffer(payload, dtype=np.uint8, count=chroma_size,
                               offset=luma_size + chroma_size).reshape(ch, cw)
            cu = _pad_to_multiple(cu.copy(), MB // 2)
            cv = _pad_to_multiple(cv.copy(), MB // 2)
        seq.frames.append(FrameBuffer(luma=luma, chroma_u=cu, chroma_v=cv, index=index))
        index += 1
    return seq


def write_y4m(seq: FrameSequence, sink) -> int:
    """Write the unpadded pixels of ``seq`` as Y4M; returns bytes written."""
    if not seq.frames:
        raise ValueError("cannot write an empty sequence")
    ctoken = "mono" if seq.chroma_mode == "mono" else "420jpeg"
    header = f"YUV4MPEG2 W{seq.orig_width} H{seq.orig_height} " \
             f"F{seq.fps_num}:{seq.fps_den} C{ctoken}\n".encode("ascii")
    written = sink.write(header)
    ow, oh = seq.orig_width, seq.orig_height
    for frame in seq.frames:
        written += sink.write(b"FRAME\n")
        written += sink.write(frame.luma[:oh, :ow].tobytes())
        if seq.chroma_mode == "420":
            written += sink.write(frame.chroma_u[:oh // 2, :ow // 2].tobytes())
            written += sink.write(frame.chroma_v[:oh // 2, :ow // 2].tobytes())
    return written


def y4m_bytes(seq: FrameSequence) -> bytes:
    buf = io.BytesIO()
    write_y4m(seq, buf)
    return buf.getvalue()


def sobel_edges(frame: FrameBuffer, threshold: int = 64) -> EdgeMask:
    """3x3 Sobel gradient magnitude, clamped to bytes; borders replicate."""
    p = np.pad(frame.luma.astype(np.int32), 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]
          - p[:-2, :-2] - 2 * p[1:-1, :-2] - p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]
          - p[:-2, :-2] - 2 * p[:-2, 1:-1] - p[:-2, 2:])
    mag = np.sqrt(gx.astype(np.float64) ** 2 + gy.astype(np.float64) ** 2)
    mag = np.clip(np.floor(mag + 0.5), 0, 255).astype(np.uint8)
    return EdgeMask(magnitude=mag, threshold=threshold)
