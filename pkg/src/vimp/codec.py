"""Deterministic all-intra mock codec with two-pass fixed-bitrate control.

Each 16x16 macroblock is coded as four 8x8 luma blocks (plus one 8x8
block per chroma plane in 4:2:0) through an orthonormal type-II DCT,
uniform quantization with Qstep(QP) = 2^((QP-4)/6), and signed
Exp-Golomb bit accounting.  Rate control bisects a global base QP on a
1/1024-QP lattice until the accounted bits meet the target; the
per-macroblock QP adds the external offset map plus an ordered dither
that realizes fractional QP deterministically.

The bisection returns the canonical smallest lattice point whose cost
is at or below the target, so re-running with a uniformly shifted
offset map lands on the exactly shifted base QP and reproduces the
per-macroblock QP grid bit for bit (outside [0,51] clamping).  This is
what makes the all-zero offset map literally identical to a plain
two-pass encode rather than merely close to it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateRegionError, FormatError, RateControlError, TruncationError
from .numutil import dither_hash_grid, round_half_away
from .qp_mapping import DeltaQpMap
from .video_io import MB, FrameBuffer, FrameSequence

QP_MIN = 0
QP_MAX = 51
LATTICE = 1024  # base-QP search resolution (fractions of one QP unit)
VMCK_MAGIC = b"VMCK"
VMCK_VERSION = 1

QSTEP_TABLE = 2.0 ** ((np.arange(QP_MAX + 1, dtype=np.float64) - 4.0) / 6.0)


def qstep(qp: float) -> float:
    """Quantizer step size; doubles every 6 QP, 16.0 at QP 28."""
    return float(2.0 ** ((qp - 4.0) / 6.0))


def _dct_basis() -> np.ndarray:
    k = np.arange(8, dtype=np.float64)[:, None]
    n = np.arange(8, dtype=np.float64)[None, :]
    basis = np.cos((2.0 * n + 1.0) * k * np.pi / 16.0)
    basis[0] *= math.sqrt(1.0 / 8.0)
    basis[1:] *= 0.5
    return basis


_DCT = _dct_basis()


def _plane_to_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return (plane.reshape(h // 8, 8, w // 8, 8)
            .transpose(0, 2, 1, 3)
            .reshape(-1, 8, 8))


def _blocks_to_plane(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return (blocks.reshape(h // 8, w // 8, 8, 8)
            .transpose(0, 2, 1, 3)
            .reshape(h, w))


def forward_dct(plane: np.ndarray) -> np.ndarray:
    """8x8 blockwise orthonormal DCT-II; returns (nblocks, 64) float64."""
    blocks = _plane_to_blocks(plane.astype(np.float64))
    coeffs = _DCT @ blocks @ _DCT.T
    return np.ascontiguousarray(coeffs.reshape(-1, 64))


def inverse_dct_plane(coeffs: np.ndarray, h: int, w: int) -> np.ndarray:
    """Inverse of forward_dct back to a uint8 plane (round, clamp)."""
    blocks = _DCT.T @ coeffs.reshape(-1, 8, 8) @ _DCT
    plane = _blocks_to_plane(blocks, h, w)
    return np.clip(round_half_away(plane), 0, 255).astype(np.uint8)


@dataclass
class EncoderConfig:
    target_bitrate: float          # bits per second
    rate_tolerance: float = 0.02
    qp_min: int = QP_MIN
    qp_max: int = QP_MAX
    all_intra: bool = True         # the mock codec is always all-intra
    pass1_qp: int = 26

    def validate(self) -> None:
        if self.target_bitrate <= 0:
            raise ValueError(f"target bitrate {self.target_bitrate} must be positive")
        if not QP_MIN <= self.qp_min <= self.qp_max <= QP_MAX:
            raise ValueError(f"bad base-QP range [{self.qp_min}, {self.qp_max}]")
        if not 0 < self.rate_tolerance < 1:
            raise ValueError("rate tolerance must be a fraction in (0, 1)")


@dataclass
class Pass1Stats:
    """Per-frame complexity (bits at the fixed pass-1 QP) and budget shares."""

    complexity_bits: list[int]
    budget_bits: list[float]


@dataclass
class EncodeResult:
    bitstream: bytes | str
    reconstruction: FrameSequence
    per_frame_bits: list[int]
    base_qp: float
    pass1_stats: Pass1Stats | None
    psnr_overall: float
    qp_grids: list[np.ndarray] = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return int(sum(self.per_frame_bits))


@dataclass
class RegionMetrics:
    psnr_in: float
    psnr_out: float
    weighted_psnr: float
    threshold: int


def dqp_to_lattice(dqp: DeltaQpMap | None, mb_rows: int, mb_cols: int,
                   frame_count: int) -> np.ndarray:
    """Offset map quantized to int32 lattice units (1/1024 QP per step)."""
    if dqp is None:
        return np.zeros((frame_count, mb_rows, mb_cols), dtype=np.int32)
    if (dqp.mb_rows, dqp.mb_cols) != (mb_rows, mb_cols):
        raise ValueError(
            f"offset-map grid {dqp.mb_rows}x{dqp.mb_cols} does not match "
            f"macroblock grid {mb_rows}x{mb_cols}")
    if dqp.frame_count != frame_count:
        raise ValueError(
            f"offset map has {dqp.frame_count} frames, sequence has {frame_count}")
    return round_half_away(dqp.frames.astype(np.float64) * LATTICE).astype(np.int32)


def compute_qp_grid(u: int, dqp_lattice_frame: np.ndarray, frame_index: int,
                    qp_min: int = QP_MIN, qp_max: int = QP_MAX):
    """Per-macroblock QP for base lattice point ``u`` plus the offset map.

    q = (u + offset)/1024; QP = floor(q) + 1 when fract(q) exceeds the
    macroblock's dither threshold hash/2^32, else floor(q); clamped to
    the configured range.  Returns (uint8 grid, clamped-mask).
    """
    total = np.int64(u) + dqp_lattice_frame.astype(np.int64)
    n = total // LATTICE
    f = total - n * LATTICE
    rows, cols = dqp_lattice_frame.shape
    thresholds = dither_hash_grid(frame_index, rows, cols).astype(np.int64)
    unclamped = n + ((f * (2 ** 32 // LATTICE)) > thresholds)
    qp = np.clip(unclamped, qp_min, qp_max)
    return qp.astype(np.uint8), (unclamped != qp)


class _CoeffProvider:
    """DCT coefficients per frame, cached when they fit in memory."""

    def __init__(self, seq: FrameSequence, max_cache_bytes: int = 600_000_000):
        self.seq = seq
        pixels = seq.width * seq.height
        if seq.chroma_mode == "420":
            pixels += pixels // 2
        self._cache: list | None = None
        if pixels * seq.frame_count * 8 <= max_cache_bytes:
            self._cache = [self._compute(f) for f in range(seq.frame_count)]

    def _compute(self, f: int):
        frame = self.seq.frames[f]
        luma = forward_dct(frame.luma)
        if self.seq.chroma_mode == "420":
            return luma, forward_dct(frame.chroma_u), forward_dct(frame.chroma_v)
        return luma, None, None

    def get(self, f: int):
        if self._cache is not None:
            return self._cache[f]
        return self._compute(f)


def _plane_qsteps(qp: np.ndarray, luma: bool) -> np.ndarray:
    steps = QSTEP_TABLE[qp]
    if luma:
        steps = steps.repeat(2, axis=0).repeat(2, axis=1)
    return np.ascontiguousarray(steps.ravel())


def _frame_bits(coeffs, qp: np.ndarray) -> int:
    luma, cu, cv = coeffs
    bits = kernels.quant_cost(luma, _plane_qsteps(qp, luma=True))
    if cu is not None:
        chroma_steps = _plane_qsteps(qp, luma=False)
        bits += kernels.quant_cost(cu, chroma_steps)
        bits += kernels.quant_cost(cv, chroma_steps)
    return bits


def mock_encode_two_pass(seq: FrameSequence, dqp: DeltaQpMap | None,
                         cfg: EncoderConfig) -> EncodeResult:
    """Two-pass ABR encode of ``seq`` with the per-macroblock offset map.

    Pass 1 measures per-frame bits at the fixed pass-1 QP (offset map
    applied) as the complexity statistic.  Pass 2 bisects the base QP
    lattice until total accounted bits land within rate_tolerance of
    target_bitrate * duration, the offset map applied identically.
    A ``None`` map behaves exactly like an all-zero map (the baseline).
    """
    cfg.validate()
    if not seq.frames:
        raise ValueError("cannot encode an empty sequence")
    mb_rows, mb_cols = seq.mb_rows, seq.mb_cols
    n_frames = seq.frame_count
    dqp_lat = dqp_to_lattice(dqp, mb_rows, mb_cols, n_frames)
    coeffs = _CoeffProvider(seq)

    def total_bits(u: int) -> int:
        total = 0
        for f in range(n_frames):
            qp, _ = compute_qp_grid(u, dqp_lat[f], f, cfg.qp_min, cfg.qp_max)
            total += _frame_bits(coeffs.get(f), qp)
        return total

    # Pass 1: complexity measurement at the fixed QP.
    pass1 = []
    u1 = cfg.pass1_qp * LATTICE
    for f in range(n_frames):
        qp, _ = compute_qp_grid(u1, dqp_lat[f], f, cfg.qp_min, cfg.qp_max)
        pass1.append(_frame_bits(coeffs.get(f), qp))

    target = cfg.target_bitrate * seq.duration_seconds
    shares = np.asarray(pass1, dtype=np.float64) ** 0.6
    budgets = (target * shares / shares.sum()).tolist()
    stats = Pass1Stats(complexity_bits=pass1, budget_bits=budgets)

    # Pass 2: canonical smallest lattice point with bits <= target.
    u_lo, u_hi = cfg.qp_min * LATTICE, cfg.qp_max * LATTICE
    bits_hi = total_bits(u_hi)
    bits_lo = total_bits(u_lo)
    tol = cfg.rate_tolerance * target
    if bits_hi > target:
        if bits_hi - target > tol:
            raise RateControlError(
                f"target {target:.0f} bits below achievable minimum {bits_hi}"
                f" (QP {cfg.qp_max}); achievable range [{bits_hi}, {bits_lo}]",
                target_bits=target, min_achievable=bits_hi, max_achievable=bits_lo)
        u_star = u_hi
    elif bits_lo <= target:
        u_star = u_lo
    else:
        lo, hi = u_lo, u_hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if total_bits(mid) <= target:
                hi = mid
            else:
                lo = mid
        u_star = hi

    result = _materialize(seq, dqp_lat, coeffs, u_star, cfg, stats)
    achieved = result.total_bits
    if abs(achieved - target) > tol:
        raise RateControlError(
            f"converged to {achieved} bits, outside {target:.0f} ± {tol:.0f};"
            f" achievable range [{bits_hi}, {bits_lo}]",
            target_bits=target, min_achievable=bits_hi, max_achievable=bits_lo)
    return result


def _materialize(seq: FrameSequence, dqp_lat: np.ndarray, coeffs: _CoeffProvider,
                 u_star: int, cfg: EncoderConfig, stats: Pass1Stats | None) -> EncodeResult:
    base_qp = u_star / LATTICE
    per_frame_bits: list[int] = []
    qp_grids: list[np.ndarray] = []
    recon_frames: list[FrameBuffer] = []
    chunks: list[bytes] = []
    is_420 = seq.chroma_mode == "420"
    h, w = seq.height, seq.width

    for f in range(seq.frame_count):
        qp, _ = compute_qp_grid(u_star, dqp_lat[f], f, cfg.qp_min, cfg.qp_max)
        luma_c, cu_c, cv_c = coeffs.get(f)
        luma_steps = _plane_qsteps(qp, luma=True)
        luma_levels = kernels.quantize_blocks(luma_c, luma_steps)
        bits = kernels.quant_cost(luma_c, luma_steps)
        luma_plane = inverse_dct_plane(
            luma_levels.astype(np.float64) * luma_steps[:, None], h, w)
        payload = [qp.tobytes(), luma_levels.astype("<i2").tobytes()]
        cu_plane = cv_plane = None
        if is_420:
            chroma_steps = _plane_qsteps(qp, luma=False)
            for plane_c in (cu_c, cv_c):
                levels = kernels.quantize_blocks(plane_c, chroma_steps)
                bits += kernels.quant_cost(plane_c, chroma_steps)
                payload.append(levels.astype("<i2").tobytes())
                plane = inverse_dct_plane(
                    levels.astype(np.float64) * chroma_steps[:, None], h // 2, w // 2)
                if cu_plane is None:
                    cu_plane = plane
                else:
                    cv_plane = plane
        per_frame_bits.append(int(bits))
        qp_grids.append(qp)
        recon_frames.append(FrameBuffer(luma_plane, cu_plane, cv_plane, index=f))
        chunks.append(struct.pack("<I", int(bits)) + b"".join(payload))

    recon = FrameSequence(
        width=seq.width, height=seq.height,
        orig_width=seq.orig_width, orig_height=seq.orig_height,
        fps_num=seq.fps_num, fps_den=seq.fps_den,
        chroma_mode=seq.chroma_mode, frames=recon_frames)

    header = VMCK_MAGIC + struct.pack(
        "<IIIIIIIIII", VMCK_VERSION, seq.width, seq.height,
        seq.orig_width, seq.orig_height, seq.fps_num, seq.fps_den,
        1 if is_420 else 0, seq.frame_count,
        struct.unpack("<I", struct.pack("<f", base_qp))[0])
    bitstream = header + b"".join(chunks)

    return EncodeResult(
        bitstream=bitstream,
        reconstruction=recon,
        per_frame_bits=per_frame_bits,
        base_qp=base_qp,
        pass1_stats=stats,
        psnr_overall=psnr(seq, recon),
        qp_grids=qp_grids,
    )


def achievable_bits_range(seq: FrameSequence, dqp: DeltaQpMap | None = None,
                          qp_min: int = QP_MIN, qp_max: int = QP_MAX) -> tuple[int, int]:
    """(total bits at qp_max, total bits at qp_min): the reachable interval."""
    dqp_lat = dqp_to_lattice(dqp, seq.mb_rows, seq.mb_cols, seq.frame_count)
    coeffs = _CoeffProvider(seq)

    def total(u: int) -> int:
        bits = 0
        for f in range(seq.frame_count):
            qp, _ = compute_qp_grid(u, dqp_lat[f], f, qp_min, qp_max)
            bits += _frame_bits(coeffs.get(f), qp)
        return bits

    return total(qp_max * LATTICE), total(qp_min * LATTICE)


@dataclass
class MockDecodeResult:
    reconstruction: FrameSequence
    qp_grids: list[np.ndarray]
    per_frame_bits: list[int]
    base_qp: float


def mock_decode(data: bytes) -> MockDecodeResult:
    """Decode a mock bitstream container back to its reconstruction."""
    if data[:4] != VMCK_MAGIC:
        raise FormatError(f"bad bitstream magic {data[:4]!r}")
    if len(data) < 44:
        raise TruncationError("bitstream header truncated")
    (version, width, height, ow, oh, fps_num, fps_den,
     chroma_flag, n_frames, qp_bits) = struct.unpack_from("<IIIIIIIIII", data, 4)
    if version != VMCK_VERSION:
        raise FormatError(f"unsupported bitstream version {version}")
    if width % MB or height % MB or width == 0 or height == 0:
        raise FormatError(f"bitstream dimensions {width}x{height} not multiples of 16")
    base_qp = struct.unpack("<f", struct.pack("<I", qp_bits))[0]
    mb_rows, mb_cols = height // MB, width // MB
    n_luma = (height // 8) * (width // 8)
    n_chroma = mb_rows * mb_cols
    is_420 = chroma_flag == 1

    pos = 44
    frames = []
    qp_grids = []
    per_frame_bits = []
    for f in range(n_frames):
        frame_size = 4 + mb_rows * mb_cols + n_luma * 128
        if is_420:
            frame_size += 2 * n_chroma * 128
        if len(data) - pos < frame_size:
            raise TruncationError(f"bitstream truncated in frame {f}", index=f)
        (bits,) = struct.unpack_from("<I", data, pos)
        pos += 4
        qp = np.frombuffer(data, dtype=np.uint8, count=mb_rows * mb_cols,
                           offset=pos).reshape(mb_rows, mb_cols).copy()
        pos += mb_rows * mb_cols
        if qp.max() > QP_MAX:
            raise FormatError(f"frame {f} declares QP {qp.max()} > {QP_MAX}")
        luma_levels = np.frombuffer(data, dtype="<i2", count=n_luma * 64,
                                    offset=pos).reshape(n_luma, 64)
        pos += n_luma * 128
        luma_steps = _plane_qsteps(qp, luma=True)
        luma = inverse_dct_plane(
            luma_levels.astype(np.float64) * luma_steps[:, None], height, width)
        cu = cv = None
        if is_420:
            chroma_steps = _plane_qsteps(qp, luma=False)
            planes = []
            for _ in range(2):
                levels = np.frombuffer(data, dtype="<i2", count=n_chroma * 64,
                                       offset=pos).reshape(n_chroma, 64)
                pos += n_chroma * 128
                planes.append(inverse_dct_plane(
                    levels.astype(np.float64) * chroma_steps[:, None],
                    height // 2, width // 2))
            cu, cv = planes
        frames.append(FrameBuffer(luma, cu, cv, index=f))
        qp_grids.append(qp)
        per_frame_bits.append(int(bits))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after bitstream payload")
    recon = FrameSequence(width, height, ow, oh, fps_num, fps_den,
                          "420" if is_420 else "mono", frames)
    return MockDecodeResult(recon, qp_grids, per_frame_bits, base_qp)


def psnr(ref: FrameSequence, rec: FrameSequence) -> float:
    """Luma PSNR over the unpadded region of all frames; inf when identical."""
    if (ref.orig_width, ref.orig_height) != (rec.orig_width, rec.orig_height):
        raise ValueError("sequence dimensions differ")
    if ref.frame_count != rec.frame_count:
        raise ValueError("frame counts differ")
    oh, ow = ref.orig_height, ref.orig_width
    sse = 0.0
    for fa, fb in zip(ref.frames, rec.frames):
        d = fa.luma[:oh, :ow].astype(np.int64) - fb.luma[:oh, :ow].astype(np.int64)
        sse += float((d * d).sum())
    count = oh * ow * ref.frame_count
    if sse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / (sse / count))


def _mse_to_psnr(sse: float, count: float) -> float:
    if sse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / (sse / count))


def region_metrics(ref: FrameSequence, rec: FrameSequence, vol,
                   threshold: int = 160) -> RegionMetrics:
    """Luma PSNR split by the importance threshold, plus importance-weighted PSNR."""
    if (ref.orig_width, ref.orig_height) != (rec.orig_width, rec.orig_height):
        raise ValueError("sequence dimensions differ")
    if ref.frame_count != rec.frame_count:
        raise ValueError("frame counts differ")
    if (vol.width, vol.height) != (ref.orig_width, ref.orig_height):
        raise ValueError("importance volume dimensions differ from video")
    if vol.frame_count != ref.frame_count:
        raise ValueError("importance volume frame count differs from video")
    oh, ow = ref.orig_height, ref.orig_width
    sse_in = sse_out = wsse = wsum = 0.0
    n_in = n_out = 0
    for f in range(ref.frame_count):
        d = (ref.frames[f].luma[:oh, :ow].astype(np.float64)
             - rec.frames[f].luma[:oh, :ow].astype(np.float64)) ** 2
        mask = vol.maps[f] >= threshold
        sse_in += float(d[mask].sum())
        sse_out += float(d[~mask].sum())
        n_in += int(mask.sum())
        n_out += int((~mask).sum())
        weights = vol.maps[f].astype(np.float64) / 255.0
        wsse += float((weights * d).sum())
        wsum += float(weights.sum())
    if n_in == 0:
        raise DegenerateRegionError("in")
    if n_out == 0:
        raise DegenerateRegionError("out")
    if wsum == 0.0:
        raise DegenerateRegionError("weighted")
    return RegionMetrics(
        psnr_in=_mse_to_psnr(sse_in, n_in),
        psnr_out=_mse_to_psnr(sse_out, n_out),
        weighted_psnr=_mse_to_psnr(wsse, wsum),
        threshold=threshold,
    )


def format_psnr(value: float) -> str:
    return "lossless" if math.isinf(value) else f"{value:.2f} dB"


def bitstream_bytes(result: EncodeResult) -> bytes:
    if isinstance(result.bitstream, (bytes, bytearray)):
        return bytes(result.bitstream)
    with open(result.bitstream, "rb") as fh:
        return fh.read()


def vmck_bytes(result: EncodeResult) -> bytes:
    return bitstream_bytes(result)


def save_bitstream(result: EncodeResult, path) -> None:
    with open(path, "wb") as fh:
        fh.write(bitstream_bytes(result))


def stats_dict(result: EncodeResult) -> dict:
    """JSON-serializable encode statistics (inf PSNR encoded as null + flag)."""
    lossless = math.isinf(result.psnr_overall)
    return {
        "base_qp": None if math.isnan(result.base_qp) else result.base_qp,
        "total_bits": result.total_bits,
        "per_frame_bits": list(result.per_frame_bits),
        "psnr": None if lossless else result.psnr_overall,
        "lossless": lossless,
        "pass1_complexity_bits": (
            result.pass1_stats.complexity_bits if result.pass1_stats else None),
        "pass1_budget_bits": (
            result.pass1_stats.budget_bits if result.pass1_stats else None),
    }
