"""Deterministic builders for the golden-file fixtures.

Golden bytes are committed; `python3 tests/golden/generate.py` rebuilds
them from the same seeds.  Content is random (not structured) so no
quantizer sits on a rounding boundary.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from vimp.codec import EncoderConfig, mock_encode_two_pass
from vimp.flow import FlowField, flow_bytes
from vimp.map_engine import ImportanceVolume, vimp_bytes
from vimp.qp_mapping import DeltaQpMap, qpmap_bytes, volume_to_delta_qp
from vimp.video_io import load_y4m, y4m_bytes

GOLDEN_DIR = Path(__file__).parent
GOLDEN_BITRATE = 250_000.0


def golden_volume() -> ImportanceVolume:
    rng = np.random.default_rng(2024_01)
    maps = rng.integers(0, 256, (3, 6, 8), dtype=np.uint8)
    return ImportanceVolume(8, 6, maps)


def golden_flow_fields() -> list[FlowField]:
    rng = np.random.default_rng(2024_02)
    return [
        FlowField(t,
                  rng.uniform(-4, 4, (6, 8)).astype(np.float32),
                  rng.uniform(-4, 4, (6, 8)).astype(np.float32))
        for t in range(2)
    ]


def golden_qpmap() -> DeltaQpMap:
    rng = np.random.default_rng(2024_03)
    frames = rng.uniform(-10, 10, (2, 2, 3)).astype(np.float32)
    return DeltaQpMap(3, 2, frames)


def golden_clip_y4m() -> bytes:
    rng = np.random.default_rng(2024_04)
    out = io.BytesIO()
    out.write(b"YUV4MPEG2 W32 H32 F30:1 C420jpeg\n")
    for _ in range(2):
        out.write(b"FRAME\n")
        out.write(rng.integers(0, 256, (32, 32), dtype=np.uint8).tobytes())
        out.write(rng.integers(0, 256, (16, 16), dtype=np.uint8).tobytes())
        out.write(rng.integers(0, 256, (16, 16), dtype=np.uint8).tobytes())
    return out.getvalue()


def golden_encode(clip_bytes: bytes):
    seq = load_y4m(clip_bytes)
    dqp = volume_to_delta_qp(
        ImportanceVolume(32, 32, np.repeat(np.repeat(
            np.array([[[40, 220], [220, 40]]], dtype=np.uint8), 16, axis=1), 16, axis=2)
            .repeat(2, axis=0)))
    cfg = EncoderConfig(target_bitrate=GOLDEN_BITRATE)
    return mock_encode_two_pass(seq, dqp, cfg)


def build_all() -> dict[str, bytes]:
    clip = golden_clip_y4m()
    result = golden_encode(clip)
    return {
        "sample.vimp": vimp_bytes(golden_volume()),
        "sample.vflo": flow_bytes(golden_flow_fields()),
        "sample.vdqp": qpmap_bytes(golden_qpmap()),
        "clip.y4m": clip,
        "clip.vmck": bytes(result.bitstream),
        "clip_recon.y4m": y4m_bytes(result.reconstruction),
    }
