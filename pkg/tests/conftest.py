from __future__ import annotations

import io

import numpy as np
import pytest

from vimp.video_io import FrameBuffer, FrameSequence, load_y4m


def make_y4m(width, height, frames, fps=(30, 1), chroma="420jpeg", rng=None,
             luma_frames=None) -> bytes:
    """Synthesize a Y4M byte stream; random planes unless luma_frames given."""
    header = f"YUV4MPEG2 W{width} H{height} F{fps[0]}:{fps[1]} C{chroma}\n"
    out = io.BytesIO()
    out.write(header.encode())
    mono = chroma == "mono"
    for f in range(frames):
        out.write(b"FRAME\n")
        if luma_frames is not None:
            luma = np.asarray(luma_frames[f], dtype=np.uint8)
        elif rng is not None:
            luma = rng.integers(0, 256, (height, width), dtype=np.uint8)
        else:
            luma = np.zeros((height, width), dtype=np.uint8)
        out.write(luma.tobytes())
        if not mono:
            for _ in range(2):
                if rng is not None:
                    plane = rng.integers(0, 256, (height // 2, width // 2), dtype=np.uint8)
                else:
                    plane = np.full((height // 2, width // 2), 128, dtype=np.uint8)
                out.write(plane.tobytes())
    return out.getvalue()


def sequence_from_lumas(lumas, fps=(30, 1)) -> FrameSequence:
    """Mono FrameSequence straight from a list of uint8 luma arrays."""
    h, w = np.asarray(lumas[0]).shape
    data = make_y4m(w, h, len(lumas), fps=fps, chroma="mono", luma_frames=lumas)
    return load_y4m(data)


def smooth_texture(rng, height, width, blur=2) -> np.ndarray:
    """Random texture with local correlation (keeps DCT energy mid-band)."""
    noise = rng.integers(0, 256, (height, width)).astype(np.float64)
    for _ in range(blur):
        noise = (noise + np.roll(noise, 1, 0) + np.roll(noise, 1, 1)
                 + np.roll(noise, -1, 0) + np.roll(noise, -1, 1)) / 5.0
    lo, hi = noise.min(), noise.max()
    return ((noise - lo) / (hi - lo) * 255.0).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
