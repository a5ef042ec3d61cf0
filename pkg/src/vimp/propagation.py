"""Temporal propagation of stroke deltas along optical flow.

A stroke painted on frame t is applied there at full weight, then its
delta is warped forward through the per-frame flow fields and added to
each following frame with a decaying weight, zero from the horizon on.
Only the delta propagates (never the whole map), so earlier paint is
left intact and repeated strokes compose additively up to clamping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .map_engine import ImportanceVolume, StrokeDelta, apply_delta_inplace, _delta_window
from .numutil import round_half_away


@dataclass
class DecayPolicy:
    """weight(k) for frame offset k; non-increasing, zero beyond the horizon."""

    horizon: int = 40

    def weight(self, k: int) -> float:
        if k <= 0:
            return 1.0
        if k > self.horizon:
            return 0.0
        return max(0.0, 1.0 - k / self.horizon)


def warp_delta(delta: np.ndarray, field) -> np.ndarray:
    """Forward-splat a signed delta grid along one flow field.

    Every source pixel's value is distributed over the four destination
    pixels around (x+dx, y+dy) with bilinear weights; destinations
    outside the frame are dropped, overlapping contributions accumulate.
    """
    grid = np.asarray(delta, dtype=np.float64)
    if field.dx.shape != grid.shape:
        raise ValueError(f"flow shape {field.dx.shape} differs from delta {grid.shape}")
    return kernels.splat_forward(grid, field.dx, field.dy)


def propagate_stroke(vol: ImportanceVolume, delta: StrokeDelta, flows,
                     policy: DecayPolicy | None = None) -> ImportanceVolume:
    """Apply a stroke delta at its frame and propagate it forward.

    ``flows`` is anything with ``get(from_frame) -> FlowField | None``;
    a missing field truncates the horizon.  Each propagated step adds
    round(weight(k) * warped delta), clamped to byte range.  Frames
    before the stroke frame are never touched.
    """
    policy = policy or DecayPolicy()
    if not 0 <= delta.frame < vol.frame_count:
        raise ValueError(f"delta frame {delta.frame} out of range")
    out = vol.copy()
    apply_delta_inplace(out, delta)

    running = np.zeros((vol.height, vol.width), dtype=np.float64)
    win = _delta_window(delta, vol.width, vol.height)
    if win is not None:
        x0, y0, x1, y1, sub = win
        running[y0:y1, x0:x1] = sub

    for k in range(1, policy.horizon + 1):
        t = delta.frame + k
        if t >= vol.frame_count:
            break
        field = flows.get(t - 1)
        if field is None:
            break
        running = warp_delta(running, field)
        w = policy.weight(k)
        if w <= 0.0:
            continue
        contribution = round_half_away(w * running)
        frame = out.maps[t].astype(np.float64) + contribution
        out.maps[t] = np.clip(frame, 0, 255).astype(np.uint8)
    return out
