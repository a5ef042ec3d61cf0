"""Pure-numpy kernel implementations.

These are the fallback for the compiled extension in ``_fast``.  Both
backends must produce bit-identical output: every operation here is
either integer or an elementwise IEEE-754 double operation mirrored
exactly by the compiled loops (same expressions, same accumulation
order).  Keep the two files in sync when touching either.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def sad_search(prev: np.ndarray, curr: np.ndarray, block: int, search: int):
    """Exhaustive block-matching displacement search.

    For every ``block``-sized tile of ``prev`` finds the integer (dx, dy)
    within ``±search`` minimizing the SAD against ``curr``; displaced
    coordinates are clamped to the frame (edge replication).  Ties break
    on smallest |dx|+|dy|, then smallest dy, then smallest dx, which makes
    the argmin unique and iteration-order independent.

    Returns (dx, dy) int32 grids of shape (block_rows, block_cols).
    """
    if prev.shape != curr.shape:
        raise ValueError("frame shapes differ")
    h, w = prev.shape
    row_starts = np.arange(0, h, block)
    col_starts = np.arange(0, w, block)
    bh, bw = len(row_starts), len(col_starts)

    a = prev.astype(np.int32)
    rows = np.arange(h)
    cols = np.arange(w)

    best_sad = np.full((bh, bw), np.iinfo(np.int64).max, dtype=np.int64)
    best_abs = np.zeros((bh, bw), dtype=np.int64)
    best_dy = np.zeros((bh, bw), dtype=np.int32)
    best_dx = np.zeros((bh, bw), dtype=np.int32)

    for dy in range(-search, search + 1):
        r_idx = np.clip(rows + dy, 0, h - 1)
        b_rows = curr[r_idx]
        for dx in range(-search, search + 1):
            c_idx = np.clip(cols + dx, 0, w - 1)
            shifted = b_rows[:, c_idx].astype(np.int32)
            d = np.abs(a - shifted)
            sad = np.add.reduceat(np.add.reduceat(d, row_starts, axis=0),
                                  col_starts, axis=1).astype(np.int64)
            absd = abs(dx) + abs(dy)
            ties = sad == best_sad
            take = sad < best_sad
            take |= ties & (absd < best_abs)
            eq2 = ties & (absd == best_abs)
            take |= eq2 & (dy < best_dy)
            take |= eq2 & (dy == best_dy) & (dx < best_dx)
            if take.any():
                best_sad[take] = sad[take]
                best_abs[take] = absd
                best_dy[take] = dy
                best_dx[take] = dx
    return best_dx, best_dy


def quant_cost(coeffs: np.ndarray, qstep: np.ndarray) -> int:
    """Total signed-Exp-Golomb bit cost of quantizing ``coeffs`` by ``qstep``.

    ``coeffs`` is (nblocks, 64) float64, ``qstep`` (nblocks,) float64.
    Levels are round-half-away-from-zero of coeff/qstep.
    """
    t = coeffs / qstep[:, None]
    lv = np.floor(np.abs(t) + 0.5)
    u = 2.0 * lv - ((t > 0) & (lv > 0))
    exponents = np.frexp(u + 1.0)[1]
    return int((2 * (exponents.astype(np.int64) - 1) + 1).sum())


def quantize_blocks(coeffs: np.ndarray, qstep: np.ndarray) -> np.ndarray:
    """Quantized levels, int32 (nblocks, 64); same rounding as quant_cost."""
    t = coeffs / qstep[:, None]
    lv = np.floor(np.abs(t) + 0.5)
    return np.where(t > 0, lv, -lv).astype(np.int32)


def splat_forward(values: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Forward bilinear splat of ``values`` along the per-pixel flow.

    Each source pixel distributes its value to the four pixels around
    (x+dx, y+dy) with bilinear weights; destinations outside the frame
    are dropped.  Accumulation happens in raster source order with the
    corner order (top-left, top-right, bottom-left, bottom-right) so the
    float sums match the compiled kernel exactly.
    """
    h, w = values.shape
    if dx.shape != values.shape or dy.shape != values.shape:
        raise ValueError("flow shape differs from value grid")
    ys, xs = np.mgrid[0:h, 0:w]
    fx = xs.astype(np.float64) + dx.astype(np.float64)
    fy = ys.astype(np.float64) + dy.astype(np.float64)
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    wx = fx - x0
    wy = fy - y0
    x0i = x0.astype(np.int64)
    y0i = y0.astype(np.int64)
    x1i = x0i + 1
    y1i = y0i + 1

    v = values.astype(np.float64)
    out = np.zeros((h, w), dtype=np.float64)

    corner_w = np.empty((h, w, 4), dtype=np.float64)
    corner_w[..., 0] = (1.0 - wx) * (1.0 - wy) * v
    corner_w[..., 1] = wx * (1.0 - wy) * v
    corner_w[..., 2] = (1.0 - wx) * wy * v
    corner_w[..., 3] = wx * wy * v

    cx = np.stack([x0i, x1i, x0i, x1i], axis=-1)
    cy = np.stack([y0i, y0i, y1i, y1i], axis=-1)
    valid = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    corner_w[~valid] = 0.0
    cx = np.clip(cx, 0, w - 1)
    cy = np.clip(cy, 0, h - 1)

    flat = out.ravel()
    np.add.at(flat, (cy * w + cx).ravel(), corner_w.ravel())
    return out
