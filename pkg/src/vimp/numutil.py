"""Small numeric helpers with pinned-down rounding and hashing behavior.

Rounding is half away from zero everywhere in this package so that the
compiled and pure-python kernel backends (and any reimplementation)
agree byte for byte.
"""

from __future__ import annotations

import numpy as np

_M32 = 0xFFFFFFFF


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero. Returns float array."""
    x = np.asarray(x, dtype=np.float64)
    return np.floor(np.abs(x) + 0.5) * np.sign(x)


def round_half_away_scalar(x: float) -> int:
    v = np.floor(abs(x) + 0.5)
    return int(v if x >= 0 else -v)


def lowbias32(x: np.ndarray) -> np.ndarray:
    """32-bit integer finalizer (lowbias32). Input/output uint64 masked to 32 bits."""
    x = x & _M32
    x ^= x >> 16
    x = (x * 0x7FEB352D) & _M32
    x ^= x >> 15
    x = (x * 0x846CA68B) & _M32
    x ^= x >> 16
    return x


def dither_hash_grid(frame: int, rows: int, cols: int) -> np.ndarray:
    """Per-macroblock dither thresholds, uint32 grid, pure function of (frame, i, j)."""
    i = np.arange(rows, dtype=np.uint64)[:, None]
    j = np.arange(cols, dtype=np.uint64)[None, :]
    seed = (np.uint64(frame) * np.uint64(2654435761)
            + i * np.uint64(2246822519)
            + j * np.uint64(3266489917)) & np.uint64(_M32)
    return lowbias32(seed)


def exp_golomb_signed_length(levels: np.ndarray) -> np.ndarray:
    """Bit cost per signed integer under the signed Exp-Golomb code.

    value c maps to u = 2|c| - (1 if c > 0 else 0); cost = 2*floor(log2(u+1)) + 1.
    A zero value therefore costs exactly 1 bit.
    """
    lv = np.abs(levels).astype(np.float64)
    u = 2.0 * lv - ((levels > 0) & (lv > 0))
    # floor(log2(u+1)) == frexp exponent - 1, exact for integer-valued floats < 2**53
    exponents = np.frexp(u + 1.0)[1]
    return (2 * (exponents - 1) + 1).astype(np.int64)
