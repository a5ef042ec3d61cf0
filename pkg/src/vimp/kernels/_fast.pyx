# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels, bit-identical to vimp.kernels._ref.

Every floating-point expression reproduces the reference expression tree
(same operands, same order), and all tie-breaking reduces to a total
order, so results match the numpy backend exactly.  Keep in sync with
_ref.py when touching either.
"""

from libc.math cimport fabs, floor

import numpy as np

BACKEND = "cython"

cdef long long _HUGE = (<long long>1) << 62


def sad_search(prev, curr, int block, int search):
    """See _ref.sad_search; early abort only skips strictly losing candidates."""
    if prev.shape != curr.shape:
        raise ValueError("frame shapes differ")
    cdef const unsigned char[:, ::1] a = np.ascontiguousarray(prev, dtype=np.uint8)
    cdef const unsigned char[:, ::1] b = np.ascontiguousarray(curr, dtype=np.uint8)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t bh = (h + block - 1) // block
    cdef Py_ssize_t bw = (w + block - 1) // block
    out_dx = np.zeros((bh, bw), dtype=np.int32)
    out_dy = np.zeros((bh, bw), dtype=np.int32)
    cdef int[:, ::1] odx = out_dx
    cdef int[:, ::1] ody = out_dy

    cdef Py_ssize_t by, bx, y0, y1, x0, x1, y, x, sy, sx
    cdef int dy, dx, absd
    cdef long long sad, best_sad, best_abs
    cdef int best_dy, best_dx
    cdef bint better

    for by in range(bh):
        y0 = by * block
        y1 = y0 + block
        if y1 > h:
            y1 = h
        for bx in range(bw):
            x0 = bx * block
            x1 = x0 + block
            if x1 > w:
                x1 = w
            best_sad = _HUGE
            best_abs = 0
            best_dy = 0
            best_dx = 0
            for dy in range(-search, search + 1):
                for dx in range(-search, search + 1):
                    sad = 0
                    for y in range(y0, y1):
                        sy = y + dy
                        if sy < 0:
                            sy = 0
                        elif sy >= h:
                            sy = h - 1
                        for x in range(x0, x1):
                            sx = x + dx
                            if sx < 0:
                                sx = 0
                            elif sx >= w:
                                sx = w - 1
                            sad += a[y, x] - b[sy, sx] if a[y, x] >= b[sy, sx] \
                                else b[sy, sx] - a[y, x]
                        if sad > best_sad:
                            break
                    if sad > best_sad:
                        continue
                    absd = (dx if dx >= 0 else -dx) + (dy if dy >= 0 else -dy)
                    better = False
                    if sad < best_sad:
                        better = True
                    elif absd < best_abs:
                        better = True
                    elif absd == best_abs:
                        if dy < best_dy:
                            better = True
                        elif dy == best_dy and dx < best_dx:
                            better = True
                    if better:
                        best_sad = sad
                        best_abs = absd
                        best_dy = dy
                        best_dx = dx
            odx[by, bx] = best_dx
            ody[by, bx] = best_dy
    return out_dx, out_dy


def quant_cost(coeffs, qstep):
    """See _ref.quant_cost."""
    cdef const double[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(qstep, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1], i, j
    cdef double t, lv, step
    cdef long long total = 0, u, v
    cdef int length
    for i in range(n):
        step = q[i]
        for j in range(m):
            t = c[i, j] / step
            lv = floor(fabs(t) + 0.5)
            u = 2 * <long long>lv
            if t > 0 and lv > 0:
                u -= 1
            v = u + 1
            length = 0
            while v > 1:
                v >>= 1
                length += 1
            total += 2 * length + 1
    return int(total)


def quantize_blocks(coeffs, qstep):
    """See _ref.quantize_blocks."""
    cdef const double[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(qstep, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1], i, j
    out = np.empty((n, m), dtype=np.int32)
    cdef int[:, ::1] levels = out
    cdef double t, lv, step
    for i in range(n):
        step = q[i]
        for j in range(m):
            t = c[i, j] / step
            lv = floor(fabs(t) + 0.5)
            levels[i, j] = <int>lv if t > 0 else -<int>lv
    return out


def splat_forward(values, dx, dy):
    """See _ref.splat_forward; raster source order, corners TL,TR,BL,BR."""
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const float[:, ::1] fdx = np.ascontiguousarray(dx, dtype=np.float32)
    cdef const float[:, ::1] fdy = np.ascontiguousarray(dy, dtype=np.float32)
    cdef Py_ssize_t h = v.shape[0], w = v.shape[1]
    if fdx.shape[0] != h or fdx.shape[1] != w or fdy.shape[0] != h or fdy.shape[1] != w:
        raise ValueError("flow shape differs from value grid")
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef double val, fx, fy, wx, wy
    cdef long long x0, y0, x1, y1
    for y in range(h):
        for x in range(w):
            val = v[y, x]
            fx = x + <double>fdx[y, x]
            fy = y + <double>fdy[y, x]
            wx = fx - floor(fx)
            wy = fy - floor(fy)
            x0 = <long long>floor(fx)
            y0 = <long long>floor(fy)
            x1 = x0 + 1
            y1 = y0 + 1
            if 0 <= x0 < w and 0 <= y0 < h:
                out[y0, x0] += (1.0 - wx) * (1.0 - wy) * val
            if 0 <= x1 < w and 0 <= y0 < h:
                out[y0, x1] += wx * (1.0 - wy) * val
            if 0 <= x0 < w and 0 <= y1 < h:
                out[y1, x0] += (1.0 - wx) * wy * val
            if 0 <= x1 < w and 0 <= y1 < h:
                out[y1, x1] += wx * wy * val
    return out_arr
