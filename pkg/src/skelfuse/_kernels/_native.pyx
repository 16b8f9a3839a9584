# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels.

Arithmetic mirrors the NumPy backend expression for expression (and the
extension is compiled with -ffp-contract=off), so both backends produce
bit-identical results.
"""

from libc.math cimport ceil, exp, floor

import numpy as np

NAME = "compiled"


def render_points(double[:, ::1] out, double[:, ::1] points, double sigma):
    """Max-composite windowed Gaussians into a float64 (H, W) heatmap."""
    cdef Py_ssize_t h = out.shape[0]
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t n = points.shape[0]
    cdef double s2 = 2.0 * sigma * sigma
    cdef long win = <long>ceil(3.0 * sigma) + 1
    cdef Py_ssize_t i, px, py
    cdef long x0, x1, y0, y1
    cdef double x, y, score, dx, dy, val
    with nogil:
        for i in range(n):
            x = points[i, 0]
            y = points[i, 1]
            score = points[i, 2]
            if score <= 0.0:
                continue
            x0 = <long>ceil(x - win)
            if x0 < 0:
                x0 = 0
            x1 = <long>floor(x + win)
            if x1 > w - 1:
                x1 = w - 1
            y0 = <long>ceil(y - win)
            if y0 < 0:
                y0 = 0
            y1 = <long>floor(y + win)
            if y1 > h - 1:
                y1 = h - 1
            for py in range(y0, y1 + 1):
                dy = py - y
                for px in range(x0, x1 + 1):
                    dx = px - x
                    val = exp(-(dx * dx + dy * dy) / s2) * score
                    if val > out[py, px]:
                        out[py, px] = val


def render_volume(
    float[:, :, :, ::1] out,
    int[::1] chans,
    int[::1] times,
    double[:, ::1] points,
    double sigma,
):
    """Max-composite Gaussians into a float32 (C, T, H, W) volume."""
    cdef Py_ssize_t h = out.shape[2]
    cdef Py_ssize_t w = out.shape[3]
    cdef Py_ssize_t n = points.shape[0]
    cdef double s2 = 2.0 * sigma * sigma
    cdef long win = <long>ceil(3.0 * sigma) + 1
    cdef Py_ssize_t i, px, py
    cdef long x0, x1, y0, y1, c, t
    cdef double x, y, score, dx, dy
    cdef float val
    with nogil:
        for i in range(n):
            x = points[i, 0]
            y = points[i, 1]
            score = points[i, 2]
            if score <= 0.0:
                continue
            c = chans[i]
            t = times[i]
            x0 = <long>ceil(x - win)
            if x0 < 0:
                x0 = 0
            x1 = <long>floor(x + win)
            if x1 > w - 1:
                x1 = w - 1
            y0 = <long>ceil(y - win)
            if y0 < 0:
                y0 = 0
            y1 = <long>floor(y + win)
            if y1 > h - 1:
                y1 = h - 1
            for py in range(y0, y1 + 1):
                dy = py - y
                for px in range(x0, x1 + 1):
                    dx = px - x
                    val = <float>(exp(-(dx * dx + dy * dy) / s2) * score)
                    if val > out[c, t, py, px]:
                        out[c, t, py, px] = val


def resize_bilinear(const unsigned char[:, :, ::1] src, Py_ssize_t out_h, Py_ssize_t out_w):
    """Corner-aligned bilinear resize of a uint8 (H, W, C) image."""
    cdef Py_ssize_t src_h = src.shape[0]
    cdef Py_ssize_t src_w = src.shape[1]
    cdef Py_ssize_t nc = src.shape[2]
    cdef double scale_y = (src_h - 1.0) / (out_h - 1.0) if out_h > 1 else 0.0
    cdef double scale_x = (src_w - 1.0) / (out_w - 1.0) if out_w > 1 else 0.0
    out = np.empty((out_h, out_w, nc), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] dst = out
    cdef Py_ssize_t oy, ox, ch, y0, x0, y1, x1
    cdef double sy, sx, fy, fx, a, b, c, d, val
    with nogil:
        for oy in range(out_h):
            sy = oy * scale_y
            y0 = <Py_ssize_t>floor(sy)
            fy = sy - floor(sy)
            y1 = y0 + 1
            if y1 > src_h - 1:
                y1 = src_h - 1
            for ox in range(out_w):
                sx = ox * scale_x
                x0 = <Py_ssize_t>floor(sx)
                fx = sx - floor(sx)
                x1 = x0 + 1
                if x1 > src_w - 1:
                    x1 = src_w - 1
                for ch in range(nc):
                    a = src[y0, x0, ch]
                    b = src[y0, x1, ch]
                    c = src[y1, x0, ch]
                    d = src[y1, x1, ch]
                    val = (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
                    val = floor(val + 0.5)
                    if val < 0.0:
                        val = 0.0
                    if val > 255.0:
                        val = 255.0
                    dst[oy, ox, ch] = <unsigned char>val
    return out
