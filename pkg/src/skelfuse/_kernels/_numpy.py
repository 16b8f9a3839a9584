"""NumPy implementation of the hot kernels.

Selected automatically when the compiled extension is unavailable. Both
backends implement the exact same arithmetic (same expression trees, same
float64 intermediate precision), so their outputs are bit-identical at the
contract level: float64 for single heatmaps, float32 for volumes, uint8 for
resized images.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "numpy"


def render_points(out: np.ndarray, points: np.ndarray, sigma: float) -> None:
    """Max-composite windowed Gaussians into a float64 (H, W) heatmap.

    Each (x, y, score) row contributes exp(-((px-x)^2 + (py-y)^2) / (2 sigma^2))
    * score at every grid pixel within +-(ceil(3 sigma) + 1) of the center on
    both axes; pixels outside that window are untouched.
    """
    h, w = out.shape
    s2 = 2.0 * sigma * sigma
    win = math.ceil(3.0 * sigma) + 1
    for x, y, score in points:
        if score <= 0.0:
            continue
        x0 = max(0, math.ceil(x - win))
        x1 = min(w - 1, math.floor(x + win))
        y0 = max(0, math.ceil(y - win))
        y1 = min(h - 1, math.floor(y + win))
        if x0 > x1 or y0 > y1:
            continue
        dx = np.arange(x0, x1 + 1, dtype=np.float64) - x
        dy = np.arange(y0, y1 + 1, dtype=np.float64) - y
        vals = np.exp(-(dx[None, :] * dx[None, :] + dy[:, None] * dy[:, None]) / s2) * score
        region = out[y0 : y1 + 1, x0 : x1 + 1]
        np.maximum(region, vals, out=region)


def render_volume(
    out: np.ndarray,
    chans: np.ndarray,
    times: np.ndarray,
    points: np.ndarray,
    sigma: float,
) -> None:
    """Max-composite Gaussians into a float32 (C, T, H, W) volume.

    Point i goes to channel chans[i] at time slot times[i]. Contributions are
    computed in float64, cast to float32, then max-composited (cast commutes
    with max, so this equals a float64 composite cast once at the end).
    """
    h, w = out.shape[2], out.shape[3]
    s2 = 2.0 * sigma * sigma
    win = math.ceil(3.0 * sigma) + 1
    for i in range(len(points)):
        x, y, score = points[i]
        if score <= 0.0:
            continue
        x0 = max(0, math.ceil(x - win))
        x1 = min(w - 1, math.floor(x + win))
        y0 = max(0, math.ceil(y - win))
        y1 = min(h - 1, math.floor(y + win))
        if x0 > x1 or y0 > y1:
            continue
        dx = np.arange(x0, x1 + 1, dtype=np.float64) - x
        dy = np.arange(y0, y1 + 1, dtype=np.float64) - y
        vals = np.exp(-(dx[None, :] * dx[None, :] + dy[:, None] * dy[:, None]) / s2) * score
        vals32 = vals.astype(np.float32)
        region = out[chans[i], times[i], y0 : y1 + 1, x0 : x1 + 1]
        np.maximum(region, vals32, out=region)


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of a uint8 (H, W, C) image.

    Channels are interpolated independently in float64; results are rounded
    half away from zero back to uint8.
    """
    src_h, src_w, _ = src.shape
    scale_y = (src_h - 1) / (out_h - 1) if out_h > 1 else 0.0
    scale_x = (src_w - 1) / (out_w - 1) if out_w > 1 else 0.0
    sy = np.arange(out_h, dtype=np.float64) * scale_y
    sx = np.arange(out_w, dtype=np.float64) * scale_x
    y0 = np.floor(sy)
    x0 = np.floor(sx)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    srcf = src.astype(np.float64)
    a = srcf[y0[:, None], x0[None, :]]
    b = srcf[y0[:, None], x1[None, :]]
    c = srcf[y1[:, None], x0[None, :]]
    d = srcf[y1[:, None], x1[None, :]]
    val = (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
    return np.clip(np.floor(val + 0.5), 0.0, 255.0).astype(np.uint8)
