"""Gaussian heatmap volume encoding of skeleton and object trajectories.

A clip becomes a 4D volume of shape (channels, time, height, width) with
one channel per signal: 17 joint channels (all detected persons) followed
by 7 object channels. Each detection stamps an unnormalized Gaussian

    exp(-((px - x)^2 + (py - y)^2) / (2 * sigma^2)) * score

onto its channel's grid, and overlapping stamps combine by elementwise
maximum. Rendering is windowed: only pixels within ceil(3 * sigma) + 1 of
the center are touched, everything further away stays exactly zero.

Grid coordinates come from a per-clip crop box fitted tightly around every
detected joint and expanded by a 10 percent (at least one pixel) margin,
so the person occupies the full grid regardless of where the action
happens in camera space. Time is resampled to a fixed number of slots by
integer striding over source frames.
"""

from __future__ import annotations

import struct

import numpy as np

from . import _kernels
from .model import (
    ROW_LABELS,
    Clip,
    DegenerateRangeError,
    FormatError,
    HeatmapVolume,
    ValidationError,
)
from .objects import filter_by_score, object_points_all, select_most_relevant

DEFAULT_SIGMA = 0.6
DEFAULT_GRID = (64, 64)
DEFAULT_T_TARGET = 48
DEFAULT_SCORE_THRESHOLD = 0.1

OBJECT_MODES = ("most_relevant", "all")

_MAGIC = b"HMV1"


def gaussian_heatmap(
    width: int,
    height: int,
    x: float,
    y: float,
    sigma: float,
    score: float,
    backend: str | None = None,
) -> np.ndarray:
    """Render one Gaussian stamp to a float64 (height, width) grid.

    Pixels outside the rendering window of ceil(3 * sigma) + 1 around the
    center are exactly zero; the center may lie anywhere, including off
    the grid, in which case the visible tail (or nothing) is rendered.
    """
    if width < 1 or height < 1:
        raise ValidationError(f"grid must be at least 1x1, got {height}x{width}")
    if not sigma > 0.0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    out = np.zeros((height, width), dtype=np.float64)
    points = np.array([[x, y, score]], dtype=np.float64)
    _kernels.get(backend).render_points(out, points, sigma)
    return out


def temporal_sample(n_frames: int, t_target: int) -> list[int]:
    """Pick source frame indices for a fixed number of time slots.

    Slot i reads frame (i * n_frames) // t_target, so the sampling is a
    pure integer stride: it never skips past the end, repeats frames when
    upsampling, and always starts at frame 0.
    """
    if n_frames < 1:
        raise ValidationError(f"need at least one frame, got {n_frames}")
    if t_target < 1:
        raise ValidationError(f"target length must be positive, got {t_target}")
    return [(i * n_frames) // t_target for i in range(t_target)]


def clip_crop_box(clip: Clip) -> tuple[float, float, float, float]:
    """Tight box around every detected joint, padded by 10 percent.

    Considers all joints with a positive score of all persons in all
    frames. Each axis is expanded on both sides by max(0.1 * span, 1.0)
    and the lower bounds are clamped to zero (coordinates are image
    positions and never negative). Raises DegenerateRangeError when the
    clip contains no detected joint at all.
    """
    xs_min = ys_min = np.inf
    xs_max = ys_max = -np.inf
    for frame, _ in clip.frames:
        for person in frame.persons:
            detected = person[person[:, 2] > 0.0]
            if detected.size == 0:
                continue
            xs_min = min(xs_min, float(detected[:, 0].min()))
            xs_max = max(xs_max, float(detected[:, 0].max()))
            ys_min = min(ys_min, float(detected[:, 1].min()))
            ys_max = max(ys_max, float(detected[:, 1].max()))
    if not np.isfinite(xs_min):
        raise DegenerateRangeError("no detected joints to derive a crop box from")
    margin_x = max(0.1 * (xs_max - xs_min), 1.0)
    margin_y = max(0.1 * (ys_max - ys_min), 1.0)
    return (
        max(xs_min - margin_x, 0.0),
        max(ys_min - margin_y, 0.0),
        xs_max + margin_x,
        ys_max + margin_y,
    )


def _grid_scales(
    box: tuple[float, float, float, float], grid: tuple[int, int]
) -> tuple[float, float]:
    """Scale factors mapping crop box extents onto grid indices."""
    height, width = grid
    x0, y0, x1, y1 = box
    sx = (width - 1) / (x1 - x0) if x1 > x0 else 0.0
    sy = (height - 1) / (y1 - y0) if y1 > y0 else 0.0
    return sx, sy


def encode_clip_heatmaps(
    clip: Clip,
    *,
    sigma: float = DEFAULT_SIGMA,
    grid: tuple[int, int] = DEFAULT_GRID,
    t_target: int = DEFAULT_T_TARGET,
    with_skeleton: bool = True,
    with_objects: bool = True,
    object_mode: str = "most_relevant",
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
    backend: str | None = None,
) -> HeatmapVolume:
    """Encode a clip as a (24, t_target, H, W) float32 heatmap volume.

    Channels 0-16 receive every detected joint of every person; channels
    17-23 receive object mask centroids, either one most relevant instance
    per class (``object_mode="most_relevant"``) or every detection above
    the score threshold (``object_mode="all"``). Disabled bands stay zero;
    disabling both is rejected. The spatial mapping is the shared per-clip
    crop box, so joints and objects land in the same coordinate frame.
    """
    if not with_skeleton and not with_objects:
        raise ValidationError("at least one of skeleton or object channels must be enabled")
    if object_mode not in OBJECT_MODES:
        raise ValidationError(
            f"unknown object mode {object_mode!r}, expected one of {OBJECT_MODES}"
        )
    if not sigma > 0.0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    height, width = grid
    if height < 1 or width < 1:
        raise ValidationError(f"grid must be at least 1x1, got {height}x{width}")
    box = clip_crop_box(clip)
    sx, sy = _grid_scales(box, (height, width))
    x0, y0 = box[0], box[1]
    indices = temporal_sample(len(clip.frames), t_target)

    chans: list[int] = []
    times: list[int] = []
    points: list[tuple[float, float, float]] = []

    def add(channel: int, slot: int, x: float, y: float, score: float) -> None:
        chans.append(channel)
        times.append(slot)
        points.append(((x - x0) * sx, (y - y0) * sy, score))

    for slot, frame_pos in enumerate(indices):
        frame, detections = clip.frames[frame_pos]
        if with_skeleton:
            for person in frame.persons:
                for j in range(17):
                    px, py, score = person[j]
                    if score > 0.0:
                        add(j, slot, float(px), float(py), float(score))
        if with_objects:
            kept = filter_by_score(detections, score_threshold)
            if object_mode == "most_relevant":
                chosen = [p for p in select_most_relevant(kept, frame) if p.present]
            else:
                chosen = object_points_all(kept)
            for point in chosen:
                add(17 + point.class_index, slot, point.x, point.y, point.score)

    out = np.zeros((len(ROW_LABELS), t_target, height, width), dtype=np.float32)
    if points:
        _kernels.get(backend).render_volume(
            out,
            np.array(chans, dtype=np.intc),
            np.array(times, dtype=np.intc),
            np.array(points, dtype=np.float64),
            sigma,
        )
    return HeatmapVolume(values=out)


def write_heatmap_volume(volume: HeatmapVolume, path) -> None:
    """Write a heatmap volume as a little-endian HMV1 binary file.

    Layout: the 4 magic bytes ``HMV1``, four unsigned 32-bit
    little-endian dimensions (channels, time, height, width), then the
    float32 little-endian payload in C order.
    """
    vol = np.ascontiguousarray(volume.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<4I", *vol.shape))
        fh.write(vol.tobytes())


def read_heatmap_volume(path, channel_labels: tuple[str, ...] = ROW_LABELS) -> HeatmapVolume:
    """Read an HMV1 binary file back into a HeatmapVolume."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 20 or raw[:4] != _MAGIC:
        raise FormatError(f"not a heatmap volume file: {path}")
    shape = struct.unpack("<4I", raw[4:20])
    expected = 20 + 4 * int(np.prod([int(n) for n in shape], dtype=np.int64))
    if len(raw) != expected:
        raise FormatError(
            f"heatmap volume payload is {len(raw) - 20} bytes, expected {expected - 20}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=20).reshape(shape).copy()
    return HeatmapVolume(values=values, channel_labels=channel_labels)


def write_heatmap_sidecar(path, channel_labels: tuple[str, ...] = ROW_LABELS) -> None:
    """Write the ``<channel>,<label>`` sidecar for a heatmap volume."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(f"{i},{label}" for i, label in enumerate(channel_labels)) + "\n")
