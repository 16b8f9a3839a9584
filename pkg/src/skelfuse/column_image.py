"""Column-image encoding of skeleton and object trajectories.

A clip is encoded as a small RGB image with one column per frame and one
row per signal channel: 17 joint rows for the reference person followed by
7 object rows, one per furniture class. The red channel holds the
normalized x coordinate, the green channel the normalized y coordinate,
and the blue channel is always zero.

Coordinates are mapped to bytes with a single scalar normalizer fitted on
training data:

    u = 255 * (v - c_min) / (c_max - c_min)

clamped to [0, 255] and rounded half away from zero. The byte 0 is
reserved to mean "absent": an undetected joint or object class leaves its
cell black, and a detected coordinate that would quantize to 0 is lifted
to 1 so it stays distinguishable from absence.

The sidecar written next to each PNG records the normalizer range (9
significant digits) and the row labels so images remain interpretable
without the originating dataset.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np
from PIL import Image

from . import _kernels
from .model import (
    ROW_LABELS,
    Clip,
    DegenerateRangeError,
    EncodedImage,
    Normalizer,
    ValidationError,
    reference_person,
)
from .objects import filter_by_score, select_most_relevant

DEFAULT_SCORE_THRESHOLD = 0.1


def fit_normalizer(clips: Iterable[Clip]) -> Normalizer:
    """Fit the shared coordinate range over every detected joint.

    Both x and y values of all joints with a positive detection score, of
    all persons in all frames of all ``clips``, are pooled into a single
    scalar range. Raises DegenerateRangeError when no joint is detected or
    when all detected coordinates are equal.
    """
    c_min = math.inf
    c_max = -math.inf
    for clip in clips:
        for frame, _ in clip.frames:
            for person in frame.persons:
                detected = person[person[:, 2] > 0.0]
                if detected.size == 0:
                    continue
                coords = detected[:, :2]
                c_min = min(c_min, float(coords.min()))
                c_max = max(c_max, float(coords.max()))
    if not math.isfinite(c_min):
        raise DegenerateRangeError("no detected joints to fit a normalizer on")
    if c_max <= c_min:
        raise DegenerateRangeError(
            f"degenerate coordinate range [{c_min!r}, {c_max!r}]"
        )
    return Normalizer(c_min=c_min, c_max=c_max)


def normalize_coord(value: float, normalizer: Normalizer) -> int:
    """Map one coordinate to a byte in [0, 255].

    Values outside the fitted range clamp to the ends; ties at .5 round
    away from zero (the result is never negative, so away from zero means
    up).
    """
    span = normalizer.c_max - normalizer.c_min
    u = 255.0 * (value - normalizer.c_min) / span
    if u < 0.0:
        u = 0.0
    elif u > 255.0:
        u = 255.0
    return int(math.floor(u + 0.5))


def _lifted(value: float, normalizer: Normalizer) -> int:
    """Normalize a detected coordinate, keeping it distinct from absence."""
    byte = normalize_coord(value, normalizer)
    return byte if byte > 0 else 1


def encode_clip_image(
    clip: Clip,
    normalizer: Normalizer,
    *,
    with_skeleton: bool = True,
    with_objects: bool = True,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
) -> EncodedImage:
    """Encode a clip as a 24-row column image.

    Rows 0-16 hold the reference person's joints (the person with the
    highest mean keypoint score in each frame); rows 17-23 hold the most
    relevant instance of each object class, chosen per frame by proximity
    to the reference person's wrists among detections whose score exceeds
    ``score_threshold``. Disabled bands are left black; disabling both
    bands is rejected.
    """
    if not with_skeleton and not with_objects:
        raise ValidationError("at least one of skeleton or object rows must be enabled")
    pixels = np.zeros((len(ROW_LABELS), len(clip.frames), 3), dtype=np.uint8)
    for t, (frame, detections) in enumerate(clip.frames):
        if with_skeleton:
            ref = reference_person(frame)
            if ref is not None:
                person = frame.persons[ref]
                for j in range(17):
                    x, y, score = person[j]
                    if score > 0.0:
                        pixels[j, t, 0] = _lifted(float(x), normalizer)
                        pixels[j, t, 1] = _lifted(float(y), normalizer)
        if with_objects:
            kept = filter_by_score(detections, score_threshold)
            for point in select_most_relevant(kept, frame):
                if point.present:
                    row = 17 + point.class_index
                    pixels[row, t, 0] = _lifted(point.x, normalizer)
                    pixels[row, t, 1] = _lifted(point.y, normalizer)
    return EncodedImage(pixels=pixels)


def resize_bilinear(
    image: EncodedImage, out_h: int, out_w: int, backend: str | None = None
) -> EncodedImage:
    """Resample an encoded image to a fixed network input size.

    Uses separable bilinear interpolation with corner alignment: source
    positions are ``i * (src - 1) / (out - 1)`` along each axis, and a
    singleton axis maps everywhere to its only sample. Interpolated values
    round half away from zero back to bytes. Row semantics do not survive
    resampling, so the result carries no row labels unless the shape is
    unchanged.
    """
    if out_h < 1 or out_w < 1:
        raise ValidationError(f"target size must be positive, got {out_h}x{out_w}")
    kernel = _kernels.get(backend)
    resized = kernel.resize_bilinear(image.pixels, out_h, out_w)
    same = resized.shape[:2] == image.pixels.shape[:2]
    return EncodedImage(pixels=resized, row_labels=image.row_labels if same else None)


def write_image_png(image: EncodedImage, path) -> None:
    """Write the raw pixel grid as an RGB PNG."""
    Image.fromarray(np.asarray(image.pixels), mode="RGB").save(path, format="PNG")


def read_image_png(path, row_labels: tuple[str, ...] | None = ROW_LABELS) -> EncodedImage:
    """Read an RGB PNG back into an EncodedImage."""
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    labels = row_labels if row_labels is not None and pixels.shape[0] == len(row_labels) else None
    return EncodedImage(pixels=pixels, row_labels=labels)


def write_image_sidecar(
    path, normalizer: Normalizer, row_labels: Sequence[str] = ROW_LABELS
) -> None:
    """Write the text sidecar describing an encoded image.

    Layout: one ``c_min=`` line and one ``c_max=`` line with the range at
    9 significant digits, then one ``<row>,<label>`` line per image row.
    """
    lines = [f"c_min={normalizer.c_min:.9g}", f"c_max={normalizer.c_max:.9g}"]
    lines.extend(f"{i},{label}" for i, label in enumerate(row_labels))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
