"""Per-frame object points: centroids, confidence filtering, relevance selection.

All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    DetectionSet,
    LEFT_WRIST,
    NUM_OBJECT_CLASSES,
    OBJECT_NAMES,
    ObjectInstance,
    RIGHT_WRIST,
    SkeletonFrame,
    SkelfuseError,
    reference_person,
)


@dataclass(frozen=True)
class ObjectPoint:
    """One object reduced to a point. Absent points are all-zero."""

    class_index: int
    x: float
    y: float
    score: float
    present: bool

    @property
    def class_name(self) -> str:
        return OBJECT_NAMES[self.class_index]


def absent_point(class_index: int) -> ObjectPoint:
    return ObjectPoint(class_index=class_index, x=0.0, y=0.0, score=0.0, present=False)


def mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean of a pixel set's coordinates.

    mask: (N, 2) array of integer (x, y) pixels, N >= 1.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[1] != 2 or mask.shape[0] == 0:
        raise SkelfuseError("mask must be a non-empty (N, 2) pixel array")
    n = float(mask.shape[0])
    return (float(mask[:, 0].sum()) / n, float(mask[:, 1].sum()) / n)


def filter_by_score(detections: DetectionSet, tau: float) -> DetectionSet:
    """Keep instances with score strictly greater than tau, order preserved."""
    return DetectionSet(
        frame_index=detections.frame_index,
        instances=tuple(inst for inst in detections.instances if inst.score > tau),
    )


def _wrists(skeleton: SkeletonFrame) -> list[tuple[float, float]]:
    """Detected wrist positions of the reference person (may be empty)."""
    ref = reference_person(skeleton)
    if ref is None:
        return []
    person = skeleton.persons[ref]
    wrists = []
    for joint in (LEFT_WRIST, RIGHT_WRIST):
        x, y, s = person[joint]
        if s > 0.0:
            wrists.append((float(x), float(y)))
    return wrists


def _wrist_distance(centroid: tuple[float, float], wrists: list[tuple[float, float]]) -> float:
    """Sum of Euclidean distances from a centroid to every detected wrist."""
    cx, cy = centroid
    return sum(math.hypot(cx - wx, cy - wy) for wx, wy in wrists)


def select_most_relevant(
    detections: DetectionSet, skeleton: SkeletonFrame
) -> list[ObjectPoint]:
    """Pick, per object class, the instance nearest to the worker's hands.

    Relevance is the summed Euclidean distance from the mask centroid to the
    reference person's detected wrists (one wrist alone if the other is
    missing). Ties go to the higher score, then to earlier detection-file
    order. With no detected wrists the highest-score instance wins. Classes
    with no candidate yield an absent (all-zero) point.

    Always returns exactly 7 points, in object class order.
    """
    wrists = _wrists(skeleton)
    # (distance, -score, file order) per candidate; lexicographic min picks
    # the winner and encodes both tie-breaks.
    best: dict[int, tuple[tuple[float, float, int], ObjectInstance]] = {}
    for order, inst in enumerate(detections.instances):
        if wrists:
            key = (_wrist_distance(inst.centroid, wrists), -inst.score, order)
        else:
            key = (0.0, -inst.score, order)
        current = best.get(inst.class_index)
        if current is None or key < current[0]:
            best[inst.class_index] = (key, inst)
    points = []
    for class_index in range(NUM_OBJECT_CLASSES):
        entry = best.get(class_index)
        if entry is None:
            points.append(absent_point(class_index))
        else:
            inst = entry[1]
            cx, cy = inst.centroid
            points.append(
                ObjectPoint(
                    class_index=class_index, x=cx, y=cy, score=inst.score, present=True
                )
            )
    return points


def object_points_all(detections: DetectionSet) -> list[ObjectPoint]:
    """One point per instance, no per-class reduction, file order preserved."""
    points = []
    for inst in detections.instances:
        cx, cy = inst.centroid
        points.append(
            ObjectPoint(
                class_index=inst.class_index, x=cx, y=cy, score=inst.score, present=True
            )
        )
    return points
