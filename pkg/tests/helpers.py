"""Shared fixture builders for the test suite.

Everything here constructs package input values (frames, detections,
clips); nothing here reimplements package logic. Deterministic random
fixtures take a numpy Generator so tests control their own seeds.
"""

from __future__ import annotations

import numpy as np

from skelfuse.model import (
    ActionLabel,
    Clip,
    DetectionSet,
    ObjectInstance,
    SkeletonFrame,
    make_clip,
)

LABEL = ActionLabel(class_id=0, class_name="pick up leg", verb_id=5)


def person_array(joints: dict[int, tuple[float, float, float]] | None = None) -> np.ndarray:
    """A (17, 3) keypoint array, zero (undetected) except the given joints."""
    person = np.zeros((17, 3), dtype=np.float64)
    for joint, (x, y, score) in (joints or {}).items():
        person[joint] = (x, y, score)
    return person


def full_person(x: float, y: float, score: float = 1.0, spread: float = 10.0) -> np.ndarray:
    """A (17, 3) array with every joint detected on a small diagonal."""
    person = np.empty((17, 3), dtype=np.float64)
    for j in range(17):
        person[j] = (x + spread * j / 16.0, y + spread * j / 16.0, score)
    return person


def rect_instance(
    class_index: int, x0: int, y0: int, width: int, height: int, score: float
) -> ObjectInstance:
    """An object whose mask is a filled axis-aligned rectangle."""
    pixels = [(x, y) for y in range(y0, y0 + height) for x in range(x0, x0 + width)]
    return ObjectInstance(class_index=class_index, score=score, pixels=np.array(pixels))


def point_instance(class_index: int, x: int, y: int, score: float) -> ObjectInstance:
    """An object whose mask is a single pixel (centroid exactly (x, y))."""
    return ObjectInstance(class_index=class_index, score=score, pixels=np.array([[x, y]]))


def pixels_instance(class_index: int, pixels, score: float) -> ObjectInstance:
    return ObjectInstance(class_index=class_index, score=score, pixels=np.array(pixels))


def clip_of(persons_per_frame, instances_per_frame=None, label=LABEL, view="top",
            source_id="fixture"):
    """Build a clip from per-frame person lists and optional instance lists."""
    n = len(persons_per_frame)
    if instances_per_frame is None:
        instances_per_frame = [[] for _ in range(n)]
    skeletons = [
        SkeletonFrame(frame_index=i, persons=tuple(persons))
        for i, persons in enumerate(persons_per_frame)
    ]
    detections = [
        DetectionSet(frame_index=i, instances=tuple(instances))
        for i, instances in enumerate(instances_per_frame)
    ]
    return make_clip(skeletons, detections, label, view, source_id)


def random_person(rng: np.random.Generator, detected_all: bool = False) -> np.ndarray:
    """A random keypoint array; roughly 15% of joints undetected."""
    person = np.empty((17, 3), dtype=np.float64)
    person[:, 0] = rng.uniform(0.0, 200.0, size=17)
    person[:, 1] = rng.uniform(0.0, 150.0, size=17)
    person[:, 2] = rng.uniform(0.2, 1.0, size=17)
    if not detected_all:
        person[rng.random(17) < 0.15, 2] = 0.0
    return person


def random_instances(
    rng: np.random.Generator, max_count: int = 4, duplicate_rate: float = 0.2
) -> list[ObjectInstance]:
    """Random rectangle detections, sometimes duplicating a previous one.

    Duplicates share pixels (hence centroid and wrist distance) and
    sometimes the score too, which exercises both selection tie-breaks.
    """
    instances: list[ObjectInstance] = []
    for _ in range(int(rng.integers(0, max_count + 1))):
        if instances and rng.random() < duplicate_rate:
            prev = instances[int(rng.integers(0, len(instances)))]
            score = prev.score if rng.random() < 0.5 else float(rng.uniform(0.05, 1.0))
            instances.append(
                ObjectInstance(
                    class_index=prev.class_index,
                    score=round(score, 6),
                    pixels=prev.pixels.copy(),
                )
            )
            continue
        instances.append(
            rect_instance(
                class_index=int(rng.integers(0, 7)),
                x0=int(rng.integers(0, 180)),
                y0=int(rng.integers(0, 130)),
                width=int(rng.integers(1, 5)),
                height=int(rng.integers(1, 5)),
                score=round(float(rng.uniform(0.05, 1.0)), 6),
            )
        )
    return instances


def random_clip(
    rng: np.random.Generator,
    n_frames: int | None = None,
    max_persons: int = 2,
    with_instances: bool = True,
) -> Clip:
    """A small random clip with at least one detected joint overall."""
    n = n_frames if n_frames is not None else int(rng.integers(3, 7))
    persons_per_frame = []
    instances_per_frame = []
    for _ in range(n):
        count = int(rng.integers(0, max_persons + 1))
        persons_per_frame.append([random_person(rng) for _ in range(count)])
        instances_per_frame.append(random_instances(rng) if with_instances else [])
    # Guarantee the clip has a detected joint so crop boxes are defined.
    persons_per_frame[0].append(random_person(rng, detected_all=True))
    return clip_of(persons_per_frame, instances_per_frame)
