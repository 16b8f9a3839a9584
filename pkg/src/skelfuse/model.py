"""Shared domain vocabulary: joints, objects, frames, clips, labels, outputs.

All container types are immutable after construction (arrays are marked
read-only) and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

# 17 keypoints, COCO convention, fixed order shared by every encoding.
JOINT_NAMES: tuple[str, ...] = (
    "nose",
    "left-eye",
    "right-eye",
    "left-ear",
    "right-ear",
    "left-shoulder",
    "right-shoulder",
    "left-elbow",
    "right-elbow",
    "left-wrist",
    "right-wrist",
    "left-hip",
    "right-hip",
    "left-knee",
    "right-knee",
    "left-ankle",
    "right-ankle",
)
JOINT_INDEX: dict[str, int] = {name: i for i, name in enumerate(JOINT_NAMES)}
NUM_JOINTS = len(JOINT_NAMES)

# COCO has no hand point; wrists stand in for the hands.
LEFT_WRIST = JOINT_INDEX["left-wrist"]
RIGHT_WRIST = JOINT_INDEX["right-wrist"]

# The seven furniture part categories, fixed order.
OBJECT_NAMES: tuple[str, ...] = (
    "table top",
    "leg",
    "shelf",
    "side panel",
    "front panel",
    "bottom panel",
    "rear panel",
)
OBJECT_INDEX: dict[str, int] = {name: i for i, name in enumerate(OBJECT_NAMES)}
NUM_OBJECT_CLASSES = len(OBJECT_NAMES)

# Row/channel manifest shared by the column-image and heatmap encoders:
# 17 joint rows first, then 7 object rows.
ROW_LABELS: tuple[str, ...] = JOINT_NAMES + OBJECT_NAMES
NUM_ROWS = len(ROW_LABELS)

# The twelve assembly verbs, lexicographic order (verb id = index here).
VERBS: tuple[str, ...] = (
    "align",
    "attach",
    "flip",
    "insert",
    "lay down",
    "pick up",
    "position",
    "push",
    "rotate",
    "slide",
    "spin",
    "tighten",
)

VIEWS = ("top", "front", "side")
SPLITS = ("train", "test")


class SkelfuseError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SkelfuseError):
    """Malformed line in a skeleton/detection/manifest file."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class FormatError(SkelfuseError):
    """Structurally invalid input (e.g. non-monotonic frame indices)."""


class ValidationError(SkelfuseError):
    """A domain invariant was violated while constructing a value."""


class UnknownClassError(SkelfuseError, KeyError):
    """A class name is absent from the loaded class map."""

    def __init__(self, class_name: str):
        super().__init__(f"unknown action class: {class_name!r}")
        self.class_name = class_name


class DegenerateRangeError(SkelfuseError, ValueError):
    """Normalizer fit found no usable coordinate range."""


class Keypoint2D(NamedTuple):
    """A single 2D keypoint. score == 0 means "not detected"."""

    x: float
    y: float
    score: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def validate_person(person: np.ndarray) -> np.ndarray:
    """Check one (17, 3) keypoint array: columns x, y, score."""
    person = np.asarray(person, dtype=np.float64)
    if person.shape != (NUM_JOINTS, 3):
        raise ValidationError(
            f"person array must have shape ({NUM_JOINTS}, 3), got {person.shape}"
        )
    if not np.all(np.isfinite(person[:, :2])):
        raise ValidationError("keypoint coordinates must be finite")
    scores = person[:, 2]
    if np.any(scores < 0.0) or np.any(scores > 1.0) or not np.all(np.isfinite(scores)):
        raise ValidationError("keypoint scores must lie in [0, 1]")
    return _freeze(person)


@dataclass(frozen=True)
class SkeletonFrame:
    """All detected persons of one video frame, each a (17, 3) array."""

    frame_index: int
    persons: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError("frame_index must be >= 0")
        object.__setattr__(
            self, "persons", tuple(validate_person(p) for p in self.persons)
        )

    def keypoint(self, person: int, joint: int) -> Keypoint2D:
        x, y, s = self.persons[person][joint]
        return Keypoint2D(float(x), float(y), float(s))

    def __eq__(self, other):
        if not isinstance(other, SkeletonFrame):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and len(self.persons) == len(other.persons)
            and all(np.array_equal(a, b) for a, b in zip(self.persons, other.persons))
        )

    __hash__ = None


@dataclass(frozen=True)
class ObjectInstance:
    """One detected object: class, confidence and its pixel-set mask.

    `pixels` is an (N, 2) int array of (x, y) pixel coordinates, stored
    sorted by (y, x) so that equal masks compare equal.
    """

    class_index: int
    score: float
    pixels: np.ndarray

    def __post_init__(self):
        if not 0 <= self.class_index < NUM_OBJECT_CLASSES:
            raise ValidationError(f"object class index out of range: {self.class_index}")
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValidationError(f"object score must lie in [0, 1], got {self.score}")
        pixels = np.asarray(self.pixels, dtype=np.int64)
        if pixels.ndim != 2 or pixels.shape[1] != 2 or pixels.shape[0] == 0:
            raise ValidationError("mask must be a non-empty (N, 2) pixel array")
        order = np.lexsort((pixels[:, 0], pixels[:, 1]))
        pixels = pixels[order]
        if np.any(np.all(pixels[1:] == pixels[:-1], axis=1)):
            raise ValidationError("mask contains duplicate pixels")
        object.__setattr__(self, "pixels", _freeze(pixels))

    @property
    def class_name(self) -> str:
        return OBJECT_NAMES[self.class_index]

    @cached_property
    def centroid(self) -> tuple[float, float]:
        """Arithmetic mean of the member pixel coordinates."""
        xs = self.pixels[:, 0]
        ys = self.pixels[:, 1]
        n = float(len(xs))
        return (float(xs.sum()) / n, float(ys.sum()) / n)

    def pixel_set(self) -> set[tuple[int, int]]:
        return {(int(x), int(y)) for x, y in self.pixels}

    def __eq__(self, other):
        if not isinstance(other, ObjectInstance):
            return NotImplemented
        return (
            self.class_index == other.class_index
            and self.score == other.score
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


@dataclass(frozen=True)
class DetectionSet:
    """Object instances of one frame, in detection file order."""

    frame_index: int
    instances: tuple[ObjectInstance, ...] = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError("frame_index must be >= 0")
        object.__setattr__(self, "instances", tuple(self.instances))

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


@dataclass(frozen=True)
class ActionLabel:
    class_id: int
    class_name: str
    verb_id: int

    def __post_init__(self):
        if self.class_id < 0 or self.verb_id < 0:
            raise ValidationError("label ids must be >= 0")


@dataclass(frozen=True)
class Clip:
    """An ordered, labeled sequence of (skeleton, detections) frame pairs."""

    frames: tuple[tuple[SkeletonFrame, DetectionSet], ...]
    label: ActionLabel
    view: str
    source_id: str

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError("clip must contain at least one frame")
        if self.view not in VIEWS:
            raise ValidationError(f"unknown view: {self.view!r}")
        prev = -1
        for skeleton, detections in frames:
            if skeleton.frame_index != detections.frame_index:
                raise ValidationError(
                    f"skeleton frame {skeleton.frame_index} paired with "
                    f"detection frame {detections.frame_index}"
                )
            if skeleton.frame_index <= prev:
                raise FormatError(
                    f"frame indices must be strictly increasing, got "
                    f"{skeleton.frame_index} after {prev}"
                )
            prev = skeleton.frame_index
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def skeletons(self) -> list[SkeletonFrame]:
        return [s for s, _ in self.frames]

    def detections(self) -> list[DetectionSet]:
        return [d for _, d in self.frames]


@dataclass(frozen=True)
class Normalizer:
    """Scalar coordinate range pooled over both axes of the training joints."""

    c_min: float
    c_max: float

    def __post_init__(self):
        if not (math.isfinite(self.c_min) and math.isfinite(self.c_max)):
            raise DegenerateRangeError("normalizer bounds must be finite")
        if not self.c_max > self.c_min:
            raise DegenerateRangeError(
                f"normalizer range is degenerate: c_min={self.c_min}, c_max={self.c_max}"
            )


@dataclass(frozen=True)
class EncodedImage:
    """Column image: one row per joint/object class, one column per frame.

    pixels: uint8 array of shape (24, T, 3); R = normalized x, G = normalized
    y, B always 0. Absent entries are (0, 0, 0). Resized images no longer
    have per-row semantics and carry row_labels=None.
    """

    pixels: np.ndarray
    row_labels: tuple[str, ...] | None = ROW_LABELS

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.dtype != np.uint8:
            raise ValidationError("image pixels must be uint8")
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValidationError(f"image must have shape (rows, T, 3), got {pixels.shape}")
        if self.row_labels is not None and pixels.shape[0] != len(self.row_labels):
            raise ValidationError(
                f"{pixels.shape[0]} rows but {len(self.row_labels)} row labels"
            )
        object.__setattr__(self, "pixels", _freeze(pixels))

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, EncodedImage):
            return NotImplemented
        return self.row_labels == other.row_labels and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None


@dataclass(frozen=True)
class HeatmapVolume:
    """Gaussian heatmap tensor of shape (channels, T, H, W), float32 in [0, 1].

    Channel order equals ROW_LABELS: 17 joint channels then 7 object channels.
    """

    values: np.ndarray
    channel_labels: tuple[str, ...] = ROW_LABELS

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype != np.float32:
            raise ValidationError("heatmap values must be float32")
        if values.ndim != 4 or values.shape[0] != len(self.channel_labels):
            raise ValidationError(
                f"volume must have shape (channels, T, H, W), got {values.shape}"
            )
        object.__setattr__(self, "values", _freeze(values))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.values.shape)

    def __eq__(self, other):
        if not isinstance(other, HeatmapVolume):
            return NotImplemented
        return self.channel_labels == other.channel_labels and np.array_equal(
            self.values, other.values
        )

    __hash__ = None


@dataclass(frozen=True)
class VerbMap:
    """Action class name -> verb name, with stable integer ids.

    Verb ids index the lexicographically sorted distinct verbs; class ids
    index the lexicographically sorted class names.
    """

    rows: Mapping[str, str]
    verbs: tuple[str, ...] = field(init=False)
    class_names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        rows = dict(self.rows)
        if not rows:
            raise ValidationError("class map must not be empty")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "verbs", tuple(sorted(set(rows.values()))))
        object.__setattr__(self, "class_names", tuple(sorted(rows)))

    def verb_name_of(self, class_name: str) -> str:
        try:
            return self.rows[class_name]
        except KeyError:
            raise UnknownClassError(class_name) from None

    def verb_id_of(self, class_name: str) -> int:
        return self.verbs.index(self.verb_name_of(class_name))

    def class_id_of(self, class_name: str) -> int:
        try:
            return self.class_names.index(class_name)
        except ValueError:
            raise UnknownClassError(class_name) from None

    def label_for(self, class_name: str) -> ActionLabel:
        return ActionLabel(
            class_id=self.class_id_of(class_name),
            class_name=class_name,
            verb_id=self.verb_id_of(class_name),
        )


def verb_of(class_name: str, class_map: VerbMap) -> int:
    """Return the verb id of an action class name."""
    return class_map.verb_id_of(class_name)


def derive_verb(class_name: str, verbs: Iterable[str]) -> str:
    """Pick the longest verb that prefixes a class name.

    This is how the shipped 33-class map was generated from its class names.
    """
    best = None
    for verb in verbs:
        if class_name == verb or class_name.startswith(verb + " "):
            if best is None or len(verb) > len(best):
                best = verb
    if best is None:
        raise UnknownClassError(class_name)
    return best


def reference_person(frame: SkeletonFrame) -> int | None:
    """Index of the person with the highest mean keypoint score, or None.

    Ties go to the lower person index.
    """
    if not frame.persons:
        return None
    means = [float(p[:, 2].mean()) for p in frame.persons]
    return int(np.argmax(means))


def make_clip(
    skeletons: Sequence[SkeletonFrame],
    detections: Sequence[DetectionSet],
    label: ActionLabel,
    view: str,
    source_id: str,
) -> Clip:
    """Pair per-frame skeletons and detections into a validated Clip."""
    if len(skeletons) != len(detections):
        raise FormatError(
            f"{len(skeletons)} skeleton frames but {len(detections)} detection frames"
        )
    return Clip(
        frames=tuple(zip(skeletons, detections)),
        label=label,
        view=view,
        source_id=source_id,
    )
