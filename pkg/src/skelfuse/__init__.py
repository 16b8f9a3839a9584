"""Skeleton and object fusion encodings for assembly-action recognition.

The package turns per-frame 2D pose estimates and object instance
detections into two classifier-ready encodings: a compact column image
(one row per joint or object class, one column per frame) and a Gaussian
heatmap volume (one channel per joint or object class). It also ships the
ingestion formats, the most-relevant-object selector that fuses the two
modalities, verb-level label remapping, evaluation metrics, a
deterministic synthetic data harness with linear baselines, and a CLI.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .column_image import (
    encode_clip_image,
    fit_normalizer,
    normalize_coord,
    resize_bilinear,
)
from .heatmaps import (
    clip_crop_box,
    encode_clip_heatmaps,
    gaussian_heatmap,
    temporal_sample,
)
from .metrics import (
    confusion_matrix,
    mean_class_accuracy,
    remap_clip_to_verbs,
    top1_accuracy,
)
from .model import (
    JOINT_NAMES,
    OBJECT_NAMES,
    ROW_LABELS,
    VERBS,
    ActionLabel,
    Clip,
    DegenerateRangeError,
    DetectionSet,
    EncodedImage,
    FormatError,
    HeatmapVolume,
    Normalizer,
    ObjectInstance,
    ParseError,
    SkeletonFrame,
    SkelfuseError,
    UnknownClassError,
    ValidationError,
    VerbMap,
)
from .objects import filter_by_score, mask_centroid, select_most_relevant

__version__ = "0.1.0"

__all__ = [
    "ActionLabel",
    "Clip",
    "DegenerateRangeError",
    "DetectionSet",
    "EncodedImage",
    "FormatError",
    "HeatmapVolume",
    "JOINT_NAMES",
    "KERNEL_BACKEND",
    "Normalizer",
    "OBJECT_NAMES",
    "ObjectInstance",
    "ParseError",
    "ROW_LABELS",
    "SkeletonFrame",
    "SkelfuseError",
    "UnknownClassError",
    "VERBS",
    "ValidationError",
    "VerbMap",
    "clip_crop_box",
    "confusion_matrix",
    "encode_clip_heatmaps",
    "encode_clip_image",
    "filter_by_score",
    "fit_normalizer",
    "gaussian_heatmap",
    "mask_centroid",
    "mean_class_accuracy",
    "normalize_coord",
    "remap_clip_to_verbs",
    "resize_bilinear",
    "select_most_relevant",
    "temporal_sample",
    "top1_accuracy",
]
