"""Deterministic synthetic clip generation, baselines, and experiments.

This module manufactures labeled assembly clips whose skeleton and object
signals can be made independently informative, trains small reference
classifiers on the encodings, and runs the grid experiments that compare
skeleton-only, objects-only, and combined inputs.

Randomness
----------
All randomness flows through SplitMix64, a tiny 64-bit generator chosen
because it is trivially portable: the update is one 64-bit add and the
output one fixed xorshift-multiply chain, so any implementation in any
language reproduces the identical stream. Derived values:

* ``uniform(lo, hi)``   consumes 1 draw: ``lo + (hi - lo) * ((u >> 11) * 2**-53)``
* ``normal(mu, sigma)`` consumes 2 draws: Box-Muller cosine branch,
  ``mu + sigma * sqrt(-2 ln u1) * cos(2 pi u2)`` with
  ``u1 = ((a >> 11) + 1) * 2**-53`` (never zero) and ``u2 = (b >> 11) * 2**-53``
* ``randint(n)``        consumes 1 draw: ``u % n``
* ``bernoulli(p)``      consumes 1 draw: ``uniform(0, 1) < p``

Seeds for clips and streams are combined with ``mix_seed``, a SplitMix64
hash chain, so every clip is fully determined by (config, base seed).
Each clip uses two independent streams: stream 0 drives the skeleton,
stream 1 drives the objects. Because of that split, two templates that
differ only in their object fields emit byte-identical skeleton files for
the same seed, which is exactly the trap the separability experiments
rely on: when every class shares one skeleton motion, only the object
channels carry label information.

Draw order inside generate_clip is frozen and documented on the function.

Experiment configs
------------------
Experiments are described by a key=value text file (``#`` starts a
comment). Keys, with defaults in parentheses:

* ``classes``         comma-separated action class names, required
* ``train_clips``     clips per class in the train split (100)
* ``test_clips``      clips per class in the test split (50)
* ``frames``          frames per clip (48)
* ``width``/``height`` canvas size in pixels (320/240)
* ``noise_std``       per-axis joint jitter in pixels (2.0)
* ``distractor_rate`` expected false-positive detections per frame (0.0)
* ``score_mode``      ``gt`` for target score 1.0, ``jitter`` for
                      Uniform(0.85, 1.0) (gt)
* ``skeleton_motion`` motion id shared by every class: ``reach``,
                      ``sway``, or ``still`` (reach)
* ``seed``            base seed (7)
* ``view``            camera view tag (top)
* ``encoders``        subset of ``image,heatmap`` (heatmap)
* ``conditions``      subset of ``skeleton-only,objects-only,combined``
                      (all three)
* ``object_modes``    subset of ``most_relevant,all`` for the heatmap
                      encoder; the image encoder always uses its single
                      most-relevant row per class (most_relevant)
* ``baseline``        ``nearest_centroid`` or ``one_nn`` (nearest_centroid)
* ``remap_verbs``     1 to train/evaluate on verb labels (0)
* ``sigma``           Gaussian stddev in grid pixels (0.6)
* ``grid``            heatmap grid as HxW (64x64)
* ``t_target``        heatmap time slots (48)
* ``tau``             detection score threshold (0.1)

The report is a comma-separated table with header
``condition,encoder,object_mode,mAcc,top1`` and one row per grid cell.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .column_image import encode_clip_image, fit_normalizer
from .heatmaps import encode_clip_heatmaps
from .metrics import confusion_matrix, mean_class_accuracy, top1_accuracy
from .model import (
    JOINT_NAMES,
    NUM_OBJECT_CLASSES,
    OBJECT_INDEX,
    VERBS,
    ActionLabel,
    Clip,
    DetectionSet,
    EncodedImage,
    FormatError,
    HeatmapVolume,
    Normalizer,
    ObjectInstance,
    SkeletonFrame,
    ValidationError,
    VerbMap,
    derive_verb,
    make_clip,
)

MASK64 = (1 << 64) - 1

SKELETON_MOTIONS = ("reach", "sway", "still")
OBJECT_MOTIONS = ("approach", "orbit", "oscillate", "drift")
SCORE_MODES = ("gt", "jitter")
CONDITIONS = ("skeleton-only", "objects-only", "combined")
ENCODERS = ("image", "heatmap")
BASELINE_KINDS = ("nearest_centroid", "one_nn")

_STREAM_SKELETON = 0
_STREAM_OBJECTS = 1
_SPLIT_CODES = {"train": 0, "test": 1}

# Verbs that act on an object in place get a non-approach trajectory so
# motion shape, not just channel identity, separates them.
_MOTION_FOR_VERB = {"spin": "orbit", "rotate": "orbit", "flip": "oscillate"}


class SplitMix64:
    """Seedable 64-bit generator with the documented derivation rules."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0**-53)

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def randint(self, n: int) -> int:
        if n < 1:
            raise ValidationError(f"randint needs n >= 1, got {n}")
        return self.next_u64() % n

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed via a SplitMix64 hash chain."""
    acc = 0x243F6A8885A308D3
    for part in parts:
        acc = SplitMix64(acc ^ (part & MASK64)).next_u64()
    return acc


@dataclass(frozen=True)
class ActionTemplate:
    """Everything that shapes one action class's synthetic clips.

    Templates that share skeleton_motion and noise_std but differ in the
    object fields generate byte-identical skeleton streams for the same
    seed (the object draws come from a separate stream).
    """

    verb: str
    object_class: str | None
    skeleton_motion: str = "reach"
    object_motion: str = "approach"
    noise_std: float = 2.0
    distractor_rate: float = 0.0

    def __post_init__(self):
        if not self.verb:
            raise ValidationError("template verb must be non-empty")
        if self.object_class is not None and self.object_class not in OBJECT_INDEX:
            raise ValidationError(f"unknown object class {self.object_class!r}")
        if self.skeleton_motion not in SKELETON_MOTIONS:
            raise ValidationError(f"unknown skeleton motion {self.skeleton_motion!r}")
        if self.object_motion not in OBJECT_MOTIONS:
            raise ValidationError(f"unknown object motion {self.object_motion!r}")
        if self.noise_std < 0.0:
            raise ValidationError("noise_std must be >= 0")
        if self.distractor_rate < 0.0:
            raise ValidationError("distractor_rate must be >= 0")

    @property
    def class_name(self) -> str:
        if self.object_class is None:
            return self.verb
        return f"{self.verb} {self.object_class}"


@dataclass(frozen=True)
class GenerationSettings:
    """Canvas and scoring options shared by every clip of a dataset."""

    frames: int = 48
    width: int = 320
    height: int = 240
    score_mode: str = "gt"

    def __post_init__(self):
        if self.frames < 1:
            raise ValidationError("need at least one frame per clip")
        if self.width < 32 or self.height < 32:
            raise ValidationError("canvas must be at least 32x32 pixels")
        if self.score_mode not in SCORE_MODES:
            raise ValidationError(f"unknown score mode {self.score_mode!r}")


DEFAULT_SETTINGS = GenerationSettings()


def template_for_class(
    class_name: str,
    *,
    skeleton_motion: str = "reach",
    noise_std: float = 2.0,
    distractor_rate: float = 0.0,
) -> ActionTemplate:
    """Build a template from an action class name.

    The verb is the longest known verb prefixing the name; the remainder,
    if it names an object class, becomes the template's object. The object
    motion follows the verb: spin/rotate orbit, flip oscillates,
    everything else approaches the worker's hands.
    """
    verb = derive_verb(class_name, VERBS)
    rest = class_name[len(verb):].strip()
    object_class = rest if rest in OBJECT_INDEX else None
    return ActionTemplate(
        verb=verb,
        object_class=object_class,
        skeleton_motion=skeleton_motion,
        object_motion=_MOTION_FOR_VERB.get(verb, "approach"),
        noise_std=noise_std,
        distractor_rate=distractor_rate,
    )


# Rest pose in body-local coordinates: x grows to the figure's left, y
# grows downward, the whole figure spans roughly one unit of height.
_BASE_POSE = {
    "nose": (0.00, -0.46),
    "left-eye": (0.03, -0.50),
    "right-eye": (-0.03, -0.50),
    "left-ear": (0.06, -0.48),
    "right-ear": (-0.06, -0.48),
    "left-shoulder": (0.14, -0.30),
    "right-shoulder": (-0.14, -0.30),
    "left-elbow": (0.19, -0.12),
    "right-elbow": (-0.19, -0.12),
    "left-wrist": (0.21, 0.04),
    "right-wrist": (-0.21, 0.04),
    "left-hip": (0.09, 0.05),
    "right-hip": (-0.09, 0.05),
    "left-knee": (0.10, 0.28),
    "right-knee": (-0.10, 0.28),
    "left-ankle": (0.11, 0.50),
    "right-ankle": (-0.11, 0.50),
}
_BASE_XY = tuple(_BASE_POSE[name] for name in JOINT_NAMES)
_WRIST_JOINTS = frozenset(
    i for i, n in enumerate(JOINT_NAMES) if n in ("left-wrist", "right-wrist")
)
_ELBOW_JOINTS = frozenset(
    i for i, n in enumerate(JOINT_NAMES) if n in ("left-elbow", "right-elbow")
)


def _smoothstep(t: float) -> float:
    return t * t * (3.0 - 2.0 * t)


def _progress(frame: int, n_frames: int) -> float:
    return frame / (n_frames - 1) if n_frames > 1 else 0.0


# Fraction of the clip spent reaching; the rest of the clip the hands and
# the grabbed object hold at the work point. The dwell is what makes a
# carried object legible after mean-pooling over time.
_GRAB_POINT = 0.4


def _grab_progress(p: float) -> float:
    return _smoothstep(min(p / _GRAB_POINT, 1.0))


def _joint_position(
    joint: int,
    frame: int,
    n_frames: int,
    motion: str,
    cx: float,
    cy: float,
    scale: float,
    anchor: tuple[float, float],
) -> tuple[float, float]:
    """Noise-free position of one joint at one frame."""
    bx, by = _BASE_XY[joint]
    x = cx + scale * bx
    y = cy + scale * by
    p = _progress(frame, n_frames)
    if motion == "reach":
        s = _grab_progress(p)
        if joint in _WRIST_JOINTS:
            x += (anchor[0] - x) * s
            y += (anchor[1] - y) * s
        elif joint in _ELBOW_JOINTS:
            x += (anchor[0] - x) * 0.5 * s
            y += (anchor[1] - y) * 0.5 * s
    elif motion == "sway":
        x += 0.08 * scale * math.sin(2.0 * math.pi * p)
    return x, y


def _disc_pixels(
    cx: float, cy: float, radius: float, width: int, height: int
) -> np.ndarray:
    """Rasterize a filled disc into sorted integer pixel coordinates.

    The center is clamped so the disc stays on the canvas; every row of a
    disc is one contiguous span, which the mask serializer requires.
    """
    cx = min(max(cx, radius), width - 1.0 - radius)
    cy = min(max(cy, radius), height - 1.0 - radius)
    rows = []
    y_lo = max(math.ceil(cy - radius), 0)
    y_hi = min(math.floor(cy + radius), height - 1)
    for y in range(y_lo, y_hi + 1):
        half = math.sqrt(max(radius * radius - (y - cy) * (y - cy), 0.0))
        x_lo = max(math.ceil(cx - half), 0)
        x_hi = min(math.floor(cx + half), width - 1)
        for x in range(x_lo, x_hi + 1):
            rows.append((x, y))
    if not rows:
        rows.append((int(round(cx)), int(round(cy))))
    return np.array(rows, dtype=np.int64)


def _object_center(
    motion: str,
    params: dict,
    frame: int,
    n_frames: int,
    anchor: tuple[float, float],
) -> tuple[float, float]:
    p = _progress(frame, n_frames)
    if motion == "approach":
        s = _grab_progress(p)
        x = params["sx"] + (anchor[0] - params["sx"]) * s
        y = params["sy"] + (anchor[1] - params["sy"]) * s
    elif motion == "orbit":
        a = 2.0 * math.pi * p + params["phase"]
        x = anchor[0] + params["radius"] * math.cos(a)
        y = anchor[1] + params["radius"] * math.sin(a)
    elif motion == "oscillate":
        w = params["amp"] * math.sin(4.0 * math.pi * p + params["phase"])
        x = anchor[0] + w * math.cos(params["axis"])
        y = anchor[1] + w * math.sin(params["axis"])
    else:  # drift
        x = params["sx"] + params["vx"] * frame
        y = params["sy"] + params["vy"] * frame
    return x, y


def generate_clip(
    template: ActionTemplate,
    seed: int,
    settings: GenerationSettings = DEFAULT_SETTINGS,
    label: ActionLabel | None = None,
    view: str = "top",
    source_id: str = "clip",
) -> Clip:
    """Generate one clip, fully determined by (template, settings, seed).

    Stream 0 (skeleton) draw order: body center x, body center y, body
    scale, then per frame, per joint in channel order: x jitter (normal),
    y jitter (normal), keypoint score (uniform 0.6..1.0).

    Stream 1 (objects) draw order: target disc radius (uniform 2.5..4.5),
    then motion parameters (approach/drift: start x, start y, drift adds
    velocity x, velocity y; orbit: radius, phase; oscillate: amplitude,
    phase, axis angle), then per frame: center x jitter (normal), center y
    jitter (normal), target score (uniform 0.85..1.0, jitter mode only),
    one distractor-count bernoulli, then per distractor: class, radius
    (uniform 2..4), center x, center y, score (uniform 0.1..0.6). Clips
    without an object class skip the target draws but keep distractors.
    """
    skel = SplitMix64(mix_seed(seed, _STREAM_SKELETON))
    objs = SplitMix64(mix_seed(seed, _STREAM_OBJECTS))
    w, h, n_frames = settings.width, settings.height, settings.frames

    cx = skel.uniform(0.35, 0.65) * w
    cy = skel.uniform(0.40, 0.55) * h
    scale = skel.uniform(0.32, 0.42) * h
    # The point the hands work at; reach pulls the wrists here and object
    # trajectories are defined relative to it.
    anchor = (cx + 0.30 * scale, cy + 0.18 * scale)

    target_params: dict = {}
    if template.object_class is not None:
        target_radius = objs.uniform(2.5, 4.5)
        if template.object_motion in ("approach", "drift"):
            target_params["sx"] = objs.uniform(0.1, 0.9) * w
            target_params["sy"] = objs.uniform(0.1, 0.9) * h
            if template.object_motion == "drift":
                target_params["vx"] = objs.uniform(-1.5, 1.5)
                target_params["vy"] = objs.uniform(-1.5, 1.5)
        elif template.object_motion == "orbit":
            target_params["radius"] = objs.uniform(0.12, 0.20) * min(w, h)
            target_params["phase"] = objs.uniform(0.0, 2.0 * math.pi)
        else:  # oscillate
            target_params["amp"] = objs.uniform(0.10, 0.18) * min(w, h)
            target_params["phase"] = objs.uniform(0.0, 2.0 * math.pi)
            target_params["axis"] = objs.uniform(0.0, 2.0 * math.pi)

    base_count = math.floor(template.distractor_rate)
    frac = template.distractor_rate - base_count

    skeletons: list[SkeletonFrame] = []
    detections: list[DetectionSet] = []
    for f in range(n_frames):
        joints = np.empty((17, 3), dtype=np.float64)
        for j in range(17):
            jx, jy = _joint_position(
                j, f, n_frames, template.skeleton_motion, cx, cy, scale, anchor
            )
            joints[j, 0] = jx + skel.normal(0.0, template.noise_std)
            joints[j, 1] = jy + skel.normal(0.0, template.noise_std)
            joints[j, 2] = skel.uniform(0.6, 1.0)
        skeletons.append(SkeletonFrame(frame_index=f, persons=(joints,)))

        instances: list[ObjectInstance] = []
        if template.object_class is not None:
            ox, oy = _object_center(
                template.object_motion, target_params, f, n_frames, anchor
            )
            ox += objs.normal(0.0, template.noise_std * 0.5)
            oy += objs.normal(0.0, template.noise_std * 0.5)
            score = objs.uniform(0.85, 1.0) if settings.score_mode == "jitter" else 1.0
            instances.append(
                ObjectInstance(
                    class_index=OBJECT_INDEX[template.object_class],
                    score=score,
                    pixels=_disc_pixels(ox, oy, target_radius, w, h),
                )
            )
        count = base_count + (1 if objs.bernoulli(frac) else 0)
        for _ in range(count):
            cls = objs.randint(NUM_OBJECT_CLASSES)
            radius = objs.uniform(2.0, 4.0)
            dx = objs.uniform(radius, w - 1.0 - radius)
            dy = objs.uniform(radius, h - 1.0 - radius)
            dscore = objs.uniform(0.1, 0.6)
            instances.append(
                ObjectInstance(
                    class_index=cls,
                    score=dscore,
                    pixels=_disc_pixels(dx, dy, radius, w, h),
                )
            )
        detections.append(DetectionSet(frame_index=f, instances=tuple(instances)))

    if label is None:
        label = ActionLabel(class_id=0, class_name=template.class_name, verb_id=0)
    return make_clip(skeletons, detections, label, view, source_id)


@dataclass(frozen=True)
class DatasetConfig:
    """A full synthetic dataset: class list plus generation knobs."""

    classes: tuple[str, ...]
    train_clips: int = 100
    test_clips: int = 50
    frames: int = 48
    width: int = 320
    height: int = 240
    noise_std: float = 2.0
    distractor_rate: float = 0.0
    score_mode: str = "gt"
    skeleton_motion: str = "reach"
    seed: int = 7
    view: str = "top"

    def __post_init__(self):
        if not self.classes:
            raise ValidationError("dataset needs at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("duplicate class names in dataset config")
        if self.train_clips < 1 or self.test_clips < 0:
            raise ValidationError("clip counts must be positive (test may be 0)")

    @property
    def settings(self) -> GenerationSettings:
        return GenerationSettings(
            frames=self.frames,
            width=self.width,
            height=self.height,
            score_mode=self.score_mode,
        )

    @property
    def sorted_classes(self) -> tuple[str, ...]:
        return tuple(sorted(self.classes))

    def template_for(self, class_name: str) -> ActionTemplate:
        return template_for_class(
            class_name,
            skeleton_motion=self.skeleton_motion,
            noise_std=self.noise_std,
            distractor_rate=self.distractor_rate,
        )


def dataset_verb_map(classes: tuple[str, ...]) -> VerbMap:
    """Verb map for a synthetic class list, verbs derived by prefix."""
    return VerbMap(rows={name: derive_verb(name, VERBS) for name in classes})


def _slug(name: str) -> str:
    return name.replace(" ", "_")


def clip_seed(base_seed: int, class_index: int, split: str, clip_index: int) -> int:
    """The seed generate_clip receives for one dataset slot."""
    return mix_seed(base_seed, class_index, _SPLIT_CODES[split], clip_index)


def generate_split(config: DatasetConfig, split: str) -> list[Clip]:
    """Generate every clip of one split, grouped by class, in order."""
    if split not in _SPLIT_CODES:
        raise ValidationError(f"unknown split {split!r}")
    verb_map = dataset_verb_map(config.sorted_classes)
    count = config.train_clips if split == "train" else config.test_clips
    clips = []
    for class_index, name in enumerate(config.sorted_classes):
        template = config.template_for(name)
        label = verb_map.label_for(name)
        for i in range(count):
            clips.append(
                generate_clip(
                    template,
                    clip_seed(config.seed, class_index, split, i),
                    settings=config.settings,
                    label=label,
                    view=config.view,
                    source_id=f"{_slug(name)}-{split}-{i:04d}",
                )
            )
    return clips


def generate_dataset(config: DatasetConfig) -> tuple[list[Clip], list[Clip], VerbMap]:
    """Generate (train clips, test clips, verb map) for a config."""
    return (
        generate_split(config, "train"),
        generate_split(config, "test"),
        dataset_verb_map(config.sorted_classes),
    )


def write_dataset(config: DatasetConfig, out_dir, jobs: int = 1):
    """Generate a dataset and write it to disk in the ingestion formats.

    Layout under ``out_dir``: ``skeletons/<id>.txt`` and
    ``detections/<id>.txt`` per clip, a ``manifest.csv`` listing every
    clip with paths relative to ``out_dir``, and the dataset's
    ``verb_map.csv``. Returns the loaded manifest. File contents depend
    only on the config, never on ``jobs`` or write order.
    """
    from concurrent.futures import ThreadPoolExecutor
    from pathlib import Path

    from . import formats

    out = Path(out_dir)
    (out / "skeletons").mkdir(parents=True, exist_ok=True)
    (out / "detections").mkdir(parents=True, exist_ok=True)

    verb_map = dataset_verb_map(config.sorted_classes)
    clips = generate_split(config, "train") + generate_split(config, "test")
    splits = ["train"] * config.train_clips * len(config.classes)
    splits += ["test"] * config.test_clips * len(config.classes)

    entries = []
    for clip, split in zip(clips, splits):
        entries.append(
            formats.ManifestEntry(
                source_id=clip.source_id,
                view=clip.view,
                label_name=clip.label.class_name,
                skeleton_path=f"skeletons/{clip.source_id}.txt",
                detection_path=f"detections/{clip.source_id}.txt",
                split=split,
            )
        )

    def write_one(pair):
        clip, entry = pair
        (out / entry.skeleton_path).write_text(
            formats.serialize_skeleton_frames(s for s, _ in clip.frames),
            encoding="utf-8",
        )
        (out / entry.detection_path).write_text(
            formats.serialize_detections(d for _, d in clip.frames),
            encoding="utf-8",
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(write_one, zip(clips, entries)))
    else:
        for pair in zip(clips, entries):
            write_one(pair)

    (out / "manifest.csv").write_text(formats.serialize_manifest(entries), encoding="utf-8")
    (out / "verb_map.csv").write_text(formats.serialize_verb_map(verb_map), encoding="utf-8")
    return formats.DatasetManifest(entries=tuple(entries), base_dir=out)


def pool_features(encoding: EncodedImage | HeatmapVolume) -> np.ndarray:
    """Flatten an encoding to a fixed-length float32 feature vector.

    Pooling is the mean over the time axis: over columns for a column
    image, over the T axis for a heatmap volume. Row and channel identity
    survive pooling, which is what lets object channels carry class
    information into the linear baselines.
    """
    if isinstance(encoding, EncodedImage):
        return np.asarray(encoding.pixels, dtype=np.float32).mean(axis=1).ravel()
    if isinstance(encoding, HeatmapVolume):
        return encoding.values.mean(axis=1, dtype=np.float32).ravel()
    raise ValidationError(f"cannot pool features from {type(encoding).__name__}")


@dataclass(frozen=True)
class BaselineModel:
    """Nearest-reference classifier over pooled feature vectors.

    For nearest_centroid the references are per-class means; for one_nn
    they are every training exemplar. Prediction picks the reference with
    the smallest Euclidean distance; exact ties go to the lowest class id.
    """

    kind: str
    input_kind: str
    class_ids: np.ndarray
    references: np.ndarray

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValidationError(f"unknown baseline kind {self.kind!r}")
        if self.input_kind not in ENCODERS:
            raise ValidationError(f"unknown input kind {self.input_kind!r}")
        ids = np.asarray(self.class_ids, dtype=np.int64)
        refs = np.asarray(self.references, dtype=np.float32)
        if refs.ndim != 2 or ids.ndim != 1 or refs.shape[0] != ids.shape[0]:
            raise ValidationError("references and class ids must pair up")
        if refs.shape[0] == 0:
            raise ValidationError("model must store at least one reference")
        object.__setattr__(self, "class_ids", ids)
        object.__setattr__(self, "references", refs)

    @property
    def dim(self) -> int:
        return int(self.references.shape[1])

    def predict(self, features: np.ndarray) -> np.ndarray:
        feats = np.asarray(features, dtype=np.float32)
        if feats.ndim != 2 or feats.shape[1] != self.dim:
            raise ValidationError(
                f"features must be (n, {self.dim}), got {feats.shape}"
            )
        out = np.empty(feats.shape[0], dtype=np.int64)
        for i in range(feats.shape[0]):
            delta = self.references - feats[i]
            d2 = np.einsum("ij,ij->i", delta, delta)
            best = np.flatnonzero(d2 == d2.min())
            out[i] = self.class_ids[best].min()
        return out


def train_baseline(
    features: np.ndarray,
    labels,
    kind: str = "nearest_centroid",
    input_kind: str = "heatmap",
    n_classes: int | None = None,
) -> BaselineModel:
    """Fit a baseline on pooled features.

    nearest_centroid stores one mean vector per class; one_nn stores the
    whole training set. When ``n_classes`` is given, every id in
    ``range(n_classes)`` must have at least one training sample.
    """
    feats = np.asarray(features, dtype=np.float32)
    y = np.asarray(labels, dtype=np.int64)
    if feats.ndim != 2 or y.ndim != 1 or feats.shape[0] != y.shape[0]:
        raise ValidationError("features must be (n, d) with one label per row")
    if feats.shape[0] == 0:
        raise ValidationError("cannot train on an empty set")
    if y.min() < 0:
        raise ValidationError("labels must be >= 0")
    present = np.unique(y)
    if n_classes is not None:
        missing = sorted(set(range(n_classes)) - set(present.tolist()))
        if missing:
            raise ValidationError(f"classes without training samples: {missing}")
    if kind == "nearest_centroid":
        refs = np.stack(
            [feats[y == c].mean(axis=0, dtype=np.float64) for c in present]
        ).astype(np.float32)
        return BaselineModel(kind=kind, input_kind=input_kind, class_ids=present, references=refs)
    if kind == "one_nn":
        return BaselineModel(kind=kind, input_kind=input_kind, class_ids=y.copy(), references=feats.copy())
    raise ValidationError(f"unknown baseline kind {kind!r}")


def evaluate(model: BaselineModel, features: np.ndarray, labels) -> dict:
    """Predict and score; returns {"mAcc", "top1", "confusion"}."""
    y = np.asarray(labels, dtype=np.int64)
    preds = model.predict(features)
    k = int(max(y.max(), int(model.class_ids.max()))) + 1
    return {
        "mAcc": mean_class_accuracy(preds, y),
        "top1": top1_accuracy(preds, y),
        "confusion": confusion_matrix(preds, y, k),
    }


_MODEL_MAGIC = b"SKBM"
_KIND_CODES = {name: i for i, name in enumerate(BASELINE_KINDS)}
_INPUT_CODES = {name: i for i, name in enumerate(ENCODERS)}


def write_model(model: BaselineModel, path) -> None:
    """Write a baseline model as a little-endian binary file.

    Layout: magic ``SKBM``, version byte 1, kind byte, input-kind byte,
    u32 reference count, u32 feature dim, then the class ids as signed
    64-bit integers and the references as float32, both little-endian.
    """
    refs = np.ascontiguousarray(model.references, dtype="<f4")
    ids = np.ascontiguousarray(model.class_ids, dtype="<i8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(
            struct.pack(
                "<3BII",
                1,
                _KIND_CODES[model.kind],
                _INPUT_CODES[model.input_kind],
                refs.shape[0],
                refs.shape[1],
            )
        )
        fh.write(ids.tobytes())
        fh.write(refs.tobytes())


def read_model(path) -> BaselineModel:
    """Read a baseline model written by write_model."""
    with open(path, "rb") as fh:
        raw = fh.read()
    header = struct.calcsize("<4s3BII")
    if len(raw) < header or raw[:4] != _MODEL_MAGIC:
        raise FormatError(f"not a baseline model file: {path}")
    _, version, kind_code, input_code, n, dim = struct.unpack("<4s3BII", raw[:header])
    if version != 1:
        raise FormatError(f"unsupported model version {version}")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    inputs = {v: k for k, v in _INPUT_CODES.items()}
    if kind_code not in kinds or input_code not in inputs:
        raise FormatError("unknown model kind or input kind byte")
    ids_bytes = 8 * n
    expected = header + ids_bytes + 4 * n * dim
    if len(raw) != expected:
        raise FormatError(f"model payload is {len(raw)} bytes, expected {expected}")
    ids = np.frombuffer(raw, dtype="<i8", count=n, offset=header).copy()
    refs = (
        np.frombuffer(raw, dtype="<f4", count=n * dim, offset=header + ids_bytes)
        .reshape(n, dim)
        .copy()
    )
    return BaselineModel(
        kind=kinds[kind_code], input_kind=inputs[input_code], class_ids=ids, references=refs
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid: a dataset plus encoder/evaluation settings."""

    dataset: DatasetConfig
    encoders: tuple[str, ...] = ("heatmap",)
    conditions: tuple[str, ...] = CONDITIONS
    object_modes: tuple[str, ...] = ("most_relevant",)
    baseline: str = "nearest_centroid"
    remap_verbs: bool = False
    sigma: float = 0.6
    grid: tuple[int, int] = (64, 64)
    t_target: int = 48
    tau: float = 0.1

    def __post_init__(self):
        for enc in self.encoders:
            if enc not in ENCODERS:
                raise ValidationError(f"unknown encoder {enc!r}")
        for cond in self.conditions:
            if cond not in CONDITIONS:
                raise ValidationError(f"unknown condition {cond!r}")
        for mode in self.object_modes:
            if mode not in ("most_relevant", "all"):
                raise ValidationError(f"unknown object mode {mode!r}")
        if self.baseline not in BASELINE_KINDS:
            raise ValidationError(f"unknown baseline kind {self.baseline!r}")
        if not (self.encoders and self.conditions and self.object_modes):
            raise ValidationError("encoders, conditions, and object_modes must be non-empty")


_CONFIG_DEFAULTS = {
    "train_clips": "100",
    "test_clips": "50",
    "frames": "48",
    "width": "320",
    "height": "240",
    "noise_std": "2.0",
    "distractor_rate": "0.0",
    "score_mode": "gt",
    "skeleton_motion": "reach",
    "seed": "7",
    "view": "top",
    "encoders": "heatmap",
    "conditions": "skeleton-only,objects-only,combined",
    "object_modes": "most_relevant",
    "baseline": "nearest_centroid",
    "remap_verbs": "0",
    "sigma": "0.6",
    "grid": "64x64",
    "t_target": "48",
    "tau": "0.1",
}


def parse_experiment_config(text: str) -> ExperimentConfig:
    """Parse the key=value experiment config format (see module docs)."""
    values = dict(_CONFIG_DEFAULTS)
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise FormatError(f"config line {line_no} is not key=value: {raw.strip()!r}")
        if key != "classes" and key not in _CONFIG_DEFAULTS:
            raise FormatError(f"unknown config key {key!r} on line {line_no}")
        if key in seen:
            raise FormatError(f"duplicate config key {key!r} on line {line_no}")
        seen.add(key)
        values[key] = value
    if "classes" not in seen:
        raise FormatError("config must set classes=")

    def split_list(key: str) -> tuple[str, ...]:
        return tuple(part.strip() for part in values[key].split(",") if part.strip())

    def as_int(key: str) -> int:
        try:
            return int(values[key])
        except ValueError:
            raise FormatError(f"config key {key} must be an integer") from None

    def as_float(key: str) -> float:
        try:
            return float(values[key])
        except ValueError:
            raise FormatError(f"config key {key} must be a number") from None

    grid_text = values["grid"].lower()
    try:
        grid_h, grid_w = (int(part) for part in grid_text.split("x"))
    except ValueError:
        raise FormatError(f"grid must look like 64x64, got {values['grid']!r}") from None
    if values["remap_verbs"] not in ("0", "1"):
        raise FormatError("remap_verbs must be 0 or 1")

    try:
        dataset = DatasetConfig(
            classes=split_list("classes"),
            train_clips=as_int("train_clips"),
            test_clips=as_int("test_clips"),
            frames=as_int("frames"),
            width=as_int("width"),
            height=as_int("height"),
            noise_std=as_float("noise_std"),
            distractor_rate=as_float("distractor_rate"),
            score_mode=values["score_mode"],
            skeleton_motion=values["skeleton_motion"],
            seed=as_int("seed"),
            view=values["view"],
        )
        return ExperimentConfig(
            dataset=dataset,
            encoders=split_list("encoders"),
            conditions=split_list("conditions"),
            object_modes=split_list("object_modes"),
            baseline=values["baseline"],
            remap_verbs=values["remap_verbs"] == "1",
            sigma=as_float("sigma"),
            grid=(grid_h, grid_w),
            t_target=as_int("t_target"),
            tau=as_float("tau"),
        )
    except ValidationError as exc:
        raise FormatError(f"invalid config: {exc}") from None


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_experiment_config(fh.read())


def _band_flags(condition: str) -> tuple[bool, bool]:
    return condition != "objects-only", condition != "skeleton-only"


def _modes_for(encoder: str, condition: str, modes: tuple[str, ...]) -> tuple[str, ...]:
    if condition == "skeleton-only":
        return ("none",)
    if encoder == "image":
        return ("most_relevant",)
    return modes


def encode_pooled(
    clips,
    encoder: str,
    condition: str,
    object_mode: str,
    config: ExperimentConfig,
    normalizer: Normalizer | None = None,
    backend: str | None = None,
) -> np.ndarray:
    """Encode and pool every clip into one (n, d) float32 matrix."""
    with_skeleton, with_objects = _band_flags(condition)
    rows = []
    for clip in clips:
        if encoder == "image":
            if normalizer is None:
                raise ValidationError("image encoding needs a fitted normalizer")
            enc = encode_clip_image(
                clip,
                normalizer,
                with_skeleton=with_skeleton,
                with_objects=with_objects,
                score_threshold=config.tau,
            )
        else:
            enc = encode_clip_heatmaps(
                clip,
                sigma=config.sigma,
                grid=config.grid,
                t_target=config.t_target,
                with_skeleton=with_skeleton,
                with_objects=with_objects,
                object_mode=object_mode if object_mode != "none" else "most_relevant",
                score_threshold=config.tau,
                backend=backend,
            )
        rows.append(pool_features(enc))
    return np.stack(rows)


def run_experiment(config: ExperimentConfig, backend: str | None = None) -> list[dict]:
    """Run the full condition grid; one report row per grid cell.

    Rows appear in encoder, then condition, then object-mode order. Labels
    are class ids, or verb ids when the config sets remap_verbs.
    """
    train, test, _ = generate_dataset(config.dataset)
    if config.remap_verbs:
        y_train = [c.label.verb_id for c in train]
        y_test = [c.label.verb_id for c in test]
    else:
        y_train = [c.label.class_id for c in train]
        y_test = [c.label.class_id for c in test]
    normalizer = fit_normalizer(train) if "image" in config.encoders else None

    rows = []
    for encoder in config.encoders:
        for condition in config.conditions:
            for mode in _modes_for(encoder, condition, config.object_modes):
                feats_train = encode_pooled(
                    train, encoder, condition, mode, config, normalizer, backend
                )
                feats_test = encode_pooled(
                    test, encoder, condition, mode, config, normalizer, backend
                )
                model = train_baseline(
                    feats_train, y_train, kind=config.baseline, input_kind=encoder
                )
                scores = evaluate(model, feats_test, y_test)
                rows.append(
                    {
                        "condition": condition,
                        "encoder": encoder,
                        "object_mode": mode,
                        "mAcc": scores["mAcc"],
                        "top1": scores["top1"],
                    }
                )
    return rows


REPORT_HEADER = "condition,encoder,object_mode,mAcc,top1"


def format_report(rows: list[dict]) -> str:
    """Render experiment rows as the comma-separated report table."""
    lines = [REPORT_HEADER]
    for row in rows:
        lines.append(
            f"{row['condition']},{row['encoder']},{row['object_mode']},"
            f"{row['mAcc']:.6f},{row['top1']:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_report(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(rows))
