"""Parsers and serializers for every on-disk format used by the pipeline.

All files are UTF-8 text with one record per line ('\\n' terminated,
blank lines ignored). Floats are written with repr(), which round-trips
float64 exactly, and read with float().

Skeleton file, one line per frame::

    <frame_index>|<person>{;<person>}

where <person> is 17 comma-separated ``x:y:s`` triples in the fixed joint
order. A frame with no detected persons is ``<frame_index>|``.

Detection file, one line per frame::

    <frame_index>|<det>{;<det>}
    <det> = class=<name>,score=<s>,rle=<x0>:<y0>:<nrows>:<runs>

``<runs>`` holds exactly one ``start-length`` pair per mask row (top to
bottom), separated by '/'. Row ``y0 + i`` covers pixels ``x0 + start`` ..
``x0 + start + length - 1``; a ``0-0`` pair marks an empty row. Masks whose
rows are not single contiguous segments cannot be expressed; the canonical
serializer rejects them.

Manifest and class map are header-less CSV tables::

    source_id,view,label_name,skeleton_path,detection_path,split
    class_name,verb_name

Paths in a manifest are resolved relative to the manifest's directory.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import (
    Clip,
    DetectionSet,
    FormatError,
    Normalizer,
    NUM_JOINTS,
    OBJECT_INDEX,
    OBJECT_NAMES,
    ObjectInstance,
    ParseError,
    SkeletonFrame,
    SkelfuseError,
    SPLITS,
    ValidationError,
    VerbMap,
    VIEWS,
    make_clip,
)


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# Run-length masks


def decode_rle(x0: int, y0: int, runs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Expand one-run-per-row RLE to an (N, 2) array of (x, y) pixels."""
    pixels: list[tuple[int, int]] = []
    for i, (start, length) in enumerate(runs):
        if start < 0 or length < 0:
            raise FormatError(f"negative run in RLE: {start}-{length}")
        y = y0 + i
        for x in range(x0 + start, x0 + start + length):
            pixels.append((x, y))
    if not pixels:
        raise FormatError("RLE decodes to an empty mask")
    return np.array(pixels, dtype=np.int64)


def encode_rle(pixels: np.ndarray) -> tuple[int, int, list[tuple[int, int]]]:
    """Canonical RLE of a pixel set: tight offset, one run per row.

    Raises FormatError if some row is not a single contiguous segment.
    """
    pixels = np.asarray(pixels, dtype=np.int64)
    x0 = int(pixels[:, 0].min())
    y0 = int(pixels[:, 1].min())
    y1 = int(pixels[:, 1].max())
    runs: list[tuple[int, int]] = []
    for y in range(y0, y1 + 1):
        xs = np.sort(pixels[pixels[:, 1] == y, 0])
        if len(xs) == 0:
            runs.append((0, 0))
            continue
        if int(xs[-1]) - int(xs[0]) + 1 != len(xs):
            raise FormatError(f"mask row {y} is not contiguous, cannot RLE-encode")
        runs.append((int(xs[0]) - x0, len(xs)))
    return x0, y0, runs


# ---------------------------------------------------------------------------
# Skeleton files


def serialize_skeleton_frames(frames: Iterable[SkeletonFrame]) -> str:
    lines = []
    for frame in frames:
        persons = ";".join(
            ",".join(f"{_fmt(x)}:{_fmt(y)}:{_fmt(s)}" for x, y, s in person)
            for person in frame.persons
        )
        lines.append(f"{frame.frame_index}|{persons}")
    return "".join(line + "\n" for line in lines)


def _parse_person(text: str, line_no: int) -> np.ndarray:
    triples = text.split(",")
    if len(triples) != NUM_JOINTS:
        raise ParseError(
            f"person has {len(triples)} keypoints, expected {NUM_JOINTS}", line_no
        )
    person = np.empty((NUM_JOINTS, 3), dtype=np.float64)
    for j, triple in enumerate(triples):
        parts = triple.split(":")
        if len(parts) != 3:
            raise ParseError(f"malformed keypoint triple {triple!r}", line_no)
        try:
            person[j] = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"malformed number in keypoint {triple!r}", line_no) from None
    return person


def parse_skeleton_stream(stream: Iterable[str]) -> list[SkeletonFrame]:
    """Parse a skeleton file into frames sorted by frame index."""
    frames: list[SkeletonFrame] = []
    prev = -1
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        head, sep, body = line.partition("|")
        if not sep:
            raise ParseError("missing '|' separator", line_no)
        try:
            frame_index = int(head)
        except ValueError:
            raise ParseError(f"malformed frame index {head!r}", line_no) from None
        if frame_index <= prev:
            raise FormatError(
                f"line {line_no}: frame index {frame_index} not increasing (after {prev})"
            )
        prev = frame_index
        persons = tuple(
            _parse_person(p, line_no) for p in body.split(";") if p
        )
        try:
            frames.append(SkeletonFrame(frame_index=frame_index, persons=persons))
        except ValidationError as exc:
            raise ParseError(str(exc), line_no) from None
    return frames


def parse_skeleton_text(text: str) -> list[SkeletonFrame]:
    return parse_skeleton_stream(io.StringIO(text))


# ---------------------------------------------------------------------------
# Detection files


def serialize_detections(detections: Iterable[DetectionSet]) -> str:
    lines = []
    for det in detections:
        parts = []
        for inst in det.instances:
            x0, y0, runs = encode_rle(inst.pixels)
            run_text = "/".join(f"{start}-{length}" for start, length in runs)
            parts.append(
                f"class={OBJECT_NAMES[inst.class_index]},score={_fmt(inst.score)},"
                f"rle={x0}:{y0}:{len(runs)}:{run_text}"
            )
        lines.append(f"{det.frame_index}|{';'.join(parts)}")
    return "".join(line + "\n" for line in lines)


def _parse_detection(text: str, line_no: int) -> ObjectInstance:
    fields = text.split(",")
    if len(fields) != 3:
        raise ParseError(f"detection needs 3 fields, got {len(fields)}: {text!r}", line_no)
    keyed = {}
    for f in fields:
        key, sep, value = f.partition("=")
        if not sep:
            raise ParseError(f"malformed detection field {f!r}", line_no)
        keyed[key] = value
    if set(keyed) != {"class", "score", "rle"}:
        raise ParseError(f"detection fields must be class,score,rle, got {sorted(keyed)}", line_no)
    name = keyed["class"]
    if name not in OBJECT_INDEX:
        raise ParseError(f"unknown object class {name!r}", line_no)
    try:
        score = float(keyed["score"])
    except ValueError:
        raise ParseError(f"malformed score {keyed['score']!r}", line_no) from None
    rle_parts = keyed["rle"].split(":")
    if len(rle_parts) != 4:
        raise ParseError(f"malformed RLE {keyed['rle']!r}", line_no)
    try:
        x0, y0, nrows = int(rle_parts[0]), int(rle_parts[1]), int(rle_parts[2])
        runs = []
        for pair in rle_parts[3].split("/"):
            start_s, sep, length_s = pair.partition("-")
            if not sep:
                raise ValueError(pair)
            runs.append((int(start_s), int(length_s)))
    except ValueError:
        raise ParseError(f"malformed RLE {keyed['rle']!r}", line_no) from None
    if len(runs) != nrows:
        raise ParseError(f"RLE declares {nrows} rows but lists {len(runs)} runs", line_no)
    try:
        pixels = decode_rle(x0, y0, runs)
        return ObjectInstance(class_index=OBJECT_INDEX[name], score=score, pixels=pixels)
    except (FormatError, ValidationError) as exc:
        raise ParseError(str(exc), line_no) from None


def parse_detection_stream(stream: Iterable[str]) -> dict[int, DetectionSet]:
    """Parse a detection file into a frame_index -> DetectionSet map."""
    result: dict[int, DetectionSet] = {}
    prev = -1
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        head, sep, body = line.partition("|")
        if not sep:
            raise ParseError("missing '|' separator", line_no)
        try:
            frame_index = int(head)
        except ValueError:
            raise ParseError(f"malformed frame index {head!r}", line_no) from None
        if frame_index <= prev:
            raise FormatError(
                f"line {line_no}: frame index {frame_index} not increasing (after {prev})"
            )
        prev = frame_index
        instances = tuple(
            _parse_detection(d, line_no) for d in body.split(";") if d
        )
        result[frame_index] = DetectionSet(frame_index=frame_index, instances=instances)
    return result


def parse_detection_text(text: str) -> dict[int, DetectionSet]:
    return parse_detection_stream(io.StringIO(text))


# ---------------------------------------------------------------------------
# Manifest and class map


@dataclass(frozen=True)
class ManifestEntry:
    source_id: str
    view: str
    label_name: str
    skeleton_path: str
    detection_path: str
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    base_dir: Path

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.view not in VIEWS:
                raise ValidationError(f"unknown view {e.view!r} for {e.source_id}")
            if e.split not in SPLITS:
                raise ValidationError(f"unknown split {e.split!r} for {e.source_id}")
            key = (e.source_id, e.view, e.split)
            if key in seen:
                raise ValidationError(f"duplicate manifest entry {key}")
            seen.add(key)

    def select(self, split: str | None = None) -> list[ManifestEntry]:
        return [e for e in self.entries if split is None or e.split == split]

    def resolve(self, path: str) -> Path:
        return self.base_dir / path


def load_manifest(path: str | Path, check_paths: bool = True) -> DatasetManifest:
    path = Path(path)
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 6:
                raise ParseError(f"manifest row needs 6 columns, got {len(row)}", row_no)
            entries.append(ManifestEntry(*[c.strip() for c in row]))
    manifest = DatasetManifest(entries=tuple(entries), base_dir=path.parent)
    if check_paths:
        for e in manifest.entries:
            for p in (e.skeleton_path, e.detection_path):
                if not manifest.resolve(p).exists():
                    raise FormatError(f"manifest references missing file: {p}")
    return manifest


def serialize_manifest(entries: Iterable[ManifestEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for e in entries:
        writer.writerow(
            [e.source_id, e.view, e.label_name, e.skeleton_path, e.detection_path, e.split]
        )
    return buf.getvalue()


def load_verb_map(path: str | Path) -> VerbMap:
    rows: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"class map row needs 2 columns, got {len(row)}", row_no)
            name, verb = row[0].strip(), row[1].strip()
            if name in rows:
                raise ParseError(f"duplicate class name {name!r}", row_no)
            rows[name] = verb
    return VerbMap(rows=rows)


def serialize_verb_map(verb_map: VerbMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for name in verb_map.class_names:
        writer.writerow([name, verb_map.rows[name]])
    return buf.getvalue()


def builtin_verb_map() -> VerbMap:
    """The 33-class furniture-assembly map shipped with the package."""
    ref = resources.files("skelfuse").joinpath("data/verb_map_33.csv")
    rows: dict[str, str] = {}
    with ref.open(encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row:
                rows[row[0].strip()] = row[1].strip()
    return VerbMap(rows=rows)


# ---------------------------------------------------------------------------
# Clip loading


def load_clip(
    entry: ManifestEntry, verb_map: VerbMap, base_dir: str | Path = "."
) -> Clip:
    """Load and validate one clip from its manifest entry.

    Every skeleton frame must have a detection record (an empty one is
    fine); any frame-index mismatch between the two files is an error.
    """
    base = Path(base_dir)
    with open(base / entry.skeleton_path, encoding="utf-8") as fh:
        skeletons = parse_skeleton_stream(fh)
    with open(base / entry.detection_path, encoding="utf-8") as fh:
        detections = parse_detection_stream(fh)
    if not skeletons:
        raise FormatError(f"{entry.skeleton_path}: no frames")
    skeleton_indices = [s.frame_index for s in skeletons]
    missing = [i for i in skeleton_indices if i not in detections]
    if missing:
        raise FormatError(
            f"{entry.detection_path}: missing detection record for frame {missing[0]}"
        )
    extra = sorted(set(detections) - set(skeleton_indices))
    if extra:
        raise FormatError(
            f"{entry.detection_path}: detection frame {extra[0]} has no skeleton frame"
        )
    label = verb_map.label_for(entry.label_name)
    return make_clip(
        skeletons=skeletons,
        detections=[detections[i] for i in skeleton_indices],
        label=label,
        view=entry.view,
        source_id=entry.source_id,
    )


def load_clips(
    manifest: DatasetManifest, verb_map: VerbMap, split: str | None = None
) -> list[Clip]:
    return [
        load_clip(entry, verb_map, manifest.base_dir)
        for entry in manifest.select(split)
    ]


# ---------------------------------------------------------------------------
# Normalizer files


def write_normalizer(normalizer: Normalizer, path: str | Path) -> None:
    text = f"c_min={normalizer.c_min!r}\nc_max={normalizer.c_max!r}\n"
    Path(path).write_text(text, encoding="utf-8")


def read_normalizer(path: str | Path) -> Normalizer:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep or key not in ("c_min", "c_max"):
            raise ParseError(f"malformed normalizer line {line!r}", line_no)
        try:
            values[key] = float(value)
        except ValueError:
            raise ParseError(f"malformed number {value!r}", line_no) from None
    if set(values) != {"c_min", "c_max"}:
        raise FormatError("normalizer file must define c_min and c_max")
    return Normalizer(c_min=values["c_min"], c_max=values["c_max"])
