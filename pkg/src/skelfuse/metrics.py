"""Verb-level label remapping and classification metrics.

Two accuracy summaries are used throughout: top-1 accuracy (the fraction
of clips whose prediction equals the label, every clip weighted equally)
and mean class accuracy (per-class recall averaged over the classes that
actually occur in the labels, which compensates class imbalance).

The confusion matrix convention is rows = true label, columns =
prediction, so row sums give per-class support, the diagonal sum over the
total gives top-1 accuracy, and the mean of the row-normalized diagonal
over non-empty rows gives mean class accuracy. Those identities are used
as cross-checks in the test suite.

Remapping collapses object-specific action classes ("attach side panel")
to their verbs ("attach"), shrinking the label space for verb-level
evaluation.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .model import ActionLabel, Clip, ValidationError, VerbMap


def remap_clip_to_verbs(clip: Clip, verb_map: VerbMap) -> Clip:
    """Replace a clip's action label with its verb label.

    The returned clip is identical except that the label now lives in verb
    space: class_id and verb_id both become the verb's id and class_name
    becomes the verb. Raises UnknownClassError for names not in the map.
    """
    verb = verb_map.verb_name_of(clip.label.class_name)
    verb_id = verb_map.verb_id_of(clip.label.class_name)
    label = ActionLabel(class_id=verb_id, class_name=verb, verb_id=verb_id)
    return Clip(frames=clip.frames, label=label, view=clip.view, source_id=clip.source_id)


def _paired(preds: Sequence[int], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if p.ndim != 1 or y.ndim != 1:
        raise ValidationError("predictions and labels must be flat sequences")
    if p.shape[0] != y.shape[0]:
        raise ValidationError(f"{p.shape[0]} predictions for {y.shape[0]} labels")
    if p.shape[0] == 0:
        raise ValidationError("need at least one prediction")
    return p, y


def top1_accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    """Fraction of exact prediction/label matches."""
    p, y = _paired(preds, labels)
    return float(np.count_nonzero(p == y)) / p.shape[0]


def mean_class_accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    """Mean of per-class recall over the classes present in the labels.

    Classes that never occur as a label contribute nothing (their recall
    is undefined); under perfectly balanced labels this equals top-1
    accuracy.
    """
    p, y = _paired(preds, labels)
    recalls = []
    for cls in np.unique(y):
        mask = y == cls
        recalls.append(float(np.count_nonzero(p[mask] == cls)) / int(mask.sum()))
    return float(np.mean(recalls))


def confusion_matrix(preds: Sequence[int], labels: Sequence[int], k: int) -> np.ndarray:
    """k x k count matrix with cell (i, j) = #(label == i and pred == j)."""
    p, y = _paired(preds, labels)
    if k < 1:
        raise ValidationError(f"need at least one class, got k={k}")
    if p.min() < 0 or y.min() < 0 or p.max() >= k or y.max() >= k:
        raise ValidationError(f"class ids must lie in [0, {k})")
    matrix = np.zeros((k, k), dtype=np.int64)
    np.add.at(matrix, (y, p), 1)
    return matrix


def format_metrics(metrics: dict) -> str:
    """Render scalar metrics as machine-readable ``metric,value`` lines.

    Values keep full precision via repr; the confusion matrix is not a
    scalar and is serialized separately by write_confusion.
    """
    lines = []
    for name in sorted(metrics):
        value = metrics[name]
        if isinstance(value, float):
            lines.append(f"{name},{value!r}")
        elif isinstance(value, int):
            lines.append(f"{name},{value}")
    return "\n".join(lines) + "\n"


def write_metrics(metrics: dict, path) -> None:
    """Write ``metric,value`` lines to a file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_metrics(metrics))


def read_metrics(path) -> dict:
    """Read ``metric,value`` lines back into a dict of floats."""
    out: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, _, value = line.partition(",")
            out[name] = float(value)
    return out


def write_confusion(matrix: np.ndarray, path) -> None:
    """Write a confusion matrix as plain comma-separated integer rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(matrix):
            fh.write(",".join(str(int(v)) for v in row) + "\n")
