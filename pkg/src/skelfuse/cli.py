"""Command-line interface for the encoding and evaluation pipeline.

One executable, nine subcommands:

* ``fit-normalizer``  fit the shared coordinate range on a split
* ``encode-image``    write column-image PNGs plus sidecars for a manifest
* ``encode-heatmap``  write heatmap volume files plus channel sidecars
* ``select-objects``  dump per-frame most-relevant object centroids
* ``remap-verbs``     dump verb labels for every manifest entry
* ``synth``           generate a synthetic dataset tree from a config
* ``train``           fit a baseline classifier on encoded clips
* ``evaluate``        score a trained baseline on a split
* ``experiment``      run the condition grid and emit the report table

Exit codes: 0 success, 1 usage error (bad flags, unknown subcommand),
2 data error (unreadable or malformed inputs, contract violations).
Diagnostics go to stderr; data goes to files or stdout. Outputs depend
only on inputs and flags, never on time or environment, so rerunning any
subcommand with the same inputs reproduces identical bytes.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels, column_image, formats, heatmaps, metrics, synth
from .model import SkelfuseError, ValidationError, VerbMap
from .objects import filter_by_score, select_most_relevant


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _size_pair(text: str) -> tuple[int, int]:
    try:
        h, w = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return h, w


def _add_manifest_flags(p: argparse.ArgumentParser, default_split: str | None):
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument(
        "--split",
        default=default_split,
        help=f"restrict to one split (default: {default_split or 'all'})",
    )
    p.add_argument(
        "--verb-map",
        default=None,
        help="class-to-verb CSV (default: the built-in 33-class map)",
    )


def _add_band_flags(p: argparse.ArgumentParser, object_choices: tuple[str, ...]):
    p.add_argument(
        "--objects",
        choices=object_choices,
        default="most-relevant",
        help="object band mode (default: most-relevant)",
    )
    p.add_argument(
        "--no-skeleton",
        action="store_true",
        help="drop the skeleton band (keep only object rows/channels)",
    )
    p.add_argument(
        "--tau",
        type=float,
        default=heatmaps.DEFAULT_SCORE_THRESHOLD,
        help="detection score threshold, keep score > tau (default: 0.1)",
    )


def _add_heatmap_flags(p: argparse.ArgumentParser):
    p.add_argument("--sigma", type=float, default=heatmaps.DEFAULT_SIGMA,
                   help="Gaussian stddev in grid pixels (default: 0.6)")
    p.add_argument("--grid", type=_size_pair, default=heatmaps.DEFAULT_GRID,
                   help="grid size as HxW (default: 64x64)")
    p.add_argument("--t-target", type=int, default=heatmaps.DEFAULT_T_TARGET,
                   help="number of time slots (default: 48)")


def _add_backend_flag(p: argparse.ArgumentParser):
    p.add_argument(
        "--backend",
        choices=tuple(sorted(_kernels.available())),
        default=None,
        help="numeric kernel backend (default: compiled when built, else numpy)",
    )


def _add_jobs_flag(p: argparse.ArgumentParser):
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel clip workers (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skelfuse", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit-normalizer", help="fit the coordinate range on a split")
    _add_manifest_flags(p, "train")
    p.add_argument("--out", required=True, help="normalizer output file")
    p.set_defaults(func=_cmd_fit_normalizer)

    p = sub.add_parser("encode-image", help="encode clips as column-image PNGs")
    _add_manifest_flags(p, None)
    p.add_argument("--normalizer", required=True, help="fitted normalizer file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resize", type=_size_pair, default=None,
                   help="bilinear-resize output to HxW")
    _add_band_flags(p, ("most-relevant", "none"))
    _add_backend_flag(p)
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_encode_image)

    p = sub.add_parser("encode-heatmap", help="encode clips as heatmap volumes")
    _add_manifest_flags(p, None)
    p.add_argument("--out", required=True, help="output directory")
    _add_heatmap_flags(p)
    _add_band_flags(p, ("most-relevant", "all", "none"))
    _add_backend_flag(p)
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_encode_heatmap)

    p = sub.add_parser("select-objects", help="dump most-relevant object centroids")
    p.add_argument("--skeleton", required=True, help="skeleton file")
    p.add_argument("--detections", required=True, help="detection file")
    p.add_argument("--tau", type=float, default=heatmaps.DEFAULT_SCORE_THRESHOLD,
                   help="detection score threshold (default: 0.1)")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=_cmd_select_objects)

    p = sub.add_parser("remap-verbs", help="dump verb labels for a manifest")
    _add_manifest_flags(p, None)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=_cmd_remap_verbs)

    p = sub.add_parser("synth", help="generate a synthetic dataset tree")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's base seed")
    p.add_argument("--out", required=True, help="output directory")
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a baseline on encoded clips")
    _add_manifest_flags(p, "train")
    p.add_argument("--encoder", choices=synth.ENCODERS, required=True)
    p.add_argument("--kind", choices=("nearest-centroid", "one-nn"),
                   default="nearest-centroid", help="baseline kind")
    p.add_argument("--normalizer", default=None,
                   help="normalizer file (required for the image encoder)")
    p.add_argument("--verb-level", action="store_true",
                   help="train on verb ids instead of class ids")
    p.add_argument("--out", required=True, help="model output file")
    _add_heatmap_flags(p)
    _add_band_flags(p, ("most-relevant", "all", "none"))
    _add_backend_flag(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a trained baseline on a split")
    _add_manifest_flags(p, "test")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--normalizer", default=None,
                   help="normalizer file (required for image models)")
    p.add_argument("--verb-level", action="store_true",
                   help="evaluate against verb ids instead of class ids")
    p.add_argument("--out", default=None, help="machine-readable metrics file")
    p.add_argument("--confusion-out", default=None, help="confusion matrix CSV")
    _add_heatmap_flags(p)
    _add_band_flags(p, ("most-relevant", "all", "none"))
    _add_backend_flag(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run the condition grid experiment")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    _add_backend_flag(p)
    p.set_defaults(func=_cmd_experiment)

    return parser


def _verb_map_from(args) -> VerbMap:
    if args.verb_map is not None:
        return formats.load_verb_map(args.verb_map)
    return formats.builtin_verb_map()


def _clips_from(args):
    manifest = formats.load_manifest(args.manifest)
    verb_map = _verb_map_from(args)
    entries = manifest.select(args.split)
    if not entries:
        raise ValidationError(f"manifest has no entries for split {args.split!r}")
    clips = [formats.load_clip(e, verb_map, manifest.base_dir) for e in entries]
    return entries, clips


def _band_args(args) -> dict:
    return {
        "with_skeleton": not args.no_skeleton,
        "with_objects": args.objects != "none",
        "score_threshold": args.tau,
    }


def _object_mode(args) -> str:
    return "most_relevant" if args.objects == "none" else args.objects.replace("-", "_")


def _stem(entry) -> str:
    return f"{entry.source_id}_{entry.view}_{entry.split}"


def _map_jobs(jobs: int, fn, items) -> None:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(fn, items))
    else:
        for item in items:
            fn(item)


def _write_lines(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_fit_normalizer(args) -> int:
    _, clips = _clips_from(args)
    normalizer = column_image.fit_normalizer(clips)
    formats.write_normalizer(normalizer, args.out)
    print(f"fitted range [{normalizer.c_min!r}, {normalizer.c_max!r}]", file=sys.stderr)
    return 0


def _cmd_encode_image(args) -> int:
    entries, clips = _clips_from(args)
    normalizer = formats.read_normalizer(args.normalizer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    band = _band_args(args)

    def encode_one(pair):
        entry, clip = pair
        image = column_image.encode_clip_image(clip, normalizer, **band)
        if args.resize is not None:
            image = column_image.resize_bilinear(
                image, args.resize[0], args.resize[1], backend=args.backend
            )
        stem = _stem(entry)
        column_image.write_image_png(image, out / f"{stem}.png")
        column_image.write_image_sidecar(
            out / f"{stem}.txt", normalizer, image.row_labels or ()
        )

    _map_jobs(args.jobs, encode_one, list(zip(entries, clips)))
    print(f"encoded {len(clips)} clips to {out}", file=sys.stderr)
    return 0


def _cmd_encode_heatmap(args) -> int:
    entries, clips = _clips_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    band = _band_args(args)
    mode = _object_mode(args)

    def encode_one(pair):
        entry, clip = pair
        volume = heatmaps.encode_clip_heatmaps(
            clip,
            sigma=args.sigma,
            grid=args.grid,
            t_target=args.t_target,
            object_mode=mode,
            backend=args.backend,
            **band,
        )
        stem = _stem(entry)
        heatmaps.write_heatmap_volume(volume, out / f"{stem}.hmv")
        heatmaps.write_heatmap_sidecar(out / f"{stem}.channels.txt", volume.channel_labels)

    _map_jobs(args.jobs, encode_one, list(zip(entries, clips)))
    print(f"encoded {len(clips)} clips to {out}", file=sys.stderr)
    return 0


def _cmd_select_objects(args) -> int:
    skeleton_frames = {
        f.frame_index: f
        for f in formats.parse_skeleton_text(
            Path(args.skeleton).read_text(encoding="utf-8")
        )
    }
    detections = formats.parse_detection_text(
        Path(args.detections).read_text(encoding="utf-8")
    )
    lines = ["frame,class,present,x,y,score"]
    for frame_index in sorted(detections):
        frame = skeleton_frames.get(frame_index)
        if frame is None:
            raise ValidationError(
                f"detection frame {frame_index} has no skeleton frame"
            )
        kept = filter_by_score(detections[frame_index], args.tau)
        for point in select_most_relevant(kept, frame):
            lines.append(
                f"{frame_index},{point.class_name},{int(point.present)},"
                f"{point.x!r},{point.y!r},{point.score!r}"
            )
    _write_lines(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_remap_verbs(args) -> int:
    manifest = formats.load_manifest(args.manifest, check_paths=False)
    verb_map = _verb_map_from(args)
    entries = manifest.select(args.split)
    lines = ["source_id,view,split,class,verb,verb_id"]
    for e in entries:
        verb = verb_map.verb_name_of(e.label_name)
        lines.append(
            f"{e.source_id},{e.view},{e.split},{e.label_name},{verb},"
            f"{verb_map.verb_id_of(e.label_name)}"
        )
    _write_lines(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_synth(args) -> int:
    config = synth.load_experiment_config(args.config)
    dataset = config.dataset
    if args.seed is not None:
        dataset = replace(dataset, seed=args.seed)
    manifest = synth.write_dataset(dataset, args.out, jobs=args.jobs)
    print(f"wrote {len(manifest.entries)} clips to {args.out}", file=sys.stderr)
    return 0


def _features_for(args, clips, input_kind: str) -> np.ndarray:
    band = _band_args(args)
    if input_kind == "image":
        if args.normalizer is None:
            raise ValidationError("the image encoder needs --normalizer")
        normalizer = formats.read_normalizer(args.normalizer)
        encoded = (
            column_image.encode_clip_image(clip, normalizer, **band) for clip in clips
        )
    else:
        mode = _object_mode(args)
        encoded = (
            heatmaps.encode_clip_heatmaps(
                clip,
                sigma=args.sigma,
                grid=args.grid,
                t_target=args.t_target,
                object_mode=mode,
                backend=args.backend,
                **band,
            )
            for clip in clips
        )
    return np.stack([synth.pool_features(enc) for enc in encoded])


def _labels_for(args, clips) -> list[int]:
    if args.verb_level:
        return [c.label.verb_id for c in clips]
    return [c.label.class_id for c in clips]


def _cmd_train(args) -> int:
    _, clips = _clips_from(args)
    features = _features_for(args, clips, args.encoder)
    labels = _labels_for(args, clips)
    model = synth.train_baseline(
        features, labels, kind=args.kind.replace("-", "_"), input_kind=args.encoder
    )
    synth.write_model(model, args.out)
    print(
        f"trained {model.kind} on {len(clips)} clips "
        f"({model.references.shape[0]} references, dim {model.dim})",
        file=sys.stderr,
    )
    return 0


def _cmd_evaluate(args) -> int:
    model = synth.read_model(args.model)
    _, clips = _clips_from(args)
    features = _features_for(args, clips, model.input_kind)
    labels = _labels_for(args, clips)
    scores = synth.evaluate(model, features, labels)
    print(f"mAcc {100.0 * scores['mAcc']:.1f}%")
    print(f"top1 {100.0 * scores['top1']:.1f}%")
    if args.out is not None:
        metrics.write_metrics({"mAcc": scores["mAcc"], "top1": scores["top1"]}, args.out)
    if args.confusion_out is not None:
        metrics.write_confusion(scores["confusion"], args.confusion_out)
    return 0


def _cmd_experiment(args) -> int:
    config = synth.load_experiment_config(args.config)
    rows = synth.run_experiment(config, backend=args.backend)
    _write_lines(args.out, synth.format_report(rows))
    if args.out is not None:
        print(f"wrote {len(rows)} report rows to {args.out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SkelfuseError as exc:
        print(f"skelfuse: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"skelfuse: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
