"""Compare the compiled and NumPy kernel backends on the hot paths.

Runs each backend on identical inputs, checks that the outputs are
bit-identical, and reports median wall time per call:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from skelfuse import _kernels as kernels


def _volume_workload(rng: np.random.Generator, n_points: int, grid: int):
    chans = rng.integers(0, 24, size=n_points).astype(np.intc)
    times = rng.integers(0, 12, size=n_points).astype(np.intc)
    points = np.column_stack(
        [
            rng.uniform(-2.0, grid + 2.0, size=n_points),
            rng.uniform(-2.0, grid + 2.0, size=n_points),
            rng.uniform(0.05, 1.0, size=n_points),
        ]
    )

    def run(backend):
        out = np.zeros((24, 12, grid, grid), dtype=np.float32)
        backend.render_volume(out, chans, times, points, 0.6)
        return out

    return run


def _resize_workload(rng: np.random.Generator, src_shape, out_h: int, out_w: int):
    src = rng.integers(0, 256, size=src_shape).astype(np.uint8)

    def run(backend):
        return backend.resize_bilinear(src, out_h, out_w)

    return run


def _time_call(run, backend, repeats: int) -> tuple[float, np.ndarray]:
    result = run(backend)  # warm-up, also the output used for comparison
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        run(backend)
        samples.append(time.perf_counter() - start)
    return statistics.median(samples), result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20,
                        help="timed calls per backend (default 20)")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(7)
    workloads = [
        ("render_volume 2k pts, 64x64", _volume_workload(rng, 2000, 64)),
        ("render_volume 10k pts, 96x96", _volume_workload(rng, 10000, 96)),
        ("resize 24x300x3 -> 224x224", _resize_workload(rng, (24, 300, 3), 224, 224)),
        ("resize 128x128x3 -> 512x512", _resize_workload(rng, (128, 128, 3), 512, 512)),
    ]
    backends = kernels.available()
    print(f"backends: {', '.join(sorted(backends))} (default: {kernels.BACKEND})")
    print(f"{'workload':<30} {'backend':<10} {'median':>10}  {'vs numpy':>8}")

    mismatched = False
    for label, run in workloads:
        timings: dict[str, float] = {}
        outputs: dict[str, np.ndarray] = {}
        for name in sorted(backends):
            timings[name], outputs[name] = _time_call(run, backends[name], args.repeats)
        baseline = timings.get("numpy", next(iter(timings.values())))
        for name in sorted(backends):
            speedup = baseline / timings[name] if timings[name] > 0 else float("inf")
            print(f"{label:<30} {name:<10} {timings[name] * 1e3:>8.2f}ms  {speedup:>7.1f}x")
        reference = next(iter(outputs.values()))
        if not all(np.array_equal(reference, out) for out in outputs.values()):
            print(f"{label}: backend outputs DIFFER", file=sys.stderr)
            mismatched = True
    if mismatched:
        return 1
    print("all backend outputs bit-identical")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
