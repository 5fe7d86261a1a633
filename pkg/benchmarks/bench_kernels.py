"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N wall time of each backend and
checks the two agree bit for bit.
"""

import argparse
import timeit

import numpy as np

from lois_vqa import _fallback, kernels
from lois_vqa.views import grid_edges


def cases(rng):
    masks = rng.random((64, 64 * 64)) > 0.7
    iou = kernels.iou_matrix(masks)
    scores = np.sort(rng.random(64))[::-1].copy()
    feat = rng.standard_normal((64, 64, 256))
    keep = rng.random((64, 64)) > 0.3
    edges = grid_edges(64, 8)
    inst = rng.random((16, 64, 64)) > 0.8
    return {
        "pairwise_intersections 64x4096": (kernels.pairwise_intersections, (masks,)),
        "iou_matrix 64x4096": (kernels.iou_matrix, (masks,)),
        "matrix_nms_penalties 64": (kernels.matrix_nms_penalties, (iou, scores)),
        "cell_mean_pool 64x64x256 g8": (kernels.cell_mean_pool, (feat, keep, edges, edges)),
        "masked_means 16 masks 64x64x256": (kernels.masked_means, (feat, inst)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    if kernels.BACKEND != "compiled":
        print("compiled extension unavailable; only the fallback can be timed")
    print(f"{'kernel':34s} {'compiled ms':>12s} {'numpy ms':>10s} {'speedup':>8s}  identical")
    for name, (fn, fargs) in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(*fargs, impl=_fallback), number=1, repeat=args.repeat)) * 1e3
        if kernels.BACKEND == "compiled":
            cc = min(timeit.repeat(lambda: fn(*fargs, impl=kernels._impl), number=1, repeat=args.repeat)) * 1e3
            same = _same(fn(*fargs, impl=kernels._impl), fn(*fargs, impl=_fallback))
            print(f"{name:34s} {cc:12.3f} {py:10.3f} {py / cc:7.1f}x  {'yes' if same else 'NO'}")
        else:
            print(f"{name:34s} {'-':>12s} {py:10.3f} {'-':>8s}  -")


if __name__ == "__main__":
    main()
