"""Matrix non-maximum suppression over binary instance masks.

Each mask b is decayed in one parallel pass by

    penalty_b = min_{s_a > s_b} (1 - IoU(a, b)) / phi_a
    phi_a     = min_{s_k > s_a} (1 - IoU(k, a))

with empty minima equal to 1 and penalties clamped to at most 1.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .masks import MaskSet, ShapeError

POST_THRESHOLD = 0.05

# instance-count bands and IoU bucket edges of the overlap statistic
COUNT_BANDS = (("5-10", 5, 10), ("10-20", 11, 20), (">20", 21, None))
IOU_EDGES = (0.0, 0.2, 0.6, 1.0)


@dataclass
class SuppressionResult:
    updated_scores: np.ndarray
    kept_indices: np.ndarray
    penalties: np.ndarray
    kept: MaskSet = field(repr=False)  # survivors in kept order, carrying updated scores

    @property
    def shape(self):
        return self.kept.shape

    @property
    def kept_masks(self):
        return self.kept.masks


def mask_iou(a, b):
    """IoU of two binary masks; 0 when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def _flat(mask_set):
    return mask_set.masks.reshape(len(mask_set), -1)


def decay_floor(mask_set, a):
    """Smallest ``1 - IoU`` that any strictly higher-scored mask imposes on ``a``."""
    if not 0 <= a < len(mask_set):
        raise IndexError(a)
    iou = kernels.iou_matrix(_flat(mask_set))
    phi, _ = kernels.matrix_nms_penalties(iou, mask_set.scores)
    return float(phi[a])


def penalties(mask_set):
    if len(mask_set) == 0:
        return np.zeros(0)
    iou = kernels.iou_matrix(_flat(mask_set))
    _, pen = kernels.matrix_nms_penalties(iou, mask_set.scores)
    return pen


def _finish(mask_set, updated, pen, post_threshold):
    # stable: equal updated scores keep input order
    order = np.lexsort((np.arange(len(updated)), -updated))
    kept = np.array([i for i in order if updated[i] >= post_threshold], dtype=np.int64)
    survivors = mask_set.subset(kept)
    survivors.scores = updated[kept].copy()
    return SuppressionResult(updated, kept, pen, survivors)


def suppress(mask_set, post_threshold=POST_THRESHOLD):
    """Decay all scores at once and keep those still at or above ``post_threshold``."""
    if not 0.0 <= post_threshold <= 1.0:
        raise ValueError(f"post_threshold must lie in [0, 1], got {post_threshold}")
    pen = penalties(mask_set)
    updated = mask_set.scores * pen
    return _finish(mask_set, updated, pen, post_threshold)


def oracle_suppress(mask_set, post_threshold=POST_THRESHOLD):
    """Reference nested-loop evaluation of the same update, for testing."""
    n = len(mask_set)
    scores = [float(s) for s in mask_set.scores]
    ms = [mask_set.masks[i] for i in range(n)]
    iou = [[mask_iou(ms[a], ms[b]) for b in range(n)] for a in range(n)]
    phi = []
    for a in range(n):
        best = 1.0
        for k in range(n):
            if scores[k] > scores[a]:
                best = min(best, 1.0 - iou[k][a])
        phi.append(best)
    pen = []
    for b in range(n):
        best = 1.0
        for a in range(n):
            if scores[a] > scores[b]:
                ratio = (1.0 - iou[a][b]) / phi[a] if phi[a] > 0.0 else float("inf")
                best = min(best, ratio)
        pen.append(best)
    pen = np.array(pen, dtype=np.float64)
    updated = np.array([scores[i] * pen[i] for i in range(n)], dtype=np.float64)
    return _finish(mask_set, updated, pen, post_threshold)


def score_table(mask_set, result):
    """Plain-text table of original vs decayed scores."""
    kept = set(int(i) for i in result.kept_indices)
    lines = ["index  category  score     penalty   updated   kept"]
    for i in range(len(mask_set)):
        lines.append(
            f"{i:5d}  {int(mask_set.categories[i]):8d}  {mask_set.scores[i]:.6f}  "
            f"{result.penalties[i]:.6f}  {result.updated_scores[i]:.6f}  "
            f"{'yes' if i in kept else 'no'}"
        )
    return "\n".join(lines) + "\n"


def _check_edges(edges):
    edges = np.asarray(edges, dtype=np.float64)
    if len(edges) < 2 or edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
        raise ValueError("bucket edges must increase strictly from 0 to 1")
    return edges


def _bucket(iou, edges):
    # left-closed buckets; the last one also holds IoU == 1
    return min(int(np.searchsorted(edges, iou, side="right")) - 1, len(edges) - 2)


def iou_overlap_stats(mask_sets, edges=IOU_EDGES, bands=COUNT_BANDS):
    """Histogram of pairwise IoUs, grouped by how many instances a sample has.

    Returns ``{band: {"samples", "pairs", "counts", "fractions"}}``. Samples
    that are empty or fall outside every band are skipped.
    """
    edges = _check_edges(edges)
    nb = len(edges) - 1
    report = {
        name: {"samples": 0, "pairs": 0, "counts": [0] * nb, "fractions": [0.0] * nb}
        for name, _, _ in bands
    }
    for ms in mask_sets:
        n = len(ms)
        if n == 0:
            continue
        band = next(
            (name for name, lo, hi in bands if n >= lo and (hi is None or n <= hi)), None
        )
        if band is None:
            continue
        entry = report[band]
        entry["samples"] += 1
        iou = kernels.iou_matrix(_flat(ms))
        for a in range(n):
            for b in range(a + 1, n):
                entry["counts"][_bucket(iou[a, b], edges)] += 1
                entry["pairs"] += 1
    for entry in report.values():
        if entry["pairs"]:
            entry["fractions"] = [c / entry["pairs"] for c in entry["counts"]]
    return report
