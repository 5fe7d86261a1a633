"""Pure numpy versions of the compiled kernels.

Sums go through ``np.cumsum`` so accumulation is strictly left to right,
matching the compiled loops bit for bit.
"""

import numpy as np


def pairwise_intersections(masks):
    m = np.ascontiguousarray(masks, dtype=np.int64)
    return m @ m.T


def iou_matrix(masks):
    inter = pairwise_intersections(masks)
    area = np.diag(inter)
    union = area[:, None] + area[None, :] - inter
    iou = np.zeros(inter.shape, dtype=np.float64)
    nz = union > 0
    iou[nz] = inter[nz].astype(np.float64) / union[nz].astype(np.float64)
    return iou


def matrix_nms_penalties(iou, scores):
    scores = np.asarray(scores, dtype=np.float64)
    # higher[k, a]: mask k outranks mask a
    higher = scores[:, None] > scores[None, :]
    decay = 1.0 - iou
    phi = np.minimum(np.where(higher, decay, 1.0).min(axis=0, initial=1.0), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(phi[:, None] > 0.0, decay / phi[:, None], np.inf)
    pen = np.where(higher, ratio, 1.0).min(axis=0, initial=1.0)
    return phi, pen


def _seq_mean(rows):
    if rows.shape[0] == 0:
        return None
    return np.cumsum(rows, axis=0)[-1] / float(rows.shape[0])


def cell_mean_pool(feat, keep, row_edges, col_edges):
    nl = feat.shape[2]
    gr, gc = len(row_edges) - 1, len(col_edges) - 1
    out = np.zeros((nl, gr * gc), dtype=np.float64)
    keep = keep.astype(bool)
    for ci in range(gr):
        r0, r1 = row_edges[ci], row_edges[ci + 1]
        for cj in range(gc):
            c0, c1 = col_edges[cj], col_edges[cj + 1]
            mean = _seq_mean(feat[r0:r1, c0:c1][keep[r0:r1, c0:c1]])
            if mean is not None:
                out[:, ci * gc + cj] = mean
    return out


def masked_means(feat, masks):
    out = np.zeros((feat.shape[2], masks.shape[0]), dtype=np.float64)
    for i, m in enumerate(masks.astype(bool)):
        mean = _seq_mean(feat[m])
        if mean is not None:
            out[:, i] = mean
    return out
