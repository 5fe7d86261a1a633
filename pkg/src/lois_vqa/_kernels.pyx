# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for mask suppression and masked pooling.

Every reduction runs in ascending index order so results are bit-identical
to the sequential-order numpy fallback in ``_fallback.py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def pairwise_intersections(const unsigned char[:, ::1] masks):
    """Return the N x N matrix of pixel-intersection counts of binary masks."""
    cdef Py_ssize_t n = masks.shape[0]
    cdef Py_ssize_t npix = masks.shape[1]
    cdef Py_ssize_t a, b, p
    cdef long long count
    out = np.zeros((n, n), dtype=np.int64)
    cdef long long[:, ::1] inter = out
    with nogil:
        for a in range(n):
            for b in range(a, n):
                count = 0
                for p in range(npix):
                    count = count + (masks[a, p] & masks[b, p])
                inter[a, b] = count
                inter[b, a] = count
    return out


def iou_matrix(const unsigned char[:, ::1] masks):
    """IoU of every pair of binary masks; two empty masks have IoU 0."""
    cdef Py_ssize_t n = masks.shape[0]
    cdef Py_ssize_t a, b
    cdef long long[:, ::1] inter = pairwise_intersections(masks)
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] iou = out
    cdef long long union
    with nogil:
        for a in range(n):
            for b in range(n):
                union = inter[a, a] + inter[b, b] - inter[a, b]
                if union > 0:
                    iou[a, b] = <double>inter[a, b] / <double>union
    return out


def matrix_nms_penalties(const double[:, ::1] iou, const double[::1] scores):
    """Decay floors and clamped penalty factors of linear Matrix-NMS."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t a, b, k
    cdef double best, ratio
    phi_arr = np.ones(n, dtype=np.float64)
    pen_arr = np.ones(n, dtype=np.float64)
    cdef double[::1] phi = phi_arr
    cdef double[::1] pen = pen_arr
    with nogil:
        for a in range(n):
            best = 1.0
            for k in range(n):
                if scores[k] > scores[a] and 1.0 - iou[k, a] < best:
                    best = 1.0 - iou[k, a]
            phi[a] = best
        for b in range(n):
            best = 1.0
            for a in range(n):
                if scores[a] > scores[b]:
                    if phi[a] > 0.0:
                        ratio = (1.0 - iou[a, b]) / phi[a]
                    else:
                        ratio = INFINITY
                    if ratio < best:
                        best = ratio
            pen[b] = best
    return phi_arr, pen_arr


def cell_mean_pool(const double[:, :, ::1] feat, const unsigned char[:, ::1] keep,
                   const long long[::1] row_edges, const long long[::1] col_edges):
    """Average ``feat`` over the kept pixels of each grid cell.

    Cells are visited row-major; a cell without kept pixels pools to zero.
    Returns an (L, cells) array.
    """
    cdef Py_ssize_t gr = row_edges.shape[0] - 1
    cdef Py_ssize_t gc = col_edges.shape[0] - 1
    cdef Py_ssize_t nl = feat.shape[2]
    cdef Py_ssize_t ci, cj, x, y, l, cell
    cdef long long count
    out = np.zeros((nl, gr * gc), dtype=np.float64)
    cdef double[:, ::1] res = out
    acc_arr = np.zeros(nl, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    with nogil:
        for ci in range(gr):
            for cj in range(gc):
                cell = ci * gc + cj
                for l in range(nl):
                    acc[l] = 0.0
                count = 0
                for x in range(row_edges[ci], row_edges[ci + 1]):
                    for y in range(col_edges[cj], col_edges[cj + 1]):
                        if keep[x, y]:
                            count = count + 1
                            for l in range(nl):
                                acc[l] = acc[l] + feat[x, y, l]
                if count > 0:
                    for l in range(nl):
                        res[l, cell] = acc[l] / <double>count
    return out


def masked_means(const double[:, :, ::1] feat, const unsigned char[:, :, ::1] masks):
    """Mean feature vector inside each mask, as columns of an (L, N) array."""
    cdef Py_ssize_t n = masks.shape[0]
    cdef Py_ssize_t h = feat.shape[0]
    cdef Py_ssize_t w = feat.shape[1]
    cdef Py_ssize_t nl = feat.shape[2]
    cdef Py_ssize_t i, x, y, l
    cdef long long count
    out = np.zeros((nl, n), dtype=np.float64)
    cdef double[:, ::1] res = out
    acc_arr = np.zeros(nl, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    with nogil:
        for i in range(n):
            for l in range(nl):
                acc[l] = 0.0
            count = 0
            for x in range(h):
                for y in range(w):
                    if masks[i, x, y]:
                        count = count + 1
                        for l in range(nl):
                            acc[l] = acc[l] + feat[x, y, l]
            if count > 0:
                for l in range(nl):
                    res[l, i] = acc[l] / <double>count
    return out
