"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``LOIS_VQA_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the
implementation in use.
"""

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("LOIS_VQA_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"


def _as_u8(masks):
    return np.ascontiguousarray(masks, dtype=np.uint8)


def pairwise_intersections(masks, impl=None):
    """Intersection pixel counts for flattened binary masks of shape (N, P)."""
    impl = impl or _impl
    return impl.pairwise_intersections(_as_u8(masks))


def iou_matrix(masks, impl=None):
    impl = impl or _impl
    return impl.iou_matrix(_as_u8(masks))


def matrix_nms_penalties(iou, scores, impl=None):
    """Return ``(phi, penalties)`` for linear Matrix-NMS."""
    impl = impl or _impl
    return impl.matrix_nms_penalties(
        np.ascontiguousarray(iou, dtype=np.float64),
        np.ascontiguousarray(scores, dtype=np.float64),
    )


def cell_mean_pool(feat, keep, row_edges, col_edges, impl=None):
    impl = impl or _impl
    return impl.cell_mean_pool(
        np.ascontiguousarray(feat, dtype=np.float64),
        _as_u8(keep),
        np.ascontiguousarray(row_edges, dtype=np.int64),
        np.ascontiguousarray(col_edges, dtype=np.int64),
    )


def masked_means(feat, masks, impl=None):
    impl = impl or _impl
    return impl.masked_means(np.ascontiguousarray(feat, dtype=np.float64), _as_u8(masks))
