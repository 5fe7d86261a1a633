"""Instance and background views of one image.

The instance view holds one pooled feature column per retained mask. The
background view pools a uniform grid over the pixels no instance covers.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .masks import ShapeError

DEFAULT_GRID = 4
FEATURE_DIM = 2048


@dataclass
class ViewFeatures:
    instance: np.ndarray  # (L, rho)
    background: np.ndarray  # (L, phi)

    def __post_init__(self):
        self.instance = np.asarray(self.instance, dtype=np.float64)
        self.background = np.asarray(self.background, dtype=np.float64)
        if self.instance.ndim != 2 or self.background.ndim != 2:
            raise ShapeError("views must be 2-D (L, count)")
        if self.instance.shape[0] != self.background.shape[0]:
            raise ShapeError("instance and background feature dims differ")
        if self.background.shape[1] < 1:
            raise ShapeError("background view needs at least one column")


def fuse_instances(result):
    """Union of all retained binary masks."""
    masks = result.kept.masks
    if len(masks) == 0:
        return np.zeros(result.kept.shape, dtype=bool)
    return np.logical_or.reduce(masks, axis=0)


def background_region(fused):
    return ~np.asarray(fused, dtype=bool)


def background_image(fused, image, fill="mean", value=0.0):
    """Replace instance pixels with a fill so object silhouettes are hidden.

    ``fill="mean"`` uses the per-channel mean of the background pixels and
    falls back to ``value`` when no background pixel exists.
    """
    fused = np.asarray(fused, dtype=bool)
    image = np.asarray(image, dtype=np.float64)
    if image.shape[:2] != fused.shape:
        raise ShapeError(f"image {image.shape} does not match mask {fused.shape}")
    out = image.copy()
    if not fused.any():
        return out
    bg = ~fused
    if fill == "mean" and bg.any():
        # sequential sum keeps the fill reproducible bit for bit
        pixels = image[bg]
        fill_value = np.cumsum(pixels, axis=0)[-1] / float(len(pixels))
    elif fill in ("mean", "constant"):
        fill_value = np.full(image.shape[2:], value, dtype=np.float64)
    else:
        raise ValueError(f"unknown fill strategy {fill!r}")
    out[fused] = fill_value
    return out


def resample_nearest(masks, height, width):
    """Nearest-neighbour resampling of (N, h, w) masks onto an (N, height, width) grid."""
    masks = np.asarray(masks)
    h, w = masks.shape[-2:]
    if (h, w) == (height, width):
        return masks
    rows = np.minimum(((np.arange(height) + 0.5) * h / height).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * w / width).astype(np.int64), w - 1)
    return masks[..., rows[:, None], cols[None, :]]


def instance_features(F, result):
    """Mean feature vector inside each retained mask, shape (L, rho)."""
    F = np.asarray(F, dtype=np.float64)
    masks = resample_nearest(result.kept.masks, F.shape[0], F.shape[1])
    return kernels.masked_means(F, masks)


def grid_edges(size, cells):
    return np.array([(k * size) // cells for k in range(cells + 1)], dtype=np.int64)


def grid_pool(bg, fused, cells=DEFAULT_GRID):
    """Average uncovered pixels of each cell of a cells x cells grid, shape (L, cells**2).

    A cell with no uncovered pixel yields a zero column.
    """
    if cells < 1:
        raise ValueError(f"grid must have at least one cell per side, got {cells}")
    bg = np.asarray(bg, dtype=np.float64)
    if bg.ndim == 2:
        bg = bg[:, :, None]
    fused = np.asarray(fused, dtype=bool)
    if fused.shape != bg.shape[:2]:
        fused = resample_nearest(fused, bg.shape[0], bg.shape[1])
    keep = ~fused
    return kernels.cell_mean_pool(
        bg, keep, grid_edges(bg.shape[0], cells), grid_edges(bg.shape[1], cells)
    )


def separate(F, result, cells=DEFAULT_GRID):
    """Both views from a feature map and the masks that survived suppression."""
    F = np.asarray(F, dtype=np.float64)
    fused = fuse_instances(result)
    if fused.shape != F.shape[:2]:
        fused = resample_nearest(fused, F.shape[0], F.shape[1])
    return ViewFeatures(instance_features(F, result), grid_pool(F, fused, cells))
