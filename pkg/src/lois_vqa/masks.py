"""Grid-cell instance mask decoding with 1x1 dynamic kernels."""

from dataclasses import dataclass

import numpy as np

# predefined grid levels; only one level is decoded at a time
GRID_LEVELS = (12, 16, 24, 36, 40)
DEFAULT_GRID = 12
DEFAULT_CATEGORIES = 80
SCORE_THRESHOLD = 0.1
MASK_THRESHOLD = 0.5


class ShapeError(ValueError):
    pass


@dataclass
class MaskSet:
    """Candidate instance masks.

    ``masks`` is the binarized version of ``soft``; ``cells`` records the
    grid channel each entry was decoded from (-1 when unknown).
    """

    soft: np.ndarray  # (N, H, W) float64 in [0, 1]
    masks: np.ndarray  # (N, H, W) bool
    scores: np.ndarray  # (N,)
    categories: np.ndarray  # (N,) int64
    cells: np.ndarray  # (N,) int64

    def __post_init__(self):
        self.soft = np.asarray(self.soft, dtype=np.float64)
        self.masks = np.asarray(self.masks, dtype=bool)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        self.categories = np.asarray(self.categories, dtype=np.int64).reshape(-1)
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1)
        n = len(self.scores)
        if self.masks.ndim != 3 or self.masks.shape[0] != n:
            raise ShapeError(f"masks must be (N, H, W) with N={n}, got {self.masks.shape}")
        if self.soft.shape != self.masks.shape:
            raise ShapeError(f"soft {self.soft.shape} != masks {self.masks.shape}")
        if len(self.categories) != n or len(self.cells) != n:
            raise ShapeError("categories/cells length mismatch")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    def __len__(self):
        return len(self.scores)

    @property
    def shape(self):
        return self.masks.shape[1:]

    @classmethod
    def from_binary(cls, masks, scores, categories=None):
        """Build a set from binary masks alone; soft masks mirror the binary ones."""
        masks = np.asarray(masks, dtype=bool)
        n = masks.shape[0]
        if categories is None:
            categories = np.zeros(n, dtype=np.int64)
        return cls(
            soft=masks.astype(np.float64),
            masks=masks,
            scores=scores,
            categories=categories,
            cells=np.full(n, -1, dtype=np.int64),
        )

    @classmethod
    def empty(cls, height, width):
        return cls.from_binary(np.zeros((0, height, width), dtype=bool), np.zeros(0))

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return MaskSet(
            self.soft[idx], self.masks[idx], self.scores[idx], self.categories[idx], self.cells[idx]
        )


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def grid_index(i, j, S):
    """Output channel of grid cell (i, j) on an S x S grid."""
    if S < 1:
        raise ValueError(f"grid side must be >= 1, got {S}")
    if not (0 <= i < S and 0 <= j < S):
        raise ValueError(f"cell ({i}, {j}) outside a {S}x{S} grid")
    return i * S + j


def cell_of(k, S):
    if not 0 <= k < S * S:
        raise ValueError(f"channel {k} outside a {S}x{S} grid")
    return divmod(k, S)


def _check_feature_map(F):
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 3 or min(F.shape) < 1:
        raise ShapeError(f"feature map must be H x W x E, got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("feature map has non-finite entries")
    return F


def mask_logits(F, G):
    """Per-cell mask logits, shape (S*S, H, W); channel k = grid_index(i, j)."""
    F = _check_feature_map(F)
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 3 or G.shape[0] != G.shape[1]:
        raise ShapeError(f"kernel bank must be S x S x E, got {G.shape}")
    if G.shape[2] != F.shape[2]:
        raise ShapeError(f"kernel channels {G.shape[2]} != feature channels {F.shape[2]}")
    S = G.shape[0]
    kernels = G.reshape(S * S, -1)
    return np.einsum("ke,hwe->khw", kernels, F)


def decode_masks(F, G):
    """Soft instance masks, one per grid cell, from 1x1 dynamic convolution."""
    return sigmoid(mask_logits(F, G))


def select_candidates(masks, cat, score_threshold=SCORE_THRESHOLD, mask_threshold=MASK_THRESHOLD):
    """Keep cells whose best category score reaches ``score_threshold``.

    A pixel belongs to the binary mask when its soft value is strictly above
    ``mask_threshold``.
    """
    for name, t in (("score_threshold", score_threshold), ("mask_threshold", mask_threshold)):
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {t}")
    masks = np.asarray(masks, dtype=np.float64)
    cat = np.asarray(cat, dtype=np.float64)
    if cat.ndim != 3:
        raise ShapeError(f"category map must be S x S x C, got {cat.shape}")
    S = cat.shape[0]
    if masks.ndim != 3 or masks.shape[0] != S * S:
        raise ShapeError(f"expected {S * S} mask channels, got {masks.shape}")
    flat = cat.reshape(S * S, -1)
    conf = flat.max(axis=1)
    best = flat.argmax(axis=1)
    keep = np.flatnonzero(conf >= score_threshold)
    soft = masks[keep]
    return MaskSet(
        soft=soft,
        masks=soft > mask_threshold,
        scores=conf[keep],
        categories=best[keep],
        cells=keep,
    )
