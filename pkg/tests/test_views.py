import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_masks
from lois_vqa.masks import MaskSet, ShapeError
from lois_vqa.nms import suppress
from lois_vqa.views import (
    ViewFeatures, background_image, background_region, fuse_instances, grid_edges, grid_pool,
    instance_features, resample_nearest, separate,
)


def kept(masks, scores=None):
    masks = np.asarray(masks, dtype=bool)
    scores = np.linspace(0.9, 0.5, len(masks)) if scores is None else scores
    return suppress(MaskSet.from_binary(masks, scores), 0.0)


class TestFuse:
    def test_union(self):
        a = np.zeros((3, 3), bool)
        a[0, 0] = True
        b = np.zeros((3, 3), bool)
        b[2, 2] = True
        fused = fuse_instances(kept([a, b]))
        assert fused.sum() == 2 and fused[0, 0] and fused[2, 2]

    def test_no_instances(self):
        fused = fuse_instances(suppress(MaskSet.empty(4, 5)))
        assert fused.shape == (4, 5) and not fused.any()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_partition(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(0, 8))
        fused = fuse_instances(kept(random_masks(rng, n, 12, 9)))
        bg = background_region(fused)
        assert not np.any(fused & bg)
        assert np.all(fused | bg)

    def test_idempotent(self, rng):
        masks = random_masks(rng, 4, 8, 8)
        once = fuse_instances(kept(masks))
        assert np.array_equal(fuse_instances(kept([once])), once)


class TestBackgroundImage:
    def test_mean_fill(self):
        img = np.arange(12, dtype=float).reshape(2, 2, 3)
        fused = np.array([[True, False], [False, False]])
        out = background_image(fused, img)
        assert out[0, 0].tolist() == pytest.approx(img[~fused].mean(axis=0).tolist())
        assert np.array_equal(out[~fused], img[~fused])

    def test_full_cover_falls_back_to_constant(self):
        out = background_image(np.ones((2, 2), bool), np.ones((2, 2, 3)), "mean", 0.25)
        assert np.all(out == 0.25)

    def test_no_mask_is_identity(self, rng):
        img = rng.random((3, 4, 3))
        assert np.array_equal(background_image(np.zeros((3, 4), bool), img), img)

    def test_bad_fill(self):
        with pytest.raises(ValueError):
            background_image(np.ones((1, 1), bool), np.ones((1, 1, 3)), "blur")


class TestPooling:
    def test_grid_edges(self):
        assert grid_edges(10, 3).tolist() == [0, 3, 6, 10]
        assert grid_edges(4, 4).tolist() == [0, 1, 2, 3, 4]

    def test_resample_identity_and_upsample(self):
        m = np.array([[[1, 0], [0, 1]]], dtype=bool)
        assert resample_nearest(m, 2, 2) is m
        up = resample_nearest(m, 4, 4)
        assert up[0].tolist() == np.kron(m[0], np.ones((2, 2), bool)).tolist()

    def test_cell_means_by_hand(self):
        F = np.arange(16, dtype=float).reshape(4, 4, 1)
        fused = np.zeros((4, 4), bool)
        fused[0, 0] = True
        pooled = grid_pool(F, fused, 2)
        # cell (0,0) keeps pixels 1, 4, 5
        assert pooled[0].tolist() == [10 / 3, (2 + 3 + 6 + 7) / 4, (8 + 9 + 12 + 13) / 4, (10 + 11 + 14 + 15) / 4]

    def test_covered_cell_pools_to_zero(self, rng):
        F = rng.standard_normal((6, 6, 3))
        fused = np.zeros((6, 6), bool)
        fused[0:3, 3:6] = True
        pooled = grid_pool(F, fused, 2)
        assert np.all(pooled[:, 1] == 0)
        assert np.all(pooled[:, [0, 2, 3]] != 0)

    def test_instance_features(self, rng):
        F = rng.standard_normal((5, 5, 4))
        masks = random_masks(rng, 3, 5, 5)
        res = kept(masks, [0.9, 0.8, 0.7])
        got = instance_features(F, res)
        for col, idx in enumerate(res.kept_indices):
            ref = F[masks[idx]].mean(axis=0) if masks[idx].any() else np.zeros(4)
            assert np.max(np.abs(got[:, col] - ref)) <= 1e-12

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            grid_pool(np.zeros((2, 2, 1)), np.zeros((2, 2), bool), 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_instance_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((8, 8, 3))
        masks = random_masks(rng, 4, 8, 8)
        res = MaskSet.from_binary(masks, np.ones(4))
        perm = rng.permutation(4)
        a = separate(F, suppress(res, 0.0))
        b = separate(F, suppress(res.subset(perm), 0.0))
        assert np.array_equal(a.background, b.background)
        assert np.allclose(np.sort(a.instance, axis=1), np.sort(b.instance, axis=1), atol=1e-12)


class TestSeparate:
    def test_shapes(self, rng):
        F = rng.standard_normal((8, 8, 5))
        v = separate(F, kept(random_masks(rng, 3, 8, 8), [0.9, 0.2, 0.1]), 4)
        assert v.instance.shape[0] == 5 and v.background.shape == (5, 16)

    def test_coarser_masks_are_resampled(self, rng):
        F = rng.standard_normal((4, 4, 2))
        masks = np.zeros((1, 8, 8), bool)
        masks[0, :4, :4] = True
        v = separate(F, kept(masks), 2)
        assert np.all(v.background[:, 0] == 0)
        assert np.max(np.abs(v.instance[:, 0] - F[:2, :2].reshape(-1, 2).mean(axis=0))) <= 1e-12

    def test_view_validation(self):
        with pytest.raises(ShapeError):
            ViewFeatures(np.zeros((3, 1)), np.zeros((4, 2)))
        with pytest.raises(ShapeError):
            ViewFeatures(np.zeros((3, 1)), np.zeros((3, 0)))


def test_two_pixel_mask_mean():
    F = np.zeros((2, 3, 2))
    F[0, 0] = [1.0, 4.0]
    F[1, 2] = [3.0, -2.0]
    m = np.zeros((1, 2, 3), bool)
    m[0, 0, 0] = m[0, 1, 2] = True
    assert instance_features(F, kept(m))[:, 0].tolist() == [2.0, 1.0]


def test_half_masked_uniform_image():
    img = np.zeros((4, 4, 3))
    img[:, 2:] = [0.2, 0.4, 0.6]
    fused = np.zeros((4, 4), bool)
    fused[:, :2] = True
    out = background_image(fused, img)
    assert np.allclose(out[:, :2], [0.2, 0.4, 0.6], atol=1e-15)


@pytest.mark.parametrize("cells", [1, 2, 3, 5])
def test_constant_map_without_instances(cells):
    F = np.full((10, 10, 2), [1.5, -0.25])
    pooled = grid_pool(F, np.zeros((10, 10), bool), cells)
    assert np.all(pooled == np.array([[1.5], [-0.25]]))
