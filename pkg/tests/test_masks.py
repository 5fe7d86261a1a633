import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lois_vqa.masks import (
    MaskSet, ShapeError, cell_of, decode_masks, grid_index, mask_logits, select_candidates,
)


class TestGridIndex:
    def test_examples(self):
        assert grid_index(0, 0, 12) == 0
        assert grid_index(1, 2, 12) == 14
        assert grid_index(11, 11, 12) == 143  # last of S^2 = 144 channels

    @pytest.mark.parametrize("i,j", [(-1, 0), (0, 12), (12, 3)])
    def test_out_of_range(self, i, j):
        with pytest.raises(ValueError):
            grid_index(i, j, 12)

    @given(st.integers(1, 40), st.data())
    def test_round_trip(self, S, data):
        k = data.draw(st.integers(0, S * S - 1))
        assert grid_index(*cell_of(k, S), S) == k

    def test_bijective(self):
        S = 5
        assert sorted(grid_index(i, j, S) for i in range(S) for j in range(S)) == list(range(S * S))


class TestDecode:
    def test_scalar_kernel(self):
        F = np.ones((3, 4, 1))
        G = np.full((2, 2, 1), 0.7)
        assert np.allclose(mask_logits(F, G), 0.7)

    def test_zero_kernels_give_half(self):
        out = decode_masks(np.random.default_rng(0).standard_normal((5, 6, 3)), np.zeros((3, 3, 3)))
        assert out.shape == (9, 5, 6)
        assert np.all(out == 0.5)

    def test_matches_triple_loop(self, rng):
        F = rng.standard_normal((2, 2, 3))
        G = rng.standard_normal((1, 1, 3))
        expected = np.zeros((1, 2, 2))
        for x in range(2):
            for y in range(2):
                expected[0, x, y] = sum(G[0, 0, e] * F[x, y, e] for e in range(3))
        assert np.allclose(mask_logits(F, G), expected, atol=1e-14)
        assert np.allclose(decode_masks(F, G), 1 / (1 + np.exp(-expected)), atol=1e-14)

    def test_channel_order_follows_grid_index(self, rng):
        F = rng.standard_normal((3, 3, 2))
        G = rng.standard_normal((4, 4, 2))
        logits = mask_logits(F, G)
        for i in range(4):
            for j in range(4):
                assert np.allclose(logits[grid_index(i, j, 4)], F @ G[i, j])

    def test_linear_in_features(self, rng):
        G = rng.standard_normal((3, 3, 4))
        F1, F2 = rng.standard_normal((2, 6, 5, 4))
        lhs = mask_logits(F1 + F2, G)
        assert np.max(np.abs(lhs - mask_logits(F1, G) - mask_logits(F2, G))) <= 1e-10

    def test_soft_masks_open_interval(self, rng):
        out = decode_masks(rng.standard_normal((6, 6, 4)), rng.standard_normal((4, 4, 4)))
        assert np.all((out > 0) & (out < 1))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            decode_masks(np.zeros((2, 2, 3)), np.zeros((2, 2, 4)))

    def test_non_finite_features_rejected(self):
        F = np.zeros((2, 2, 1))
        F[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            decode_masks(F, np.zeros((1, 1, 1)))


def _cats(scores, C=3):
    scores = np.asarray(scores, dtype=float)
    S = int(round(np.sqrt(len(scores))))
    cat = np.zeros((S, S, C))
    cat[..., 1] = scores.reshape(S, S)
    return cat


class TestSelectCandidates:
    def test_all_zero_scores(self):
        ms = select_candidates(np.full((4, 3, 3), 0.9), np.zeros((2, 2, 5)), 0.1, 0.5)
        assert len(ms) == 0
        assert ms.shape == (3, 3)

    def test_single_cell(self, rng):
        soft = rng.random((4, 3, 3))
        ms = select_candidates(soft, _cats([0, 0.9, 0, 0]), 0.1, 0.5)
        assert len(ms) == 1
        assert np.array_equal(ms.soft[0], soft[1])
        assert np.array_equal(ms.masks[0], soft[1] > 0.5)
        assert ms.scores[0] == 0.9 and ms.categories[0] == 1 and ms.cells[0] == 1

    def test_threshold_tie_retained(self):
        # enumerate cells against the threshold: 0.05 < 0.1 <= 0.1 <= 0.3
        soft = np.full((4, 2, 2), 0.7)
        ms = select_candidates(soft, _cats([0.05, 0.3, 0.1, 0.0]), 0.1, 0.5)
        kept = [k for k, s in enumerate([0.05, 0.3, 0.1, 0.0]) if s >= 0.1]
        assert list(ms.cells) == kept == [1, 2]

    def test_mask_threshold_strict(self):
        soft = np.full((1, 2, 2), 0.5)
        soft[0, 0, 0] = 0.51
        ms = select_candidates(soft, np.ones((1, 1, 1)), 0.1, 0.5)
        assert ms.masks[0].tolist() == [[True, False], [False, False]]

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            select_candidates(np.zeros((1, 1, 1)), np.ones((1, 1, 1)), 1.5, 0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=9, max_size=9), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_threshold(self, scores, t1, t2):
        lo, hi = sorted((t1, t2))
        soft = np.full((9, 2, 2), 0.6)
        a = select_candidates(soft, _cats(scores), lo, 0.5)
        b = select_candidates(soft, _cats(scores), hi, 0.5)
        assert len(b) <= len(a) <= 9
        assert set(b.cells) <= set(a.cells)
        assert set(np.unique(a.masks)) <= {False, True}


def test_maskset_validates_lengths():
    with pytest.raises(ShapeError):
        MaskSet.from_binary(np.zeros((2, 3, 3), dtype=bool), np.ones(3))
