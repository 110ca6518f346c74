import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rgbdnav.masks import (
    IsolatedDepth,
    StructuringElement,
    erode_bitmap,
    erode_mask,
    isolate_depth,
    zscore_filter,
)
from rgbdnav.types import CameraIntrinsics, CameraPose, DepthFrame, Detection2D, InstanceMask

from conftest import erosion_oracle, zscore_keep_oracle

KERNEL = np.ones((3, 3), dtype=bool)

bitmaps_8x8 = arrays(bool, (8, 8))


def _mask(bitmap):
    h, w = np.asarray(bitmap).shape
    det = Detection2D((0.0, 0.0, float(w), float(h)), 1.0, "thing")
    return InstanceMask(np.asarray(bitmap, dtype=bool), det)


def _frame(depth):
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    intr = CameraIntrinsics(10.0, 10.0, w / 2 - 0.5, h / 2 - 0.5, w, h)
    return DepthFrame("f0", depth, intr, CameraPose.identity())


class TestStructuringElement:
    def test_default_is_full_3x3(self):
        assert StructuringElement.box(3).bitmap.all()

    def test_even_side_rejected(self):
        with pytest.raises(ValueError):
            StructuringElement(np.ones((2, 3), dtype=bool))

    def test_unset_center_rejected(self):
        bad = np.ones((3, 3), dtype=bool)
        bad[1, 1] = False
        with pytest.raises(ValueError):
            StructuringElement(bad)


class TestErosion:
    def test_all_ones_5x5_keeps_interior(self):
        out = erode_bitmap(np.ones((5, 5), dtype=bool), KERNEL)
        expected = np.zeros((5, 5), dtype=bool)
        expected[1:4, 1:4] = True
        assert np.array_equal(out, expected)

    def test_single_pixel_erodes_away(self):
        bitmap = np.zeros((5, 5), dtype=bool)
        bitmap[2, 2] = True
        assert not erode_bitmap(bitmap, KERNEL).any()

    def test_random_16x16_matches_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            bitmap = rng.random((16, 16)) < 0.6
            assert np.array_equal(erode_bitmap(bitmap, KERNEL), erosion_oracle(bitmap, KERNEL))

    def test_cross_kernel_matches_oracle(self):
        cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        rng = np.random.default_rng(4)
        bitmap = rng.random((12, 12)) < 0.7
        assert np.array_equal(erode_bitmap(bitmap, cross), erosion_oracle(bitmap, cross))

    @given(bitmaps_8x8)
    def test_anti_extensive(self, bitmap):
        out = erode_bitmap(bitmap, KERNEL)
        assert not (out & ~bitmap).any()

    @given(bitmaps_8x8, bitmaps_8x8)
    def test_monotone(self, a, extra):
        b = a | extra  # a is a subset of b by construction
        ea = erode_bitmap(a, KERNEL)
        eb = erode_bitmap(b, KERNEL)
        assert not (ea & ~eb).any()

    @settings(max_examples=200)
    @given(bitmaps_8x8)
    def test_matches_oracle_on_8x8(self, bitmap):
        assert np.array_equal(erode_bitmap(bitmap, KERNEL), erosion_oracle(bitmap, KERNEL))

    def test_erode_mask_keeps_detection(self):
        mask = _mask(np.ones((4, 6)))
        out = erode_mask(mask)
        assert out.detection is mask.detection
        assert out.pixel_count() < mask.pixel_count()


class TestIsolateDepth:
    def test_collects_masked_depths(self):
        depth = np.full((4, 4), 2.0)
        bitmap = np.zeros((4, 4), dtype=bool)
        bitmap[1:3, 1:3] = True
        iso = isolate_depth(_frame(depth), _mask(bitmap))
        assert len(iso) == 4
        assert np.all(iso.depths == 2.0)

    def test_zero_depth_excluded(self):
        depth = np.full((4, 4), 2.0)
        depth[1, 1] = 0.0
        bitmap = np.zeros((4, 4), dtype=bool)
        bitmap[1, 1] = True
        bitmap[1, 2] = True
        iso = isolate_depth(_frame(depth), _mask(bitmap))
        assert len(iso) == 1
        assert iso.us[0] == 2 and iso.vs[0] == 1

    def test_mask_over_invalid_region_is_empty(self):
        depth = np.zeros((4, 4))
        bitmap = np.ones((4, 4), dtype=bool)
        assert len(isolate_depth(_frame(depth), _mask(bitmap))) == 0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            isolate_depth(_frame(np.ones((4, 4))), _mask(np.ones((5, 5))))

    @given(arrays(bool, (6, 6)))
    def test_size_bounded_by_popcount(self, bitmap):
        depth = np.full((6, 6), 1.5)
        iso = isolate_depth(_frame(depth), _mask(bitmap))
        assert len(iso) <= int(bitmap.sum())


def _isolated(values):
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    det = Detection2D((0.0, 0.0, 8.0, 8.0), 1.0, "thing")
    return IsolatedDepth(np.arange(n), np.zeros(n, dtype=int), values, det)


class TestZScoreFilter:
    def test_uniform_values_pass_through(self):
        iso = _isolated([1.0] * 10)
        assert len(zscore_filter(iso, 2.0)) == 10

    def test_outlier_removed(self):
        values = [1.0] * 20 + [9.0]
        kept = zscore_filter(_isolated(values), 2.0)
        # the oracle agrees the 9.0 entry is the only casualty
        mu = np.mean(values)
        sigma = np.std(values)
        assert abs((9.0 - mu) / sigma) >= 2.0
        assert len(kept) == 20
        assert kept.depths.max() == 1.0

    def test_infinite_tau_is_identity(self):
        iso = _isolated([1.0, 2.0, 3.0, 50.0])
        assert len(zscore_filter(iso, np.inf)) == 4

    def test_small_sets_untouched(self):
        iso = _isolated([1.0, 100.0])
        assert len(zscore_filter(iso, 2.0)) == 2

    def test_invalid_tau_rejected(self):
        with pytest.raises(ValueError):
            zscore_filter(_isolated([1.0, 2.0, 3.0]), 0.0)

    def test_1000_random_sets_match_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            values = rng.uniform(0.5, 5.0, size=n)
            if rng.random() < 0.3 and n >= 3:
                values[0] = 50.0  # force an outlier sometimes
            kept = zscore_filter(_isolated(values), 2.0)
            expected = zscore_keep_oracle(list(values), 2.0)
            assert list(kept.us) == expected

    @given(st.lists(st.floats(0.1, 100.0), min_size=0, max_size=30), st.floats(0.5, 5.0))
    def test_kept_values_satisfy_predicate_on_original_stats(self, values, tau):
        iso = _isolated(values)
        kept = zscore_filter(iso, tau)
        assert len(kept) <= len(iso)
        if len(values) >= 3:
            mu = np.mean(values)
            sigma = np.std(values)
            if sigma > 0:
                assert np.all(np.abs(kept.depths - mu) / sigma < tau)
