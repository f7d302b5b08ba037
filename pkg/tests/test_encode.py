import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circledet import (
    Circle,
    EncodeError,
    EncoderConfig,
    FixedSigma,
    Point2,
    SizeAdaptiveSigma,
    encode,
    gaussian_sigma,
)
import oracles


def c(x, y, r, category=0):
    return Circle(Point2(x, y), r, category=category)


CFG = EncoderConfig(input_w=64, input_h=64, stride=4,
                    sigma_policy=FixedSigma(2.0))


class TestGaussianSigma:
    def test_fixed_returns_constant(self):
        assert gaussian_sigma(3.0, FixedSigma(2.0)) == 2.0
        assert gaussian_sigma(100.0, FixedSigma(2.0)) == 2.0

    def test_size_adaptive_monotone(self):
        pol = SizeAdaptiveSigma(0.7)
        assert gaussian_sigma(8.0, pol) >= gaussian_sigma(4.0, pol)

    def test_size_adaptive_matches_scan_oracle(self):
        pol = SizeAdaptiveSigma(0.7)
        got = gaussian_sigma(10.0, pol)
        assert got == pytest.approx(oracles.sigma_scan_oracle(10.0, 0.7),
                                    abs=1e-3)

    def test_scales_linearly_with_radius(self):
        pol = SizeAdaptiveSigma(0.5)
        assert gaussian_sigma(20.0, pol) == pytest.approx(
            2 * gaussian_sigma(10.0, pol), rel=1e-9)

    def test_nonpositive_radius_rejected(self):
        with pytest.raises(ValueError):
            gaussian_sigma(0.0, FixedSigma(1.0))
        with pytest.raises(ValueError):
            gaussian_sigma(-1.0, SizeAdaptiveSigma(0.7))

    def test_policy_parameters_validated(self):
        with pytest.raises(ValueError):
            FixedSigma(0.0)
        with pytest.raises(ValueError):
            SizeAdaptiveSigma(1.0)


class TestEncoderConfig:
    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            EncoderConfig(input_w=65, input_h=64, stride=4)

    def test_grid_dims(self):
        assert (CFG.grid_w, CFG.grid_h) == (16, 16)


class TestEncode:
    def test_center_on_cell_gives_one(self):
        # center (20, 36) -> cell (5, 9) with zero offset
        t = encode([c(20, 36, 8)], CFG)
        assert t.heatmap[0, 9, 5] == 1.0
        assert t.keypoints[0].offset_x == 0.0
        assert t.keypoints[0].offset_y == 0.0

    def test_value_at_sigma_sqrt2_distance(self):
        # cells at squared distance 2*sigma^2 = 8 from the keypoint
        t = encode([c(20, 36, 8)], CFG)
        assert t.heatmap[0, 9 + 2, 5 + 2] == pytest.approx(math.exp(-1),
                                                           abs=1e-12)

    def test_max_combination_matches_splat_oracle(self):
        gt = [c(10.5, 13.0, 6), c(22.0, 17.5, 10), c(40.0, 40.0, 7)]
        t = encode(gt, CFG)
        expected = oracles.splat_oracle(
            gt, CFG, lambda r: gaussian_sigma(r, CFG.sigma_policy))
        np.testing.assert_allclose(t.heatmap, expected, atol=1e-12)

    def test_heatmap_one_only_at_keypoints(self):
        gt = [c(10.5, 13.0, 6), c(40.0, 40.0, 7)]
        t = encode(gt, CFG)
        ones = {(k.cell_y, k.cell_x) for k in t.keypoints}
        ys, xs = np.nonzero(t.heatmap[0] == 1.0)
        assert set(zip(ys.tolist(), xs.tolist())) == ones

    def test_keypoint_list_reproduces_input(self):
        gt = [c(10.7, 13.2, 6.3), c(40.1, 39.9, 7.8)]
        t = encode(gt, CFG)
        for circle, k in zip(gt, t.keypoints):
            assert (k.cell_x + k.offset_x) * CFG.stride == pytest.approx(
                circle.center.x, abs=1e-9)
            assert (k.cell_y + k.offset_y) * CFG.stride == pytest.approx(
                circle.center.y, abs=1e-9)
            assert k.radius * CFG.stride == pytest.approx(circle.radius,
                                                          abs=1e-9)

    def test_offsets_in_unit_interval(self):
        rng = np.random.default_rng(0)
        gt = [c(rng.uniform(0, 64), rng.uniform(0, 64), 2) for _ in range(20)]
        t = encode(gt, CFG)
        for k in t.keypoints:
            assert 0.0 <= k.offset_x < 1.0
            assert 0.0 <= k.offset_y < 1.0

    def test_heatmap_invariant_under_reordering(self):
        gt = [c(10.5, 13.0, 6), c(22.0, 17.5, 10), c(40.0, 40.0, 7)]
        a = encode(gt, CFG)
        b = encode(gt[::-1], CFG)
        assert np.array_equal(a.heatmap, b.heatmap)

    def test_radius_and_offset_maps_at_keypoints(self):
        gt = [c(21.0, 17.0, 10)]
        t = encode(gt, CFG)
        k = t.keypoints[0]
        assert t.radius_map[k.cell_y, k.cell_x] == 2.5
        assert t.offset_map[0, k.cell_y, k.cell_x] == k.offset_x
        assert t.offset_map[1, k.cell_y, k.cell_x] == k.offset_y

    def test_center_outside_image_rejected_with_listing(self):
        gt = [c(10, 10, 2), c(70, 10, 2), c(10, -1, 2)]
        with pytest.raises(EncodeError) as err:
            encode(gt, CFG)
        assert "object 1" in str(err.value)
        assert "object 2" in str(err.value)

    def test_bad_category_rejected(self):
        with pytest.raises(EncodeError):
            encode([c(10, 10, 2, category=1)], CFG)

    def test_per_class_channels(self):
        cfg = EncoderConfig(input_w=64, input_h=64, stride=4, num_classes=2,
                            sigma_policy=FixedSigma(1.0))
        t = encode([c(20, 20, 4, category=1)], cfg)
        assert t.heatmap[0].max() == 0.0
        assert t.heatmap[1].max() == 1.0

    @given(st.floats(0, 63.999), st.floats(0, 63.999), st.floats(0.5, 20))
    def test_roundtrip_property(self, x, y, r):
        t = encode([c(x, y, r)], CFG)
        k = t.keypoints[0]
        assert (k.cell_x + k.offset_x) * 4 == pytest.approx(x, abs=1e-9)
        assert (k.cell_y + k.offset_y) * 4 == pytest.approx(y, abs=1e-9)
        assert k.radius * 4 == pytest.approx(r, abs=1e-9)
