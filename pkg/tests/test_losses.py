import math

import numpy as np
import pytest

from circledet import (
    Circle,
    EncoderConfig,
    FixedSigma,
    Keypoint,
    LossWeights,
    OutputMaps,
    Point2,
    encode,
    focal_loss,
    offset_loss,
    radius_loss,
    squash,
    total_loss,
)
from circledet.losses import SQUASH_EPS
import oracles


def logit(p):
    return math.log(p / (1 - p))


def single_cell(value, target):
    logits = np.full((1, 1, 1), logit(value))
    y = np.full((1, 1, 1), float(target))
    return logits, y


class TestFocalLoss:
    def test_perfect_prediction_near_zero(self):
        logits, y = single_cell(1 - SQUASH_EPS, 1.0)
        loss, _ = focal_loss(logits, y, 2.0, 4.0)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_positive_half_confidence(self):
        # -(1 - 0.5)^2 * ln 0.5 = 0.25 * ln 2
        logits, y = single_cell(0.5, 1.0)
        loss, _ = focal_loss(logits, y, 2.0, 4.0)
        assert loss == pytest.approx(0.25 * math.log(2), rel=1e-12)

    def test_negative_half_confidence_with_perfect_positive(self):
        # one perfect positive (N = 1) plus one Y=0 cell at 0.5:
        # (1-0)^4 * 0.5^2 * ln(1-0.5) gives the same 0.25 * ln 2
        logits = np.array([[[logit(1 - SQUASH_EPS), logit(0.5)]]])
        y = np.array([[[1.0, 0.0]]])
        loss, _ = focal_loss(logits, y, 2.0, 4.0)
        assert loss == pytest.approx(0.25 * math.log(2), rel=1e-9)

    def test_penalty_reduction_on_shoulder(self):
        # Y = 0.5 shoulder cell weighted by (1 - 0.5)^4 = 1/16
        logits = np.array([[[logit(1 - SQUASH_EPS), logit(0.5)]]])
        y = np.array([[[1.0, 0.5]]])
        loss, _ = focal_loss(logits, y, 2.0, 4.0)
        assert loss == pytest.approx(0.25 * math.log(2) / 16, rel=1e-9)

    def test_no_positives_rejected(self):
        logits, y = single_cell(0.5, 0.0)
        with pytest.raises(ValueError):
            focal_loss(logits, y, 2.0, 4.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            focal_loss(np.zeros((1, 2, 2)), np.ones((1, 3, 3)), 2.0, 4.0)

    def test_nonnegative_and_zero_iff_extreme(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            logits = rng.normal(0, 3, (1, 4, 4))
            y = np.zeros((1, 4, 4))
            y[0, 1, 2] = 1.0
            loss, _ = focal_loss(logits, y, 2.0, 4.0)
            assert loss >= 0.0
        perfect = np.where(y == 1.0, 40.0, -40.0)
        loss, _ = focal_loss(perfect, y, 2.0, 4.0)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_monotone_toward_one_at_positive(self):
        y = np.ones((1, 1, 1))
        values = np.linspace(-3, 8, 40)
        losses = [focal_loss(np.full((1, 1, 1), v), y, 2.0, 4.0)[0]
                  for v in values]
        assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


KPS = [
    Keypoint(0, 1, 2, 0.2, 0.9, 4.0),
    Keypoint(0, 3, 0, 0.5, 0.5, 2.5),
    Keypoint(0, 0, 3, 0.0, 0.25, 6.0),
]


class TestRadiusLoss:
    def test_zero_at_exact_prediction(self):
        pred = np.zeros((4, 4))
        for k in KPS:
            pred[k.cell_y, k.cell_x] = k.radius
        loss, grad = radius_loss(pred, KPS)
        assert loss == 0.0
        assert np.all(grad == 0.0)  # subgradient at 0 is 0

    def test_single_unit_residual(self):
        pred = np.zeros((4, 4))
        k = Keypoint(0, 1, 2, 0.0, 0.0, 4.0)
        pred[2, 1] = 5.0
        loss, _ = radius_loss(pred, [k])
        assert loss == 1.0

    def test_mean_absolute_residuals(self):
        pred = np.zeros((4, 4))
        residuals = (1.0, -2.0, 0.5)
        for k, r in zip(KPS, residuals):
            pred[k.cell_y, k.cell_x] = k.radius + r
        loss, _ = radius_loss(pred, KPS)
        assert loss == pytest.approx(3.5 / 3, rel=1e-12)

    def test_gradient_only_at_keypoints(self):
        pred = np.full((4, 4), 9.0)
        _, grad = radius_loss(pred, KPS)
        mask = np.zeros((4, 4), dtype=bool)
        for k in KPS:
            mask[k.cell_y, k.cell_x] = True
        assert np.all(grad[~mask] == 0.0)
        assert np.all(grad[mask] != 0.0)

    def test_empty_keypoints_rejected(self):
        with pytest.raises(ValueError):
            radius_loss(np.zeros((2, 2)), [])

    def test_permutation_invariant(self):
        pred = np.arange(16, dtype=float).reshape(4, 4)
        a, _ = radius_loss(pred, KPS)
        b, _ = radius_loss(pred, KPS[::-1])
        assert a == b


class TestOffsetLoss:
    def test_zero_at_exact_prediction(self):
        pred = np.zeros((2, 4, 4))
        for k in KPS:
            pred[0, k.cell_y, k.cell_x] = k.offset_x
            pred[1, k.cell_y, k.cell_x] = k.offset_y
        loss, grad = offset_loss(pred, KPS)
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_l1_over_both_coordinates(self):
        k = Keypoint(0, 1, 2, 0.2, 0.9, 4.0)
        pred = np.zeros((2, 4, 4))
        pred[0, 2, 1] = 0.5
        pred[1, 2, 1] = 0.5
        loss, _ = offset_loss(pred, [k])
        assert loss == pytest.approx(0.3 + 0.4, rel=1e-12)

    def test_mean_normalization(self):
        k = Keypoint(0, 1, 2, 0.2, 0.9, 4.0)
        k2 = Keypoint(0, 3, 3, 0.2, 0.9, 4.0)
        pred = np.zeros((2, 4, 4))
        pred[0, 2, 1] = 0.5
        pred[1, 2, 1] = 0.5
        pred[0, 3, 3] = 0.5
        pred[1, 3, 3] = 0.5
        one, _ = offset_loss(pred, [k])
        two, _ = offset_loss(pred, [k, k2])
        assert one == pytest.approx(two, rel=1e-12)

    def test_empty_keypoints_rejected(self):
        with pytest.raises(ValueError):
            offset_loss(np.zeros((2, 2, 2)), [])


class TestTotalLoss:
    def _fixture(self):
        cfg = EncoderConfig(32, 32, 4, sigma_policy=FixedSigma(1.5))
        gt = [Circle(Point2(10.6, 13.2), 6.0),
              Circle(Point2(24.0, 22.5), 9.0)]
        return encode(gt, cfg)

    def test_zero_when_all_components_zero(self):
        targets = self._fixture()
        logits = np.where(targets.heatmap == 1.0, logit(1 - SQUASH_EPS),
                          logit(SQUASH_EPS))
        maps = OutputMaps(logits, targets.radius_map.copy(),
                          targets.offset_map.copy())
        report = total_loss(maps, targets)
        assert report.l_total == pytest.approx(0.0, abs=1e-10)

    def test_weighted_combination(self):
        # l_total = l_k + 0.1 * l_radius + 1.0 * l_offset (fixed weights)
        targets = self._fixture()
        rng = np.random.default_rng(5)
        maps = OutputMaps(rng.normal(0, 1, targets.heatmap.shape),
                          rng.normal(0, 1, targets.radius_map.shape),
                          rng.normal(0, 1, targets.offset_map.shape))
        report = total_loss(maps, targets)
        assert report.l_total == pytest.approx(
            report.l_heatmap + 0.1 * report.l_radius + 1.0 * report.l_offset,
            rel=1e-12)

    def test_default_weights_example(self):
        assert LossWeights() == LossWeights(lambda_radius=0.1, lambda_off=1.0,
                                            alpha=2.0, beta=4.0)
        assert 0.2 + 0.1 * 1.0 + 1.0 * 0.7 == pytest.approx(1.0)

    def test_gradient_is_weighted_sum(self):
        targets = self._fixture()
        rng = np.random.default_rng(6)
        maps = OutputMaps(rng.normal(0, 1, targets.heatmap.shape),
                          rng.normal(0, 1, targets.radius_map.shape),
                          rng.normal(0, 1, targets.offset_map.shape))
        w = LossWeights(lambda_radius=0.3, lambda_off=2.0)
        report = total_loss(maps, targets, w)
        _, g_r = radius_loss(maps.radius, targets.keypoints)
        _, g_o = offset_loss(maps.offset, targets.keypoints)
        _, g_k = focal_loss(maps.heatmap_logits, targets.heatmap, w.alpha,
                            w.beta)
        np.testing.assert_allclose(report.grad_radius, 0.3 * g_r)
        np.testing.assert_allclose(report.grad_offset, 2.0 * g_o)
        np.testing.assert_allclose(report.grad_heatmap_logits, g_k)


def _random_fixture(seed, shape=(1, 8, 8), n_kp=5):
    rng = np.random.default_rng(seed)
    c, h, w = shape
    target = np.zeros(shape)
    cells = rng.choice(h * w, size=n_kp, replace=False)
    keypoints = []
    for cell in cells:
        cy, cx = divmod(int(cell), w)
        cat = int(rng.integers(0, c))
        target[cat, cy, cx] = 1.0
        keypoints.append(Keypoint(cat, cx, cy, float(rng.uniform(0, 1)),
                                  float(rng.uniform(0, 1)),
                                  float(rng.uniform(0.5, 8))))
        # Gaussian shoulder around the keypoint
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = cy + dy, cx + dx
                if 0 <= yy < h and 0 <= xx < w and target[cat, yy, xx] != 1.0:
                    target[cat, yy, xx] = max(
                        target[cat, yy, xx],
                        math.exp(-(dx * dx + dy * dy) / 2.0))
    maps = OutputMaps(rng.normal(0, 1.5, shape),
                      rng.normal(2, 2, (h, w)),
                      rng.normal(0, 0.7, (2, h, w)))
    return maps, target, keypoints


class TestGradients:
    """Analytic gradients vs central finite differences."""

    def _check(self, analytic, numeric):
        # relative error <= 1e-5, falling back to absolute <= 1e-8 where the
        # derivative is near zero
        diff = np.abs(analytic - numeric)
        rel = diff / np.maximum(np.abs(numeric), 1e-300)
        assert np.all((diff <= 1e-8) | (rel <= 1e-5))

    @pytest.mark.parametrize("seed", range(5))
    def test_focal_gradient(self, seed):
        maps, target, _ = _random_fixture(seed)
        _, grad = focal_loss(maps.heatmap_logits, target, 2.0, 4.0)
        (num,) = oracles.central_difference(
            lambda arrs: focal_loss(arrs[0], target, 2.0, 4.0)[0],
            [maps.heatmap_logits])
        self._check(grad, num)

    @pytest.mark.parametrize("seed", range(5))
    def test_radius_gradient(self, seed):
        maps, _, kps = _random_fixture(seed)
        _, grad = radius_loss(maps.radius, kps)
        (num,) = oracles.central_difference(
            lambda arrs: radius_loss(arrs[0], kps)[0], [maps.radius])
        self._check(grad, num)

    @pytest.mark.parametrize("seed", range(5))
    def test_offset_gradient(self, seed):
        maps, _, kps = _random_fixture(seed)
        _, grad = offset_loss(maps.offset, kps)
        (num,) = oracles.central_difference(
            lambda arrs: offset_loss(arrs[0], kps)[0], [maps.offset])
        self._check(grad, num)

    @pytest.mark.parametrize("seed", range(3))
    def test_total_gradient(self, seed):
        maps, target, kps = _random_fixture(seed)
        cfg = EncoderConfig(32, 32, 4, sigma_policy=FixedSigma(1.0))
        from circledet.encode import HeatmapTargets
        targets = HeatmapTargets(target, maps.offset * 0, maps.radius * 0,
                                 kps, cfg)
        report = total_loss(maps, targets)

        def f(arrs):
            m = OutputMaps(arrs[0], arrs[1], arrs[2])
            return total_loss(m, targets).l_total

        num = oracles.central_difference(
            f, [maps.heatmap_logits, maps.radius, maps.offset])
        self._check(report.grad_heatmap_logits, num[0])
        self._check(report.grad_radius, num[1])
        self._check(report.grad_offset, num[2])


class TestSquash:
    def test_range_clamped(self):
        z = np.array([-100.0, -1.0, 0.0, 1.0, 100.0])
        y = squash(z)
        assert y.min() == SQUASH_EPS
        assert y.max() == 1 - SQUASH_EPS
        assert y[2] == 0.5
