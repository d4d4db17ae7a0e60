import numpy as np
import pytest

from superevent.losses import (
    DescriptorTarget,
    DetectorTarget,
    LossConfig,
    descriptor_loss,
    detector_loss,
    total_loss,
)


def finite_difference(fun, x, eps=1e-6):
    grad = np.zeros_like(x)
    flat, gf = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fun()
        flat[i] = orig - eps
        lo = fun()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return grad


def rel_err(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return np.abs(analytic - numeric).max() / scale


class TestDetectorLoss:
    def test_aligned_logits_drive_loss_to_zero(self):
        target = DetectorTarget(np.array([[3, 64], [10, 0]]))
        logits = np.zeros((2, 2, 65))
        for h in range(2):
            for w in range(2):
                logits[h, w, target.classes[h, w]] = 100.0
        loss, _ = detector_loss(logits, target)
        assert loss < 1e-12

    def test_uniform_logits_give_ln65(self):
        target = DetectorTarget(np.array([[0, 7], [64, 33]]))
        loss, _ = detector_loss(np.zeros((2, 2, 65)), target)
        assert loss == pytest.approx(np.log(65), abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            logits = rng.normal(size=(2, 3, 65))
            target = DetectorTarget(rng.integers(0, 65, (2, 3)))
            _, grad = detector_loss(logits, target)
            numeric = finite_difference(lambda: detector_loss(logits, target)[0], logits)
            assert rel_err(grad, numeric) < 1e-5

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            detector_loss(np.zeros((2, 2, 64)), DetectorTarget(np.zeros((2, 2), int)))
        with pytest.raises(ValueError):
            detector_loss(np.zeros((2, 2, 65)), DetectorTarget(np.zeros((3, 2), int)))


def single_pair_setup(d_target, dim=4):
    """Two 1x1 grids whose normalized similarity equals d_target."""
    a = np.zeros((1, 1, dim))
    b = np.zeros((1, 1, dim))
    a[0, 0, 0] = 2.0  # non-unit raw norm exercises the normalization path
    b[0, 0, 0] = d_target * 3.0
    b[0, 0, 1] = np.sqrt(1 - d_target**2) * 3.0
    target = DescriptorTarget(np.array([[0, 0, 0, 0]]), np.ones((1, 1), bool),
                              np.ones((1, 1), bool))
    return a, b, target


class TestDescriptorLoss:
    def test_matched_identical_pair_costs_nothing(self):
        a, b, target = single_pair_setup(1.0)
        loss, g0, g1 = descriptor_loss(a, b, target)
        assert loss == 0.0
        assert not g0.any() and not g1.any()

    def test_matched_orthogonal_pair_costs_half(self):
        a, b, target = single_pair_setup(0.0)
        loss, _, _ = descriptor_loss(a, b, target)
        assert loss == pytest.approx(0.5, abs=1e-12)  # c_d * c_p

    def test_unmatched_pair_at_margin_costs_nothing(self):
        # d sits on the hinge kink; rounding may land an ulp past it, so the
        # "exactly free" claim holds only to fp precision
        a, b, _ = single_pair_setup(0.2)
        target = DescriptorTarget(np.zeros((0, 4)), np.ones((1, 1), bool),
                                  np.ones((1, 1), bool))
        loss, _, _ = descriptor_loss(a, b, target)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_unmatched_similar_pair_is_penalized(self):
        a, b, _ = single_pair_setup(0.7)
        target = DescriptorTarget(np.zeros((0, 4)), np.ones((1, 1), bool),
                                  np.ones((1, 1), bool))
        loss, _, _ = descriptor_loss(a, b, target)
        assert loss == pytest.approx(0.5, abs=1e-9)  # d - c_n

    def test_unlabeled_cells_get_zero_gradient(self):
        rng = np.random.default_rng(1)
        d0 = rng.normal(size=(3, 3, 5))
        d1 = rng.normal(size=(3, 3, 5))
        lab0 = np.zeros((3, 3), bool)
        lab1 = np.zeros((3, 3), bool)
        lab0[0, 0] = lab0[1, 2] = True
        lab1[2, 1] = lab1[0, 2] = True
        target = DescriptorTarget(np.array([[0, 0, 2, 1]]), lab0, lab1)
        _, g0, g1 = descriptor_loss(d0, d1, target)
        assert not g0[~lab0].any() and not g1[~lab1].any()

    def test_pair_on_unlabeled_cell_rejected(self):
        lab = np.zeros((2, 2), bool)
        lab[0, 0] = True
        with pytest.raises(ValueError, match="unlabeled"):
            DescriptorTarget(np.array([[1, 1, 0, 0]]), lab, lab)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(2)
        d0 = rng.normal(size=(2, 3, 6))
        d1 = rng.normal(size=(2, 3, 6))
        lab0 = rng.random((2, 3)) < 0.7
        lab1 = rng.random((2, 3)) < 0.7
        lab0[0, 0] = lab1[1, 1] = True
        target = DescriptorTarget(np.array([[0, 0, 1, 1]]), lab0, lab1)
        loss_ab, ga0, ga1 = descriptor_loss(d0, d1, target)
        loss_ba, gb1, gb0 = descriptor_loss(d1, d0, target.transposed())
        assert loss_ab == pytest.approx(loss_ba, rel=1e-12)
        np.testing.assert_allclose(ga0, gb0, rtol=1e-12)
        np.testing.assert_allclose(ga1, gb1, rtol=1e-12)

    def test_gradients_match_finite_differences(self):
        from superevent.selftest import random_descriptor_instance
        rng = np.random.default_rng(3)
        cfg = LossConfig()
        for _ in range(5):
            d0, d1, target = random_descriptor_instance(rng, cfg=cfg)
            _, g0, g1 = descriptor_loss(d0, d1, target, cfg)
            n0 = finite_difference(lambda: descriptor_loss(d0, d1, target, cfg)[0], d0)
            n1 = finite_difference(lambda: descriptor_loss(d0, d1, target, cfg)[0], d1)
            assert rel_err(g0, n0) < 1e-5
            assert rel_err(g1, n1) < 1e-5

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(4)
        from superevent.selftest import random_descriptor_instance
        for _ in range(10):
            d0, d1, target = random_descriptor_instance(rng)
            loss, _, _ = descriptor_loss(d0, d1, target)
            assert loss >= 0.0


class TestTotalLoss:
    def test_weighted_sum(self):
        assert total_loss(0.0, 0.0, 1.0, 10.0) == 10.0

    def test_all_zero(self):
        assert total_loss(0.0, 0.0, 0.0) == 0.0

    def test_linear_in_descriptor_part(self):
        base = total_loss(0.3, 0.4, 1.0, 10.0)
        assert total_loss(0.3, 0.4, 2.0, 10.0) - base == pytest.approx(10.0)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="exceed"):
            LossConfig(c_p=0.1, c_n=0.2)
        with pytest.raises(ValueError, match="positive"):
            LossConfig(c_lambda=-1.0)
        cfg = LossConfig()
        assert (cfg.c_lambda, cfg.c_d, cfg.c_p, cfg.c_n) == (10.0, 0.5, 1.0, 0.2)
