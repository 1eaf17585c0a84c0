import numpy as np
import pytest

from exactopt.mvn_orthant import philox_rng
from exactopt.surrogate import HingeConfig, cross_entropy_batch, hinge_batch


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss, _ = cross_entropy_batch(np.zeros((3, 4)), [1, 2, 3])
        assert loss == pytest.approx(np.log(4.0), abs=1e-12)

    def test_saturated_logits(self):
        logits = np.zeros((2, 3))
        logits[0, 1] = 30.0
        logits[1, 0] = 30.0
        loss, _ = cross_entropy_batch(logits, [2, 1])
        assert loss <= 1e-12

    def test_gradient_rows_sum_to_zero(self):
        logits = philox_rng(0, 0).normal(0, 2, (5, 6))
        _, grad = cross_entropy_batch(logits, [1, 2, 3, 4, 5])
        assert np.max(np.abs(grad.sum(axis=1))) < 1e-12

    def test_shift_invariance(self):
        logits = philox_rng(1, 0).normal(0, 1, (4, 3))
        labels = [3, 1, 2, 2]
        base, _ = cross_entropy_batch(logits, labels)
        shifted, _ = cross_entropy_batch(logits + 7.0, labels)
        assert shifted == pytest.approx(base, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        logits = philox_rng(2, 0).normal(0, 1, (3, 4))
        labels = [2, 4, 1]
        _, grad = cross_entropy_batch(logits, labels)
        h = 1e-6
        for i in range(3):
            for j in range(4):
                bump = np.zeros_like(logits)
                bump[i, j] = h
                up, _ = cross_entropy_batch(logits + bump, labels)
                dn, _ = cross_entropy_batch(logits - bump, labels)
                fd = (up - dn) / (2 * h)
                assert grad[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_binary_threshold_derivative_vanishes_near_its_optimum(self):
        # Bias-only binary model on the three-point data; the derivative of
        # the loss in the threshold crosses zero near 0.7.
        x = np.array([-0.25, 0.0, 0.25])
        labels = [1, 1, 2]

        def dloss(b):
            logits = np.stack([np.zeros(3), x - b], axis=1)
            _, grad = cross_entropy_batch(logits, labels)
            return -grad[:, 1].sum() * 3  # total-loss derivative in b

        lo, hi = 0.6, 0.8
        assert dloss(lo) < 0 < dloss(hi)
        for _ in range(60):
            mid = (lo + hi) / 2
            if dloss(mid) < 0:
                lo = mid
            else:
                hi = mid
        assert abs(dloss((lo + hi) / 2)) <= 1e-3
        assert (lo + hi) / 2 == pytest.approx(0.7, abs=0.01)


class TestHinge:
    def test_margin_satisfied(self):
        logits = np.array([[0.0, 5.0, 1.0]])
        loss, grad = hinge_batch(logits, [2], HingeConfig(margin=1.0))
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_active_binary_constraint(self):
        loss, grad = hinge_batch(np.zeros((1, 2)), [1], HingeConfig(margin=1.0))
        assert loss == pytest.approx(1.0)
        assert np.allclose(grad, [[-1.0, 1.0]])

    def test_margin_must_be_positive(self):
        with pytest.raises(ValueError):
            HingeConfig(margin=0.0)

    def test_gradient_matches_finite_differences_away_from_kinks(self):
        logits = philox_rng(3, 0).normal(0, 2, (4, 5))
        labels = [1, 3, 5, 2]
        cfg = HingeConfig(margin=0.9)
        _, grad = hinge_batch(logits, labels, cfg)
        h = 1e-6
        for i in range(4):
            for j in range(5):
                bump = np.zeros_like(logits)
                bump[i, j] = h
                up, _ = hinge_batch(logits + bump, labels, cfg)
                dn, _ = hinge_batch(logits - bump, labels, cfg)
                fd = (up - dn) / (2 * h)
                assert grad[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_piecewise_linearity_of_active_terms(self):
        logits = np.array([[0.0, 2.0, 3.0]])
        cfg = HingeConfig(margin=1.0)
        loss1, _ = hinge_batch(logits, [1], cfg)
        loss2, _ = hinge_batch(2 * logits, [1], cfg)
        # violations are margin + 2 and margin + 3, doubling the logits turns
        # them into margin + 4 and margin + 6
        assert loss1 == pytest.approx(7.0)
        assert loss2 == pytest.approx(12.0)

    def test_binary_threshold_plateau(self):
        x = np.array([-0.25, 0.0, 0.25])
        labels = [1, 1, 2]
        grid = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.01), 10)
        losses = []
        for b in grid:
            logits = np.stack([np.zeros(3), x - b], axis=1)
            loss, _ = hinge_batch(logits, labels, HingeConfig(margin=1.0))
            losses.append(loss)
        losses = np.array(losses)
        plateau = grid[np.abs(losses - losses.min()) < 1e-9]
        assert plateau.min() == pytest.approx(0.75, abs=1e-9)
        assert plateau.max() == pytest.approx(1.0, abs=1e-9)
