import math

import numpy as np
import pytest

from bopref.errors import BoundaryError, ContractError
from bopref.utility import (
    ExponentialUtility,
    FiniteUniformPrior,
    LinearUtility,
    OrderedSimplexPrior,
    QuadraticUtility,
    SoftmaxLinearUtility,
    ThresholdUtility,
    UniformBoxPrior,
    family_from_config,
    prior_from_config,
    prior_sample,
)

ALL_FAMILIES = [
    (LinearUtility(3), np.array([0.2, 0.5, 0.3])),
    (LinearUtility(2, tradeoff=True), np.array([0.7])),
    (QuadraticUtility(3), np.array([0.1, -0.4, 0.8])),
    (ExponentialUtility(3), np.array([0.3])),
    (SoftmaxLinearUtility(4), np.array([0.4, 0.3, 0.2, 0.1])),
]


class TestValues:
    def test_linear_tradeoff_equal_attributes(self):
        fam = LinearUtility(2, tradeoff=True)
        assert fam.value([1.0, 1.0], [0.5]) == pytest.approx(1.0, abs=0.0)

    def test_linear_general_dot_product(self):
        fam = LinearUtility(3)
        assert fam.value([1.0, 2.0, 3.0], [0.5, 0.25, 0.25]) == pytest.approx(1.75)

    def test_quadratic_zero_at_ideal_negative_elsewhere(self, rng):
        fam = QuadraticUtility(3)
        theta = np.array([0.1, 0.2, 0.3])
        assert fam.value(theta, theta) == 0.0
        for _ in range(20):
            y = theta + rng.normal(0, 1, 3)
            if not np.allclose(y, theta):
                assert fam.value(y, theta) < 0

    def test_exponential_spot_value(self):
        fam = ExponentialUtility(3)
        expected = (1.0 - math.exp(-0.1)) / 0.1
        got = fam.value([1.0, 1.0, 1.0], [0.1])
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.951626, abs=1e-6)

    def test_softmax_uniform_attributes(self):
        fam = SoftmaxLinearUtility(5)
        assert fam.value(np.zeros(5), [1, 0, 0, 0, 0]) == pytest.approx(0.2)

    def test_threshold_feasible_and_infeasible(self):
        fam = ThresholdUtility()
        assert fam.value([3.0, 0.5], [0.2]) == 3.0
        assert fam.value([3.0, 0.1], [0.2]) == -np.inf
        assert fam.feasible([3.0, 0.2], [0.2])  # boundary counts as feasible

    def test_theta_outside_family_domain_rejected(self):
        with pytest.raises(ContractError):
            ExponentialUtility(2).value([0.0, 0.0], [-0.1])
        with pytest.raises(ContractError):
            LinearUtility(3).value([0.0] * 3, [0.1, 0.2])  # wrong length

    def test_batch_directions_agree(self, rng):
        for fam, theta in ALL_FAMILIES:
            Y = rng.normal(0, 1, (6, fam.num_attributes))
            batch = fam.value_batch(Y, theta)
            singles = [fam.value(y, theta) for y in Y]
            np.testing.assert_allclose(batch, singles, atol=1e-12)
        fam = QuadraticUtility(2)
        thetas = rng.normal(0, 1, (5, 2))
        y = rng.normal(0, 1, 2)
        np.testing.assert_allclose(
            fam.value_theta_batch(y, thetas),
            [fam.value(y, t) for t in thetas],
            atol=1e-12,
        )


class TestGradients:
    def test_linear_gradient_is_weights(self, rng):
        fam = LinearUtility(3)
        theta = np.array([0.2, 0.5, 0.3])
        for _ in range(5):
            np.testing.assert_array_equal(fam.grad_y(rng.normal(size=3), theta), theta)
        tr = LinearUtility(2, tradeoff=True)
        np.testing.assert_allclose(tr.grad_y([0.0, 0.0], [0.7]), [0.7, 0.3])

    def test_quadratic_stationary_at_ideal(self):
        fam = QuadraticUtility(2)
        theta = np.array([1.0, -1.0])
        np.testing.assert_array_equal(fam.grad_y(theta, theta), np.zeros(2))

    @pytest.mark.parametrize("fam,theta", ALL_FAMILIES, ids=lambda p: str(p)[:25])
    def test_gradients_match_finite_differences(self, fam, theta, rng):
        eps = 1e-6
        for _ in range(20):
            y = rng.uniform(-1.5, 1.5, fam.num_attributes)
            g = fam.grad_y(y, theta)
            for i in range(fam.num_attributes):
                e = np.zeros(fam.num_attributes)
                e[i] = eps
                fd = (fam.value(y + e, theta) - fam.value(y - e, theta)) / (2 * eps)
                assert abs(g[i] - fd) / max(abs(fd), 1e-4) <= 1e-5

    def test_threshold_gradient_rules(self):
        fam = ThresholdUtility()
        np.testing.assert_array_equal(fam.grad_y([1.0, 0.5], [0.2]), [1.0, 0.0])
        with pytest.raises(BoundaryError):
            fam.grad_y([1.0, 0.2], [0.2])
        with pytest.raises(ContractError):
            fam.grad_y([1.0, 0.0], [0.2])


class TestFamilyProperties:
    def test_linear_positive_homogeneity(self, rng):
        fam = LinearUtility(3)
        theta = rng.uniform(0, 1, 3)
        y = rng.normal(0, 1, 3)
        for c in (0.5, 2.0, 7.3):
            assert fam.value(c * y, theta) == pytest.approx(c * fam.value(y, theta))

    def test_linear_argmax_invariant_to_uniform_shift(self, rng):
        fam = LinearUtility(3)
        theta = rng.uniform(0.1, 1, 3)
        Y = rng.normal(0, 1, (10, 3))
        base = np.argmax(fam.value_batch(Y, theta))
        shifted = np.argmax(fam.value_batch(Y + 4.2, theta))
        assert base == shifted

    def test_exponential_small_theta_limit_is_mean(self, rng):
        fam = ExponentialUtility(3)
        for _ in range(10):
            y = rng.uniform(-2, 2, 3)
            assert fam.value(y, [1e-6]) == pytest.approx(np.mean(y), abs=1e-5)

    def test_threshold_monotone_in_objective(self, rng):
        fam = ThresholdUtility()
        theta = np.array([0.0])
        y1 = np.sort(rng.normal(0, 1, 20))
        vals = fam.value_batch(np.column_stack([y1, np.ones(20)]), theta)
        assert np.all(np.diff(vals) >= 0)
        # infeasible never exceeds feasible
        assert fam.value([100.0, -1.0], theta) < fam.value([-100.0, 1.0], theta)


class TestPriors:
    def test_uniform_box_mean(self):
        prior = UniformBoxPrior([0.0], [1.0])
        draws = prior.sample(np.random.default_rng(0), 10_000)
        assert 0.48 <= float(np.mean(draws)) <= 0.52

    def test_ordered_simplex_constraints(self):
        prior = OrderedSimplexPrior(5)
        draws = prior.sample(np.random.default_rng(1), 2_000)
        assert np.all(draws >= 0)
        assert np.all(np.diff(draws, axis=1) <= 1e-12)
        np.testing.assert_allclose(draws.sum(axis=1), 1.0, atol=1e-12)
        assert all(prior.contains(d) for d in draws[:50])

    def test_finite_uniform_frequencies_over_ideal_points(self):
        from bopref.problems import dtlz2_anchor_points

        pts = dtlz2_anchor_points()
        prior = FiniteUniformPrior(pts)
        draws = prior.sample(np.random.default_rng(2), 10_000)
        for p in pts:
            freq = np.mean(np.all(draws == p, axis=1))
            assert 0.10 <= freq <= 0.15

    def test_prior_sample_deterministic(self):
        prior = UniformBoxPrior([0.0, -1.0], [1.0, 1.0])
        a = prior_sample(prior, 42)
        b = prior_sample(prior, 42)
        assert np.array_equal(a, b)
        assert prior.contains(a)


class TestConfigPlumbing:
    def test_family_round_trip(self):
        fam = family_from_config({"family": "linear", "tradeoff": True}, 2)
        assert isinstance(fam, LinearUtility) and fam.tradeoff
        fam2 = family_from_config(fam.to_config(), 2)
        assert fam2 == fam
        with pytest.raises(ContractError):
            family_from_config({"family": "nope"}, 2)

    def test_prior_round_trip(self):
        prior = prior_from_config(
            {"kind": "uniform_box", "lower": [0.1], "upper": [0.5]}
        )
        assert isinstance(prior, UniformBoxPrior)
        assert prior_from_config(prior.to_config()) == prior
        with pytest.raises(ContractError):
            prior_from_config({"kind": "nope"})
