"""Conditional mean/variance estimation against cell-level oracles."""

import numpy as np
import pytest

from oplearn import (
    ArmMoments,
    Dataset,
    InterceptOnlyLearner,
    LinearLearner,
    build_arm_moments,
    default_variance_floor,
    estimate_conditional_means,
    estimate_conditional_variance,
)

from helpers import make_dataset


def binary_feature_dataset(rng, n=400, cell_means=((0.0, 1.0), (2.0, 5.0)), noise=0.3):
    """Two arms, one binary feature; cell_means[a][x] is the mean of cell (a, x)."""
    x = rng.integers(0, 2, n)
    actions = rng.integers(0, 2, n)
    actions[:2] = (0, 1)
    means = np.array(cell_means, dtype=float)[actions, x]
    outcomes = means + noise * rng.standard_normal(n)
    return Dataset(
        outcomes=outcomes, actions=actions, features=x[:, None].astype(float), n_actions=2
    )


class TestConditionalMeans:
    def test_noiseless_arm_imputes_counterfactually(self):
        rng = np.random.default_rng(0)
        n = 60
        x = rng.standard_normal(n)
        actions = np.arange(n) % 2
        outcomes = np.where(actions == 0, 1.0 + x, 10.0 - 2.0 * x)
        d = Dataset(outcomes=outcomes, actions=actions, features=x[:, None], n_actions=2)
        mu = estimate_conditional_means(d)
        # every unit gets the arm-0 prediction, observed under arm 0 or not
        assert np.abs(mu[:, 0] - (1.0 + x)).max() < 1e-8
        assert np.abs(mu[:, 1] - (10.0 - 2.0 * x)).max() < 1e-8

    def test_intercept_only_repeats_arm_mean(self):
        d = make_dataset(np.random.default_rng(1), n=50, m=2, p=1)
        mu = estimate_conditional_means(d, InterceptOnlyLearner())
        for a in range(2):
            arm_mean = d.outcomes[d.actions == a].mean()
            assert np.allclose(mu[:, a], arm_mean)

    def test_matches_cell_mean_oracle_on_saturated_design(self):
        rng = np.random.default_rng(2)
        d = binary_feature_dataset(rng)
        mu = estimate_conditional_means(d, LinearLearner())
        x = d.features[:, 0].astype(int)
        for a in range(2):
            for cell in (0, 1):
                rows = (d.actions == a) & (x == cell)
                oracle = d.outcomes[rows].mean()
                predicted = mu[x == cell, a]
                assert np.abs(predicted - oracle).max() < 1e-8

    def test_training_rows_average_to_arm_mean(self):
        d = make_dataset(np.random.default_rng(3), n=90, m=3, p=2)
        mu = estimate_conditional_means(d)
        for a in range(3):
            rows = d.actions == a
            assert np.isclose(mu[rows, a].mean(), d.outcomes[rows].mean(), atol=1e-8)

    def test_requires_validated_dataset(self):
        rng = np.random.default_rng(4)
        actions = np.array([0] * 38 + [1] * 2)
        d = Dataset(
            outcomes=rng.random(40),
            actions=actions,
            features=rng.standard_normal((40, 3)),
            n_actions=2,
        )
        with pytest.raises(ValueError, match="validation"):
            estimate_conditional_means(d)


class TestConditionalVariance:
    def test_plugin_arithmetic(self):
        # arm 0 outcomes alternate between 1 and 7: E[Y]=4, E[Y^2]=25, var=9
        outcomes = np.array([1.0, 7.0, 1.0, 7.0, 1.0, 7.0, 2.0, 3.0, 4.0, 5.0])
        actions = np.array([0, 0, 0, 0, 0, 0, 1, 1, 1, 1])
        d = Dataset(
            outcomes=outcomes,
            actions=actions,
            features=np.zeros((10, 1)),
            n_actions=2,
        )
        var = estimate_conditional_variance(d, InterceptOnlyLearner(), 1e-10)
        assert np.allclose(var.sigma2[:, 0], 9.0)
        assert np.allclose(var.sigma[:, 0], 3.0)

    def test_constant_arm_clamps_to_floor(self):
        outcomes = np.array([5.0] * 6 + [1.0, 2.0, 3.0, 4.0])
        actions = np.array([0] * 6 + [1] * 4)
        d = Dataset(
            outcomes=outcomes,
            actions=actions,
            features=np.zeros((10, 1)),
            n_actions=2,
        )
        var = estimate_conditional_variance(d, InterceptOnlyLearner(), 1e-8)
        assert var.clamped[:, 0].all()
        assert np.allclose(var.sigma2[:, 0], 1e-8)
        assert var.n_clamped >= 10

    def test_matches_cell_variance_oracle_heteroskedastic(self):
        # Y = X + (1 + X) * eps with X in {0, 1}: cell X=1 has variance 4
        rng = np.random.default_rng(5)
        n = 50_000
        x = rng.integers(0, 2, n).astype(float)
        actions = rng.integers(0, 2, n)
        actions[:2] = (0, 1)
        outcomes = x + (1.0 + x) * rng.standard_normal(n)
        d = Dataset(outcomes=outcomes, actions=actions, features=x[:, None], n_actions=2)
        var = estimate_conditional_variance(d, LinearLearner(), 1e-10)
        for a in range(2):
            cell = (d.actions == a) & (x == 1.0)
            oracle = np.var(outcomes[cell])
            estimate = var.sigma2[x == 1.0, a][0]
            assert abs(estimate - oracle) / oracle < 0.05

    def test_floor_must_be_positive(self):
        d = make_dataset(np.random.default_rng(6), n=50)
        with pytest.raises(ValueError, match="variance_floor"):
            estimate_conditional_variance(d, LinearLearner(), 0.0)


class TestBuildArmMoments:
    def test_composition_matches_parts(self):
        d = make_dataset(np.random.default_rng(7), n=80, m=3, p=2)
        floor = 1e-8
        m = build_arm_moments(d, LinearLearner(), floor)
        mu = estimate_conditional_means(d, LinearLearner())
        var = estimate_conditional_variance(d, LinearLearner(), floor)
        assert np.array_equal(m.mu, mu)
        assert np.array_equal(m.sigma2, var.sigma2)
        assert np.array_equal(m.sigma, var.sigma)

    def test_invariants_on_random_instances(self):
        for seed in range(5):
            d = make_dataset(np.random.default_rng(seed), n=70, m=2, p=2)
            m = build_arm_moments(d)
            assert m.sigma2.min() >= m.variance_floor
            assert np.abs(m.sigma - np.sqrt(m.sigma2)).max() <= 1e-12
            assert np.isfinite(m.mu).all()

    def test_affine_shift_moves_mu_not_sigma(self):
        d = make_dataset(np.random.default_rng(8), n=100, m=2, p=2, noise=1.0)
        floor = 1e-12
        base = build_arm_moments(d, LinearLearner(), floor)
        shifted = build_arm_moments(d.with_outcomes(d.outcomes + 5.0), LinearLearner(), floor)
        assert np.abs(shifted.mu - base.mu - 5.0).max() < 1e-8
        keep = ~(base.clamped | shifted.clamped)
        assert np.abs(shifted.sigma2[keep] - base.sigma2[keep]).max() < 1e-7

    def test_positive_scaling_scales_mu_and_sigma(self):
        d = make_dataset(np.random.default_rng(9), n=100, m=2, p=2, noise=1.0)
        floor = 1e-12
        base = build_arm_moments(d, LinearLearner(), floor)
        scaled = build_arm_moments(d.with_outcomes(3.0 * d.outcomes), LinearLearner(), floor)
        keep = ~(base.clamped | scaled.clamped)
        assert np.abs(scaled.mu - 3.0 * base.mu).max() < 1e-8
        assert np.abs(scaled.sigma[keep] - 3.0 * base.sigma[keep]).max() < 1e-6

    def test_default_floor_tracks_outcome_scale(self):
        out = np.array([1.0, 2.0, 3.0, 4.0])
        assert default_variance_floor(out) == pytest.approx(1e-8 * np.var(out))
        assert default_variance_floor(np.ones(5)) == pytest.approx(1e-8)

    def test_moments_reject_bad_sigma(self):
        with pytest.raises(ValueError, match="square root"):
            ArmMoments(
                mu=np.ones((2, 2)),
                sigma2=np.ones((2, 2)),
                sigma=2.0 * np.ones((2, 2)),
                variance_floor=1e-8,
                clamped=np.zeros((2, 2), dtype=bool),
            )
