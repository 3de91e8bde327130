"""Shared builders and independent numeric oracles for the test suite."""

from __future__ import annotations

import numpy as np

from oplearn import ArmMoments, Dataset, OracleData


def gauss_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` by Gaussian elimination with partial pivoting.

    Deliberately independent of ``numpy.linalg``; used to cross-check the
    normal-equation solutions of the least-squares fitter.
    """
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = b.shape[0]
    aug = np.column_stack([a, b])
    for k in range(n):
        pivot = k + int(np.argmax(np.abs(aug[k:, k])))
        if abs(aug[pivot, k]) < 1e-13:
            raise ZeroDivisionError("singular system")
        if pivot != k:
            aug[[k, pivot]] = aug[[pivot, k]]
        aug[k] = aug[k] / aug[k, k]
        for r in range(n):
            if r != k:
                aug[r] = aug[r] - aug[r, k] * aug[k]
    return aug[:, n]


def ols_oracle(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via the elimination oracle."""
    design = np.column_stack([np.ones(len(targets)), features])
    return gauss_solve(design.T @ design, design.T @ targets)


def make_dataset(
    rng: np.random.Generator,
    n: int = 120,
    m: int = 2,
    p: int = 2,
    noise: float = 0.5,
) -> Dataset:
    """Random dataset with linear arm means and every arm guaranteed present."""
    features = rng.standard_normal((n, p))
    actions = rng.integers(0, m, n)
    actions[:m] = np.arange(m)
    coeffs = rng.normal(size=(m, p + 1))
    design = np.column_stack([np.ones(n), features])
    outcomes = (design * coeffs[actions]).sum(axis=1) + noise * rng.standard_normal(n)
    return Dataset(outcomes=outcomes, actions=actions, features=features, n_actions=m)


def make_moments(mu: np.ndarray, sigma: np.ndarray) -> ArmMoments:
    """ArmMoments straight from given matrices, with a tiny floor and no clamping."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return ArmMoments(
        mu=mu,
        sigma2=sigma**2,
        sigma=sigma,
        variance_floor=1e-12,
        clamped=np.zeros(mu.shape, dtype=bool),
    )


def quadratic_mean_oracle(seed: int, n: int = 5000) -> OracleData:
    """Two-arm ground truth whose arm-1 mean has a genuine quadratic term.

    A dataset built from this oracle exposes only the raw feature x, so a
    linear-in-x outcome learner is misspecified for arm 1 while the uniform
    assignment keeps any propensity model trivially correct.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    mu = np.column_stack([2.0 + 0.5 * x, 1.0 + x + x**2])
    sigma = np.full((n, 2), 1.0)
    potential = mu + sigma * rng.standard_normal((n, 2))
    actions = rng.integers(0, 2, n)
    actions[:2] = (0, 1)
    dataset = Dataset(
        outcomes=potential[np.arange(n), actions],
        actions=actions,
        features=x[:, None],
        n_actions=2,
    )
    return OracleData(
        dataset=dataset,
        potential_outcomes=potential,
        true_mu=mu,
        true_sigma=sigma,
        true_propensity=np.full((n, 2), 0.5),
    )
