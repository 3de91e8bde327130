"""Per-arm conditional means and variances of the outcome.

For every unit i and every action a the pipeline needs the return/risk pair
(mu[i, a], sigma[i, a]): the conditional mean outcome under action a and its
conditional standard deviation. Because treatment is unconfounded given the
features, the mean is estimated by fitting a learner on the subsample that
actually received arm a and predicting for all N units (counterfactual
imputation). The variance is the plug-in difference of two conditional
means,

    sigma2(a, x) = E[Y^2 | A=a, x] - E[Y | A=a, x]^2,

fit with the same learner. Flexible learners can make the plug-in
difference non-positive, and sigma appears in utility denominators, so
sigma2 is clamped below at a strictly positive floor; the clamp mask is kept
so that reports can surface how often it fired.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .data import Dataset, validate_dataset
from .regression import LinearModel, fit_ols, predict_ols


class FittedMoment(Protocol):
    def predict(self, features: np.ndarray) -> np.ndarray: ...


class MomentLearner(Protocol):
    """Anything with ``fit(features, targets) -> object with predict``."""

    def fit(self, features: np.ndarray, targets: np.ndarray) -> FittedMoment: ...


@dataclass(frozen=True, eq=False)
class _FittedLinear:
    model: LinearModel

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_ols(self.model, features)


@dataclass(frozen=True)
class LinearLearner:
    """Default moment learner: least squares with intercept.

    ``ridge`` is passed through to :func:`oplearn.regression.fit_ols` and
    only kicks in for singular designs.
    """

    ridge: float | None = None

    def fit(self, features: np.ndarray, targets: np.ndarray) -> _FittedLinear:
        return _FittedLinear(fit_ols(features, targets, ridge=self.ridge))


@dataclass(frozen=True)
class _ConstantFit:
    value: float

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(features).shape[0], self.value)


@dataclass(frozen=True)
class InterceptOnlyLearner:
    """Ignores features and predicts the training mean; useful as a baseline."""

    def fit(self, features: np.ndarray, targets: np.ndarray) -> _ConstantFit:
        return _ConstantFit(float(np.mean(targets)))


@dataclass(frozen=True, eq=False)
class ConditionalVariance:
    """Clamped plug-in variance with its elementwise square root."""

    sigma2: np.ndarray
    sigma: np.ndarray
    clamped: np.ndarray

    @property
    def n_clamped(self) -> int:
        return int(self.clamped.sum())


@dataclass(frozen=True, eq=False)
class ArmMoments:
    """Estimated (mu, sigma) pair for every unit x arm cell.

    Invariants, checked at construction: ``sigma2 >= variance_floor > 0``
    everywhere, ``sigma`` is the elementwise square root of ``sigma2``, and
    all entries are finite. ``clamped`` marks the cells where the raw
    plug-in variance fell below the floor.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    sigma: np.ndarray
    variance_floor: float
    clamped: np.ndarray

    def __post_init__(self) -> None:
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        sigma2 = np.ascontiguousarray(self.sigma2, dtype=np.float64)
        sigma = np.ascontiguousarray(self.sigma, dtype=np.float64)
        clamped = np.ascontiguousarray(self.clamped, dtype=bool)
        if not (mu.shape == sigma2.shape == sigma.shape == clamped.shape):
            raise ValueError("moment matrices disagree on shape")
        if mu.ndim != 2:
            raise ValueError("moment matrices must be 2-d (units x arms)")
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be strictly positive")
        if not (np.isfinite(mu).all() and np.isfinite(sigma2).all()):
            raise ValueError("moments contain non-finite entries")
        if sigma2.min() < self.variance_floor:
            raise ValueError("sigma2 below the variance floor")
        if np.abs(sigma - np.sqrt(sigma2)).max() > 1e-12:
            raise ValueError("sigma is not the square root of sigma2")
        for arr in (mu, sigma2, sigma, clamped):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "clamped", clamped)

    @property
    def n_units(self) -> int:
        return self.mu.shape[0]

    @property
    def n_actions(self) -> int:
        return self.mu.shape[1]

    @property
    def n_clamped(self) -> int:
        return int(self.clamped.sum())


def default_variance_floor(outcomes: np.ndarray) -> float:
    """1e-8 times the outcome variance, or 1e-8 for constant outcomes."""
    spread = float(np.var(np.asarray(outcomes, dtype=np.float64)))
    return 1e-8 * (spread if spread > 0 else 1.0)


def _require_valid(dataset: Dataset) -> None:
    report = validate_dataset(dataset)
    if not report.passed:
        raise ValueError(
            "dataset fails validation (an arm is too thin for the learner); "
            f"arm counts: {report.arm_counts.tolist()}"
        )


def _fit_per_arm(dataset: Dataset, learner: MomentLearner, targets: np.ndarray) -> np.ndarray:
    """Fit on each arm subsample, predict the target for all units."""
    out = np.empty((dataset.n_units, dataset.n_actions))
    for a in range(dataset.n_actions):
        rows = dataset.actions == a
        fitted = learner.fit(dataset.features[rows], targets[rows])
        out[:, a] = fitted.predict(dataset.features)
    return out


def estimate_conditional_means(
    dataset: Dataset, learner: MomentLearner = LinearLearner()
) -> np.ndarray:
    """N x M matrix of imputed conditional mean outcomes, one column per arm."""
    _require_valid(dataset)
    return _fit_per_arm(dataset, learner, dataset.outcomes)


def estimate_conditional_variance(
    dataset: Dataset,
    learner: MomentLearner = LinearLearner(),
    variance_floor: float | None = None,
) -> ConditionalVariance:
    """Plug-in conditional variance, clamped below at ``variance_floor``.

    Per arm, the learner is fit twice on the arm subsample - once with
    target Y^2, once with target Y - and both fits predict for all units;
    the variance is the difference of the predictions.
    """
    _require_valid(dataset)
    if variance_floor is None:
        variance_floor = default_variance_floor(dataset.outcomes)
    if variance_floor <= 0:
        raise ValueError("variance_floor must be strictly positive")
    second = _fit_per_arm(dataset, learner, dataset.outcomes**2)
    first = _fit_per_arm(dataset, learner, dataset.outcomes)
    raw = second - first**2
    clamped = raw < variance_floor
    sigma2 = np.where(clamped, variance_floor, raw)
    return ConditionalVariance(sigma2=sigma2, sigma=np.sqrt(sigma2), clamped=clamped)


def build_arm_moments(
    dataset: Dataset,
    learner: MomentLearner = LinearLearner(),
    variance_floor: float | None = None,
) -> ArmMoments:
    """Bundle the conditional mean and variance estimates for all arms."""
    if variance_floor is None:
        variance_floor = default_variance_floor(dataset.outcomes)
    mu = estimate_conditional_means(dataset, learner)
    var = estimate_conditional_variance(dataset, learner, variance_floor)
    return ArmMoments(
        mu=mu,
        sigma2=var.sigma2,
        sigma=var.sigma,
        variance_floor=variance_floor,
        clamped=var.clamped,
    )
