"""Optimal action assignment under risk preferences.

Given the per-arm return/risk pair (mu, sigma), each unit is assigned the
arm maximising a utility that encodes the decision maker's attitude toward
outcome uncertainty:

* ``neutral``    U = mu            (first-best: highest expected return)
* ``linear``     U = mu / sigma    (return per unit of risk)
* ``quadratic``  U = mu / sigma^2  (return per unit of variance)

Ties are broken deterministically toward the smallest arm index and
counted. Units whose mean estimates go negative are flagged under the
risk-averse preferences - the ratio ordering is fragile there because the
utilities assume a generally non-negative reward - but the rule itself is
never altered.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .moments import ArmMoments


class RiskPreference(str, Enum):
    NEUTRAL = "neutral"
    LINEAR = "linear"
    QUADRATIC = "quadratic"


def risk_utility(
    mu: np.ndarray,
    sigma: np.ndarray,
    sigma2: np.ndarray,
    preference: RiskPreference,
) -> np.ndarray:
    """Elementwise utility for the given risk preference."""
    if preference == RiskPreference.NEUTRAL:
        return np.array(mu, dtype=np.float64)
    if preference == RiskPreference.LINEAR:
        return mu / sigma
    if preference == RiskPreference.QUADRATIC:
        return mu / sigma2
    raise ValueError(f"unknown risk preference: {preference!r}")


@dataclass(frozen=True, eq=False)
class PolicyAssignment:
    """Chosen action per unit plus the utility matrix that produced it.

    ``actions[i]`` is always the smallest index maximising row i of
    ``utility``; ``ties_broken`` counts rows where the maximum was not
    unique, and ``n_negative_mu`` counts units flagged for negative mean
    estimates under a risk-averse preference.
    """

    preference: RiskPreference
    actions: np.ndarray
    utility: np.ndarray
    ties_broken: int = 0
    n_negative_mu: int = 0

    def __post_init__(self) -> None:
        actions = np.ascontiguousarray(self.actions, dtype=np.int64)
        utility = np.ascontiguousarray(self.utility, dtype=np.float64)
        if utility.ndim != 2 or actions.shape != (utility.shape[0],):
            raise ValueError("actions and utility disagree on shape")
        if not np.isfinite(utility).all():
            raise ValueError("utility contains non-finite entries")
        if not np.array_equal(np.argmax(utility, axis=1), actions):
            raise ValueError("actions do not maximise the utility rows")
        actions.setflags(write=False)
        utility.setflags(write=False)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "utility", utility)

    @property
    def label(self) -> str:
        return self.preference.value

    @property
    def n_units(self) -> int:
        return self.actions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.utility.shape[1]

    def action_shares(self) -> np.ndarray:
        return np.bincount(self.actions, minlength=self.n_actions) / self.n_units


def utility_matrix(moments: ArmMoments, preference: RiskPreference) -> np.ndarray:
    """N x M utilities; finite by construction thanks to the variance floor."""
    return risk_utility(moments.mu, moments.sigma, moments.sigma2, preference)


def assign_policy(moments: ArmMoments, preference: RiskPreference) -> PolicyAssignment:
    """Per-unit argmax of the utility matrix, smallest index on ties."""
    utility = utility_matrix(moments, preference)
    actions = np.argmax(utility, axis=1)
    n_max = (utility == utility.max(axis=1, keepdims=True)).sum(axis=1)
    ties = int((n_max > 1).sum())
    negative = 0
    if preference != RiskPreference.NEUTRAL:
        negative = int((moments.mu < 0).any(axis=1).sum())
    return PolicyAssignment(
        preference=preference,
        actions=actions,
        utility=utility,
        ties_broken=ties,
        n_negative_mu=negative,
    )


def cate(moments: ArmMoments, a: int, a_prime: int) -> np.ndarray:
    """Conditional average treatment effect of arm ``a`` versus ``a_prime``.

    The per-unit difference of conditional mean outcomes between two
    distinct arms.
    """
    m = moments.n_actions
    if not (0 <= a < m and 0 <= a_prime < m):
        raise ValueError(f"arm indices must be in 0..{m - 1}")
    if a == a_prime:
        raise ValueError("treatment effect requires two distinct arms")
    return moments.mu[:, a] - moments.mu[:, a_prime]
