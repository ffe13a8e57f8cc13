"""(alpha, beta)-accuracy for Laplace releases and the budget <-> accuracy inversion.

Error is measured per coordinate in absolute value.  Accuracy of
post-processed quantities (such as a ratio of two releases) is not
covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from privcalc.errors import InvalidBeta, NonpositiveAlpha, NonpositiveScale


@dataclass(frozen=True)
class AccuracyBound:
    """With probability at least ``1 - beta`` every coordinate errs by at most ``alpha``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0:
            raise NonpositiveAlpha(f"alpha must be nonnegative, got {self.alpha}")
        if not 0 <= self.beta <= 1:
            raise InvalidBeta(f"beta must lie in [0, 1], got {self.beta}")


def _check_beta(beta: float):
    if not 0 < beta < 1:
        raise InvalidBeta(f"beta must lie in (0, 1), got {beta}")


def laplace_alpha(scale: float, beta: float) -> float:
    # Pr[|Lap(b)| > t] = exp(-t/b)
    if not scale > 0:
        raise NonpositiveScale(f"scale must be positive, got {scale}")
    _check_beta(beta)
    return scale * math.log(1.0 / beta)


def epsilon_for_accuracy(sensitivity: float, alpha: float, beta: float) -> float:
    """Smallest epsilon for which Laplace(c/epsilon) noise is (alpha, beta)-accurate."""
    _check_beta(beta)
    if not alpha > 0:
        raise NonpositiveAlpha(f"alpha must be positive, got {alpha}")
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be nonnegative, got {sensitivity}")
    return sensitivity * math.log(1.0 / beta) / alpha


def accuracy_for_epsilon(sensitivity: float, epsilon: float, beta: float) -> AccuracyBound:
    return AccuracyBound(laplace_alpha(sensitivity / epsilon, beta), beta)


def compose_accuracy_union(bounds: Sequence[AccuracyBound]) -> tuple[tuple[float, ...], float]:
    """Joint guarantee for several releases by the union bound.

    Returns the per-coordinate alphas (unchanged) and the total failure
    probability ``min(1, sum(beta_i))``.
    """
    bounds = list(bounds)
    if not bounds:
        raise ValueError("need at least one accuracy bound")
    return tuple(b.alpha for b in bounds), min(1.0, math.fsum(b.beta for b in bounds))
