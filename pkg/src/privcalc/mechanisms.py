"""Primitive measurements and the assembled noisy count / sum / average.

Laplace noise is drawn by inverting the CDF on uniform doubles.  Floating
point leakage of that construction is a known caveat and is not addressed
here.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from privcalc import transforms
from privcalc.combinators import chain_mt, compose_basic, pipeline, postprocess
from privcalc.core import (
    ABSOLUTE,
    PURE_DP,
    SYMMETRIC,
    DatasetDomain,
    Measurement,
    Metric,
    PrivacyMap,
    ScalarDomain,
    Schema,
    make_measurement,
)
from privcalc.errors import InvalidProbability, NonpositiveEpsilon, NonpositiveScale

_TWO53 = float(2**53)


def laplace_sample(rng: np.random.Generator, scale: float, size: Optional[int] = None):
    """Laplace(0, scale) draws by inverse CDF on uniforms strictly inside (0, 1)."""
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    u = (k + 0.5) / _TWO53
    lower = u < 0.5
    # both branches are finite on (0, 1); np.where evaluates both
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(lower, scale * np.log(2.0 * u), -scale * np.log(2.0 * (1.0 - u)))
    return float(out) if size is None else out


def _check_epsilon(epsilon: float):
    if not epsilon > 0:
        raise NonpositiveEpsilon(f"epsilon must be positive, got {epsilon}")


def laplace_noise(scale: float, domain: ScalarDomain = ScalarDomain()) -> Measurement:
    """``z + Lap(scale)`` on real numbers; privacy map ``d -> d / scale``."""
    if not scale > 0:
        raise NonpositiveScale(f"Laplace scale must be positive, got {scale}")
    b = float(scale)

    def run(z, rng):
        return float(z) + laplace_sample(rng, b)

    def sampler(z, rng, size):
        return float(z) + laplace_sample(rng, b, size)

    return make_measurement(
        domain, ABSOLUTE, PURE_DP, run, PrivacyMap.linear(1.0 / b), f"laplace[{b:g}]", sampler=sampler
    )


def randomized_response(p: float) -> Measurement:
    """Report a bit truthfully with probability ``p``, flipped otherwise."""
    if not 0.5 <= p < 1:
        raise InvalidProbability(f"randomized response needs 0.5 <= p < 1, got {p}")
    eps = math.log(p / (1 - p))

    def run(bit, rng):
        truth = int(bool(bit))
        return truth if rng.random() < p else 1 - truth

    def sampler(bit, rng, size):
        truth = int(bool(bit))
        keep = rng.random(size) < p
        return np.where(keep, truth, 1 - truth)

    def pmf(bit):
        truth = int(bool(bit))
        return {truth: p, 1 - truth: 1 - p}

    return make_measurement(
        ScalarDomain(0.0, 1.0), ABSOLUTE, PURE_DP, run, PrivacyMap.linear(eps), f"rr[{p:g}]", sampler, pmf
    )


def _domain(d) -> DatasetDomain:
    return d if isinstance(d, DatasetDomain) else DatasetDomain(d)


def noisy_count(domain, epsilon: float, metric: Metric = SYMMETRIC) -> Measurement:
    """Laplace(1/epsilon) added to the record count."""
    _check_epsilon(epsilon)
    t = transforms.count(_domain(domain), metric)
    return chain_mt(laplace_noise(1.0 / epsilon, t.output_domain), t)


def noisy_sum(domain, column: str, lower: float, upper: float, epsilon: float, metric: Metric = SYMMETRIC) -> Measurement:
    """Clamp a column to ``[lower, upper]``, sum it, add Laplace(c/epsilon)."""
    _check_epsilon(epsilon)
    clip = transforms.clamp(_domain(domain), column, lower, upper, metric)
    total = transforms.sum_clamped(clip.output_domain, column, lower, upper, metric)
    c = total.stability.linear_constant
    scale = c / epsilon if c > 0 else 1.0 / epsilon
    return pipeline(clip, total, laplace_noise(scale, total.output_domain))


def safe_average(total: float, n: float) -> float:
    """Quotient of a noisy sum of [-1, 1] values by a noisy count.

    Returns 0 when the noisy count is below one record (the degenerate
    case, a known bias source) and otherwise clips the ratio to [-1, 1].
    """
    if n < 1:
        return 0.0
    return min(1.0, max(-1.0, total / n))


def noisy_average(domain, f: Callable[[tuple], float], epsilon: float, metric: Metric = SYMMETRIC) -> Measurement:
    """Average of ``f`` over records, each value clamped to [-1, 1].

    Budget is split evenly between a noisy clamped sum and a noisy count;
    the quotient is post-processing.
    """
    _check_epsilon(epsilon)
    dom = _domain(domain)
    values = Schema.of(("value", "float64"))
    to_value = transforms.map_rows(dom, lambda r: (float(f(r)),), values, metric)
    half = epsilon / 2.0
    both = compose_basic([
        noisy_sum(to_value.output_domain, "value", -1.0, 1.0, half, metric),
        noisy_count(to_value.output_domain, half, metric),
    ])
    return postprocess(chain_mt(both, to_value), lambda pair: safe_average(pair[0], pair[1]))
