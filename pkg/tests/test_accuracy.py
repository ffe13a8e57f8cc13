import math
import random

import numpy as np
import pytest

from privcalc.accuracy import (
    AccuracyBound,
    accuracy_for_epsilon,
    compose_accuracy_union,
    epsilon_for_accuracy,
    laplace_alpha,
)
from privcalc.errors import InvalidBeta, NonpositiveAlpha, NonpositiveScale
from privcalc.mechanisms import laplace_sample

LN20 = math.log(20)


def test_named_values():
    assert laplace_alpha(1.0, 0.05) == pytest.approx(LN20)
    assert laplace_alpha(2.0, math.exp(-1)) == pytest.approx(2.0)
    assert laplace_alpha(1.0, 1 - 1e-9) < 1e-8
    assert epsilon_for_accuracy(1.0, LN20, 0.05) == pytest.approx(1.0)
    assert epsilon_for_accuracy(0.0, 1.0, 0.05) == 0.0


def test_forward_form_monte_carlo():
    z = laplace_sample(np.random.default_rng(77), 1.0, 1_000_000)
    alpha = laplace_alpha(1.0, 0.05)
    assert abs(np.quantile(np.abs(z), 0.95) - alpha) / alpha < 0.02


def test_round_trip():
    rnd = random.Random(3)
    for _ in range(1000):
        c, eps, beta = rnd.uniform(0.01, 100), rnd.uniform(0.01, 10), rnd.uniform(1e-6, 0.99)
        alpha = accuracy_for_epsilon(c, eps, beta).alpha
        assert epsilon_for_accuracy(c, alpha, beta) == pytest.approx(eps, rel=1e-12)


def test_union():
    assert compose_accuracy_union([AccuracyBound(2.0, 0.05)] * 2) == ((2.0, 2.0), pytest.approx(0.1))
    assert compose_accuracy_union([AccuracyBound(1.5, 0.2)]) == ((1.5,), 0.2)
    assert compose_accuracy_union([AccuracyBound(1.0, 0.2)] * 10)[1] == 1.0


def test_union_bound_is_sound_empirically():
    rng = np.random.default_rng(4)
    k, b, beta = 3, 1.0, 0.05
    alpha = laplace_alpha(b, beta)
    z = laplace_sample(rng, b, (200_000, k))
    joint_fail = np.mean((np.abs(z) > alpha).any(axis=1))
    _, composed = compose_accuracy_union([AccuracyBound(alpha, beta)] * k)
    assert joint_fail <= composed


@pytest.mark.parametrize(
    "call, exc",
    [
        (lambda: laplace_alpha(0, 0.1), NonpositiveScale),
        (lambda: laplace_alpha(1, 0), InvalidBeta),
        (lambda: laplace_alpha(1, 1), InvalidBeta),
        (lambda: epsilon_for_accuracy(1, 0, 0.1), NonpositiveAlpha),
        (lambda: AccuracyBound(-1, 0.1), NonpositiveAlpha),
        (lambda: AccuracyBound(1, 1.5), InvalidBeta),
    ],
)
def test_errors(call, exc):
    with pytest.raises(exc):
        call()
