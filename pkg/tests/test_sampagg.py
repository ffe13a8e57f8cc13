import math
import time

import numpy as np
import pytest

from conftest import ds
from privcalc.core import CHANGE_ONE, DatasetDomain
from privcalc.errors import BoundsInverted, NonpositiveEpsilon, TooFewBlocks
from privcalc.sampagg import ESTIMATORS, block_estimates, sample_and_aggregate, vector_mean
from privcalc.transforms import PartitionSpec


# value-based round robin: {1,4,7}, {2,5,8}, {3,6,9}
MOD3 = PartitionSpec.from_predicates([lambda r, k=k: int(r[0]) % 3 == (k + 1) % 3 for k in range(3)])


def test_round_robin_block_means(xdomain):
    x = ds(range(1, 10))
    t = block_estimates(xdomain, ESTIMATORS["mean"], MOD3, 0, 10)
    assert t(x) == (4.0, 5.0, 6.0)
    m = sample_and_aggregate(xdomain, "mean", 3, 0, (0, 10), 1.0, spec=MOD3, noiseless=True)
    assert m(x, 0) == 5.0


def test_losses(xdomain):
    m = sample_and_aggregate(xdomain, "mean", 30, 1, (0, 1), 0.7)
    assert m.loss_at(1).epsilon == pytest.approx(0.7)
    b = sample_and_aggregate(xdomain, "mean", 30, 1, (0, 1), 0.7, metric=CHANGE_ONE)
    assert b.loss_at(1).epsilon == pytest.approx(1.4)


def test_noise_scale(xdomain):
    m = sample_and_aggregate(xdomain, "mean", 10, 1, (-1, 3), 2.0)
    z = m.sample(ds([1.0] * 20), np.random.default_rng(0), 200_000)
    # E|Lap(b)| = b = (U - L) / (m * eps) = 0.2
    center = np.median(z)
    assert np.abs(z - center).mean() == pytest.approx(0.2, rel=0.02)


def test_block_stability_composed(xdomain):
    t = block_estimates(xdomain, ESTIMATORS["mean"], PartitionSpec.random(5, 0), 0, 1)
    assert t.d_out(1) == 1
    assert vector_mean(5).d_out(1) == pytest.approx(0.2)


class TestFailureHandling:
    def test_exception_and_nonfinite_become_midpoint(self, xdomain):
        def f(b):
            first = b.records[0][0] if len(b) else 0
            if int(first) % 3 == 1:
                raise RuntimeError("boom")
            if int(first) % 3 == 2:
                return math.inf
            return 100.0

        assert block_estimates(xdomain, f, MOD3, -2, 4)(ds(range(1, 10))) == (1.0, 1.0, 4.0)

    def test_empty_block_nan_becomes_midpoint(self, xdomain):
        t = block_estimates(xdomain, ESTIMATORS["mean"], MOD3, 0, 8)
        assert t(ds([1, 4])) == (2.5, 4.0, 4.0)

    def test_timeout(self, xdomain):
        def slow(b):
            if len(b) and int(b.records[0][0]) % 3 == 0:
                time.sleep(3)
            return 1.0

        t = block_estimates(xdomain, slow, MOD3, 0, 4, timeout=0.2)
        start = time.monotonic()
        assert t(ds(range(1, 10))) == (1.0, 1.0, 2.0)
        assert time.monotonic() - start < 2


class TestErrors:
    def test_few_blocks(self, xdomain):
        with pytest.raises(TooFewBlocks):
            sample_and_aggregate(xdomain, "mean", 1, 0, (0, 1), 1.0)

    def test_bounds(self, xdomain):
        with pytest.raises(BoundsInverted):
            sample_and_aggregate(xdomain, "mean", 5, 0, (1, 1), 1.0)

    def test_epsilon(self, xdomain):
        with pytest.raises(NonpositiveEpsilon):
            sample_and_aggregate(xdomain, "mean", 5, 0, (0, 1), 0.0)


def test_utility_with_informative_range():
    # a range of [0.25, 0.75] halves the noise relative to [0, 1]
    dom = DatasetDomain(ds([]).schema)
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = ds(rng.random(900).tolist())
        truth = float(np.mean(x.column("x")))
        m = sample_and_aggregate(dom, "mean", 30, seed, (0.25, 0.75), 1.0)
        hits += abs(m(x, rng) - truth) <= 0.05
    assert hits >= 85
