"""Sample-and-aggregate: run an arbitrary estimator per block, privately average the results."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from typing import Callable, Optional

from privcalc.combinators import chain_mt, chain_tt
from privcalc.core import (
    ABSOLUTE,
    L1,
    SYMMETRIC,
    Dataset,
    DatasetDomain,
    Measurement,
    Metric,
    ScalarDomain,
    StabilityMap,
    Transformation,
    VectorDomain,
    make_transformation,
)
from privcalc.errors import BoundsInverted, NonpositiveEpsilon, TooFewBlocks
from privcalc.mechanisms import laplace_noise
from privcalc.transforms import PartitionSpec


def _mean(x: Dataset) -> float:
    vals = [float(r[0]) for r in x.records]
    return math.fsum(vals) / len(vals) if vals else math.nan


def _median(x: Dataset) -> float:
    vals = [float(r[0]) for r in x.records]
    return statistics.median(vals) if vals else math.nan


def _variance(x: Dataset) -> float:
    vals = [float(r[0]) for r in x.records]
    return statistics.pvariance(vals) if vals else math.nan


ESTIMATORS: dict[str, Callable[[Dataset], float]] = {
    "mean": _mean,
    "median": _median,
    "variance": _variance,
    "count": lambda x: float(len(x)),
}


def block_estimates(
    domain,
    f: Callable[[Dataset], float],
    spec: PartitionSpec,
    lower: float,
    upper: float,
    metric: Metric = SYMMETRIC,
    timeout: Optional[float] = None,
) -> Transformation:
    """Dataset -> vector ``(clip(f(x_P1)), ..., clip(f(x_Pm)))`` in L1 distance.

    One added/removed record alters a single block, so the L1 change is at
    most ``upper - lower``; a changed record may alter two blocks.  A block
    whose estimator times out, raises, or returns a non-finite value
    contributes the range midpoint, which depends on nothing but the range.
    """
    if not lower < upper:
        raise BoundsInverted(f"need lower < upper, got [{lower}, {upper}]")
    dom = domain if isinstance(domain, DatasetDomain) else DatasetDomain(domain)
    mid = (lower + upper) / 2.0
    width = upper - lower

    def clip(v) -> float:
        try:
            v = float(v)
        except (TypeError, ValueError):
            return mid
        if not math.isfinite(v):
            return mid
        return min(max(v, lower), upper)

    def run(x: Dataset) -> tuple[float, ...]:
        blocks = spec.split(x)
        if timeout is None:
            out = []
            for b in blocks:
                try:
                    out.append(clip(f(b)))
                except Exception:
                    out.append(mid)
            return tuple(out)
        pool = ThreadPoolExecutor(max_workers=min(8, len(blocks)))
        try:
            futures = [pool.submit(f, b) for b in blocks]
            deadline = time.monotonic() + timeout
            out = []
            for fut in futures:
                try:
                    out.append(clip(fut.result(timeout=max(0.0, deadline - time.monotonic()))))
                except FutureTimeout:
                    out.append(mid)
                except Exception:
                    out.append(mid)
            return tuple(out)
        finally:
            # a hung estimator thread is abandoned, not joined
            pool.shutdown(wait=False, cancel_futures=True)

    c = width if metric is SYMMETRIC else 2.0 * width
    return make_transformation(
        dom, VectorDomain(spec.m, lower, upper), metric, L1, run, StabilityMap.linear(c), f"blocks[{spec.m}]"
    )


def vector_mean(m: int, lower: float = -math.inf, upper: float = math.inf) -> Transformation:
    """Mean of a length-``m`` vector; ``1/m``-stable from L1 to absolute distance."""
    return make_transformation(
        VectorDomain(m, lower, upper), ScalarDomain(lower, upper), L1, ABSOLUTE,
        lambda v: math.fsum(v) / m, StabilityMap.linear(1.0 / m), "mean",
    )


def sample_and_aggregate(
    domain,
    f: Callable[[Dataset], float] | str,
    m: int,
    seed: int,
    output_range: tuple[float, float],
    epsilon: float,
    metric: Metric = SYMMETRIC,
    spec: Optional[PartitionSpec] = None,
    timeout: Optional[float] = 10.0,
    noiseless: bool = False,
) -> Measurement:
    """Private estimate of ``f`` by averaging per-block estimates with Laplace noise.

    Blocks come from a seeded random partition of the record universe
    unless ``spec`` is given.  Noise scale is ``(U - L) / (m * epsilon)``,
    giving loss epsilon per added/removed record and 2*epsilon per changed
    record.  ``noiseless`` is a test hook that drops the noise (and with it
    any privacy guarantee).
    """
    if m < 2:
        raise TooFewBlocks(f"need at least 2 blocks, got {m}")
    if not epsilon > 0:
        raise NonpositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    lower, upper = output_range
    if not lower < upper:
        raise BoundsInverted(f"need L < U, got [{lower}, {upper}]")
    if isinstance(f, str):
        f = ESTIMATORS[f]
    spec = spec or PartitionSpec.random(m, seed)
    if spec.m != m:
        raise TooFewBlocks(f"partition has {spec.m} pieces, expected {m}")
    t = chain_tt(vector_mean(m, lower, upper), block_estimates(domain, f, spec, lower, upper, metric, timeout))
    scale = (upper - lower) / (m * epsilon)
    noise = laplace_noise(scale, t.output_domain)
    mech = chain_mt(noise, t)
    if noiseless:
        fn = t.function
        return replace(mech, function=lambda x, rng: fn(x), sampler=None, name=mech.name + "[noiseless]")
    return mech
