"""Chaining and composition of transformations and measurements."""

from __future__ import annotations

import itertools
from typing import Any, Callable, Sequence

import numpy as np

from privcalc.core import (
    APPROX_DP,
    CHANGE_ONE,
    SYMMETRIC,
    Measurement,
    Metric,
    PrivacyLoss,
    PrivacyMap,
    StabilityMap,
    Transformation,
    make_measurement,
    make_transformation,
    require_compatible,
)
from privcalc.errors import ArityMismatch, DomainMismatch, HeterogeneousMeasures, IncompatibleMetric
from privcalc.transforms import PartitionSpec, partition


def chain_tt(t2: Transformation, t1: Transformation) -> Transformation:
    """``t2 ∘ t1``; stability maps compose, linear constants multiply."""
    require_compatible(t1.output_domain, t1.output_metric, t2.input_domain, t2.input_metric)
    c1, c2 = t1.stability.linear_constant, t2.stability.linear_constant
    if c1 is not None and c2 is not None:
        stability = StabilityMap.linear(c1 * c2)
    else:
        inner, outer = t1.stability, t2.stability
        stability = StabilityMap(lambda d: outer(inner(d)))
    f1, f2 = t1.function, t2.function
    return make_transformation(
        t1.input_domain,
        t2.output_domain,
        t1.input_metric,
        t2.output_metric,
        lambda x: f2(f1(x)),
        stability,
        f"{t2.name}∘{t1.name}",
    )


def chain_mt(m: Measurement, t: Transformation) -> Measurement:
    """``m ∘ t``; the privacy map is ``m.privacy ∘ t.stability``."""
    require_compatible(t.output_domain, t.output_metric, m.input_domain, m.input_metric)
    c = t.stability.linear_constant
    if c is not None and m.privacy.per_unit is not None:
        privacy = PrivacyMap(m.privacy.measure, per_unit=m.privacy.per_unit.scale(c))
    else:
        inner, outer = t.stability, m.privacy
        privacy = PrivacyMap(m.privacy.measure, fn=lambda d: outer(inner(d)))
    f, g = t.function, m.function
    sampler = pmf = None
    if m.sampler is not None:
        ms = m.sampler
        sampler = lambda x, rng, size: ms(f(x), rng, size)
    if m.pmf is not None:
        mp = m.pmf
        pmf = lambda x: mp(f(x))
    return make_measurement(
        t.input_domain, t.input_metric, m.output_measure, lambda x, rng: g(f(x), rng), privacy,
        f"{m.name}∘{t.name}", sampler, pmf,
    )


def pipeline(*stages) -> Measurement:
    """Chain ``T_1, ..., T_k, M`` (in application order) into one measurement."""
    if not stages or not isinstance(stages[-1], Measurement):
        raise DomainMismatch("a pipeline must end with exactly one measurement")
    if any(isinstance(s, Measurement) for s in stages[:-1]):
        raise DomainMismatch("only the final stage of a pipeline may be a measurement")
    ts = stages[:-1]
    if not ts:
        return stages[-1]
    t = ts[0]
    for nxt in ts[1:]:
        t = chain_tt(nxt, t)
    return chain_mt(stages[-1], t)


def _sum_losses(losses: Sequence[PrivacyLoss]) -> PrivacyLoss:
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return total


def _product_pmf(pmfs: Sequence[dict]) -> dict:
    out: dict = {}
    for combo in itertools.product(*(p.items() for p in pmfs)):
        key = tuple(k for k, _ in combo)
        prob = float(np.prod([v for _, v in combo]))
        out[key] = out.get(key, 0.0) + prob
    return out


def compose_basic(ms: Sequence[Measurement]) -> Measurement:
    """Release ``(M_1(x), ..., M_k(x))``; losses add (componentwise for ApproxDP)."""
    ms = list(ms)
    if not ms:
        raise ArityMismatch("compose_basic needs at least one measurement")
    first = ms[0]
    for m in ms[1:]:
        if m.output_measure is not first.output_measure:
            raise HeterogeneousMeasures(f"{m.output_measure.value} vs {first.output_measure.value}")
        if m.input_metric != first.input_metric or m.input_domain != first.input_domain:
            raise DomainMismatch(f"{m.name} does not share input domain/metric with {first.name}")
    if len(ms) == 1:
        return first

    if all(m.privacy.per_unit is not None for m in ms):
        privacy = PrivacyMap(first.output_measure, per_unit=_sum_losses([m.privacy.per_unit for m in ms]))
    else:
        maps = [m.privacy for m in ms]
        privacy = PrivacyMap(first.output_measure, fn=lambda d: _sum_losses([p(d) for p in maps]))

    fns = [m.function for m in ms]

    def run(x, rng):
        return tuple(fn(x, rng) for fn in fns)

    pmf = None
    if all(m.pmf is not None for m in ms):
        pmfs = [m.pmf for m in ms]
        pmf = lambda x: _product_pmf([p(x) for p in pmfs])

    sampler = None
    if all(m.sampler is not None for m in ms):
        samplers = [m.sampler for m in ms]
        sampler = lambda x, rng, size: np.column_stack([s(x, rng, size) for s in samplers])

    return make_measurement(
        first.input_domain, first.input_metric, first.output_measure, run, privacy,
        "compose(" + ", ".join(m.name for m in ms) + ")", sampler, pmf,
    )


def _top_two(values: list[PrivacyLoss]) -> PrivacyLoss:
    ordered = sorted(values, key=lambda v: (v.epsilon, v.delta), reverse=True)
    if len(ordered) == 1:
        return ordered[0]
    return ordered[0] + ordered[1]


def parallel_reduce(metric: Metric, losses: list[PrivacyLoss]) -> PrivacyLoss:
    """Loss of disjoint per-piece releases for one unit of input distance.

    With insert/delete adjacency one edit touches one piece (maximum);
    with change-one adjacency a record can leave one piece and enter
    another (sum of the two largest).
    """
    if metric is SYMMETRIC:
        out = losses[0]
        for loss in losses[1:]:
            out = out.max(loss)
        return out
    if metric is CHANGE_ONE:
        return _top_two(losses)
    raise IncompatibleMetric(f"parallel composition is defined over dataset metrics, not {metric.name}")


def compose_parallel(domain, spec: PartitionSpec, ms: Sequence[Measurement], metric: Metric = SYMMETRIC) -> Measurement:
    """Apply ``ms[i]`` to piece ``i`` of ``spec``.

    Each ``ms[i]`` must accept the piece datasets under SymmetricDistance.
    The privacy map is linear, ``d * reduce_i loss_i(1)``; when a piece's
    map is nonlinear the conservative bound ``sum_i loss_i(d)`` is used.
    """
    ms = list(ms)
    if len(ms) != spec.m:
        raise ArityMismatch(f"partition has {spec.m} pieces but {len(ms)} measurements were given")
    split = partition(domain, spec, metric)
    piece_domain = split.output_domain.piece
    measure = ms[0].output_measure
    for m in ms:
        if m.output_measure is not measure:
            raise HeterogeneousMeasures(f"{m.output_measure.value} vs {measure.value}")
        require_compatible(piece_domain, SYMMETRIC, m.input_domain, m.input_metric)

    if all(m.privacy.per_unit is not None for m in ms):
        privacy = PrivacyMap(measure, per_unit=parallel_reduce(metric, [m.privacy.per_unit for m in ms]))
    else:
        maps = [m.privacy for m in ms]
        privacy = PrivacyMap(measure, fn=lambda d: _sum_losses([p(d) for p in maps]))

    fns = [m.function for m in ms]

    def run(x, rng):
        pieces = spec.split(x)
        return tuple(fn(p, rng) for fn, p in zip(fns, pieces))

    pmf = None
    if all(m.pmf is not None for m in ms):
        pmfs = [m.pmf for m in ms]
        pmf = lambda x: _product_pmf([p(piece) for p, piece in zip(pmfs, spec.split(x))])

    return make_measurement(
        split.input_domain, metric, measure, run, privacy, f"parallel[{spec.m}]", None, pmf
    )


def postprocess(m: Measurement, g: Callable[[Any], Any]) -> Measurement:
    """Apply a deterministic ``g`` to the release; the privacy map is unchanged."""
    f = m.function
    pmf = sampler = None
    if m.pmf is not None:
        mp = m.pmf

        def pushforward(x):
            out: dict = {}
            for k, v in mp(x).items():
                gk = g(k)
                out[gk] = out.get(gk, 0.0) + v
            return out

        pmf = pushforward

    if m.sampler is not None:
        ms = m.sampler
        sampler = lambda x, rng, size: np.asarray([g(v) for v in ms(x, rng, size)])
    return make_measurement(
        m.input_domain, m.input_metric, m.output_measure, lambda x, rng: g(f(x, rng)), m.privacy,
        f"post({m.name})", sampler, pmf,
    )


def pure_to_approx(m: Measurement) -> Measurement:
    """Embed a PureDP measurement as ApproxDP with delta = 0."""
    if m.output_measure is APPROX_DP:
        return m
    if m.privacy.per_unit is not None:
        privacy = PrivacyMap(APPROX_DP, per_unit=PrivacyLoss.approx(m.privacy.per_unit.epsilon, 0.0))
    else:
        p = m.privacy
        privacy = PrivacyMap(APPROX_DP, fn=lambda d: PrivacyLoss.approx(p(d).epsilon, 0.0))
    return make_measurement(m.input_domain, m.input_metric, APPROX_DP, m.function, privacy, m.name, m.sampler, m.pmf)
