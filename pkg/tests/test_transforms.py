import math

import pytest

from conftest import ds
from oracles import change_distance, edit_distance, multisets
from privcalc.core import CHANGE_ONE, SYMMETRIC, Dataset, DatasetDomain, Schema
from privcalc.errors import BoundsInverted, IncompatibleMetric, InvalidArity, OverlappingPieces, UnclampedDomain
from privcalc.sampagg import block_estimates
from privcalc.transforms import (
    PartitionSpec,
    clamp,
    count,
    filter_rows,
    map_rows,
    multi_map,
    partition,
    sum_clamped,
    sum_sensitivity,
)
from privcalc.combinators import chain_tt

ALPHABET = (-2.0, 0.5, 3.0)
UNIVERSE = multisets(ALPHABET, 3)
SCHEMA = Schema.of(("x", "float64"))
DOM = DatasetDomain(SCHEMA)
ORACLES = {"sym": (SYMMETRIC, edit_distance), "change": (CHANGE_ONE, change_distance)}


def values(x: Dataset):
    return [r[0] for r in x.records]


def out_distance(a, b, metric=SYMMETRIC):
    if isinstance(a, Dataset):
        return (change_distance if metric is CHANGE_ONE else edit_distance)(a.records, b.records)
    if isinstance(a, tuple) and a and isinstance(a[0], Dataset):
        return sum(edit_distance(p.records, q.records) for p, q in zip(a, b))
    if isinstance(a, tuple):
        return sum(abs(u - v) for u, v in zip(a, b))
    return abs(a - b)


def shipped(metric):
    dom = DOM
    clipped = clamp(dom, "x", -1.0, 1.0, metric)
    yield "map", map_rows(dom, lambda r: (r[0] * 2 + 1,), metric=metric)
    yield "multi_map", multi_map(dom, [lambda r: r, lambda r: (-r[0],), lambda r: (0.0,)], metric=metric)
    yield "filter", filter_rows(dom, lambda r: r[0] > 0, metric)
    yield "clamp", clipped
    yield "sum", chain_tt(sum_clamped(clipped.output_domain, "x", -1.0, 1.0, metric), clipped)
    yield "count", count(dom, metric)
    yield "partition", partition(dom, PartitionSpec.from_predicates([lambda r: r[0] < 0, lambda r: r[0] >= 0]), metric)
    yield "random_partition", partition(dom, PartitionSpec.random(2, 5), metric)
    yield "blocks", block_estimates(dom, lambda b: sum(values(b)), PartitionSpec.random(2, 1), -1.0, 1.0, metric)


@pytest.mark.parametrize("which", sorted(ORACLES))
def test_exhaustive_small_instance_stability(which):
    metric, dist = ORACLES[which]
    data = [ds(u) for u in UNIVERSE]
    for name, t in shipped(metric):
        outs = [t(x) for x in data]
        for i, a in enumerate(UNIVERSE):
            for j, b in enumerate(UNIVERSE):
                d_in = dist(a, b)
                if math.isinf(d_in):
                    continue
                assert out_distance(outs[i], outs[j], t.output_metric) <= t.d_out(d_in) + 1e-9, (name, a, b)


@pytest.mark.parametrize("which, expected", [("sym", 1.0), ("change", 2.0)])
def test_partition_stability_constant_is_attained(which, expected):
    metric, dist = ORACLES[which]
    t = partition(DOM, PartitionSpec.from_predicates([lambda r: r[0] < 0, lambda r: r[0] >= 0]), metric)
    assert t.stability.linear_constant == expected
    worst = max(
        out_distance(t(ds(a)), t(ds(b)))
        for a in UNIVERSE for b in UNIVERSE if dist(a, b) == 1
    )
    assert worst == expected


def test_multi_map_stability_is_k():
    t = multi_map(DOM, [lambda r: r] * 4)
    assert t.d_out(1) == 4
    assert out_distance(t(ds([1.0])), t(ds([]))) == 4


def test_map_then_multi_map_multiplies():
    t = chain_tt(multi_map(DOM, [lambda r: r, lambda r: r]), map_rows(DOM, lambda r: r))
    assert t.stability.linear_constant == 2


def test_multi_map_empty():
    with pytest.raises(InvalidArity):
        multi_map(DOM, [])


def test_filter_under_change_one_outputs_symmetric():
    t = filter_rows(DOM, lambda r: r[0] > 0, CHANGE_ONE)
    assert t.output_metric is SYMMETRIC and t.d_out(1) == 2


class TestClamp:
    def test_examples(self):
        t = clamp(DOM, "x", 0.0, 10.0)
        assert values(t(ds([-5, 3, 12]))) == [0.0, 3.0, 10.0]
        assert t.output_domain.bounds_for("x") == (0.0, 10.0)

    def test_idempotent(self):
        t = clamp(DOM, "x", -1.0, 1.0)
        x = ds([-3.0, -0.2, 0.9, 4.0])
        assert t(t(x)) == t(x)

    def test_inverted(self):
        with pytest.raises(BoundsInverted):
            clamp(DOM, "x", 1.0, 0.0)

    def test_non_numeric(self, people_schema):
        with pytest.raises(IncompatibleMetric):
            clamp(DatasetDomain(people_schema), "city", 0, 1)

    def test_int_column_widened_by_fractional_bounds(self, people_schema, people):
        t = clamp(DatasetDomain(people_schema), "age", 20.5, 40)
        assert t.output_domain.schema.kind("age") == "float64"
        assert sorted(t(people).column("age")) == [20.5, 27.0, 34.0, 40.0, 40.0]


class TestSumAndCount:
    def test_sensitivities(self):
        assert sum_sensitivity(-1, 3) == 3
        assert sum_sensitivity(-1, 3, CHANGE_ONE) == 4

    def test_sum_requires_domain_bounds(self):
        with pytest.raises(UnclampedDomain):
            sum_clamped(DOM, "x", 0, 1)
        wide = clamp(DOM, "x", 0, 5).output_domain
        with pytest.raises(UnclampedDomain):
            sum_clamped(wide, "x", 0, 1)

    def test_sum_value(self):
        clip = clamp(DOM, "x", 0.0, 1.0)
        s = sum_clamped(clip.output_domain, "x", 0.0, 1.0)
        assert s(clip(ds([0.25, 2.0, -1.0]))) == 1.25

    def test_count(self):
        assert count(DOM)(ds([1, 2, 3])) == 3.0
        assert count(DOM, CHANGE_ONE).d_out(1) == 0


class TestPartitionSpec:
    def test_reassembly(self):
        spec = PartitionSpec.from_predicates([lambda r: r[0] < 0, lambda r: r[0] == 0, lambda r: r[0] > 0])
        x = ds([-2, -1, 0, 0, 4])
        pieces = spec.split(x)
        assert [values(p) for p in pieces] == [[-2.0, -1.0], [0.0, 0.0], [4.0]]
        assert ds([v for p in pieces for v in values(p)]) == x

    def test_overlap_detected(self):
        spec = PartitionSpec.from_predicates([lambda r: r[0] <= 0, lambda r: r[0] >= 0])
        with pytest.raises(OverlappingPieces):
            spec.split(ds([0.0]))

    def test_gap_detected(self):
        spec = PartitionSpec.from_predicates([lambda r: r[0] < 0, lambda r: r[0] > 0])
        with pytest.raises(OverlappingPieces):
            spec.split(ds([0.0]))

    def test_by_key(self, people_schema, people):
        spec = PartitionSpec.by_key(lambda r: r[3], ["Lyon", "Nice", "Paris"])
        assert [len(p) for p in spec.split(people)] == [2, 1, 2]
        assert spec.labels == ("Lyon", "Nice", "Paris")

    def test_random_assignment_depends_only_on_record(self):
        spec = PartitionSpec.random(4, 9)
        x = ds(range(40))
        y = ds(list(range(40)) + [100.0])
        changed = sum(edit_distance(p.records, q.records) for p, q in zip(spec.split(x), spec.split(y)))
        assert changed == 1
        assert spec.split(x) == PartitionSpec.random(4, 9).split(x)
        assert spec.split(x) != PartitionSpec.random(4, 10).split(x)

    def test_zero_pieces(self):
        with pytest.raises(InvalidArity):
            PartitionSpec.random(0, 1)
