"""Stable dataset transformations: map, multi-map, filter, clamp, sum, count, partition."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

from privcalc.core import (
    ABSOLUTE,
    CHANGE_ONE,
    PER_PIECE,
    SYMMETRIC,
    Dataset,
    DatasetDomain,
    DatasetVectorDomain,
    Metric,
    ScalarDomain,
    Schema,
    StabilityMap,
    Transformation,
    make_transformation,
)
from privcalc.errors import (
    BoundsInverted,
    IncompatibleMetric,
    InvalidArity,
    OverlappingPieces,
    UnclampedDomain,
)

Record = tuple


def _domain(d) -> DatasetDomain:
    return d if isinstance(d, DatasetDomain) else DatasetDomain(d)


def _dataset_metric(metric: Metric) -> Metric:
    if metric not in (SYMMETRIC, CHANGE_ONE):
        raise IncompatibleMetric(f"{metric.name} is not a dataset metric")
    return metric


def map_rows(domain, f: Callable[[Record], Record], out_schema: Optional[Schema] = None, metric: Metric = SYMMETRIC) -> Transformation:
    """Apply ``f`` to every record.  1-stable under either dataset metric."""
    dom = _domain(domain)
    metric = _dataset_metric(metric)
    out_schema = out_schema or dom.schema

    def run(x: Dataset) -> Dataset:
        return Dataset(out_schema, [f(r) for r in x.records])

    return make_transformation(
        dom, DatasetDomain(out_schema), metric, metric, run, StabilityMap.linear(1), "map_rows"
    )


def multi_map(domain, fs: Sequence[Callable[[Record], Record]], out_schema: Optional[Schema] = None, metric: Metric = SYMMETRIC) -> Transformation:
    """Emit ``f_j(x_i)`` for every record and every ``f_j``; k-stable for k functions."""
    fs = list(fs)
    if not fs:
        raise InvalidArity("multi_map needs at least one function")
    dom = _domain(domain)
    metric = _dataset_metric(metric)
    out_schema = out_schema or dom.schema

    def run(x: Dataset) -> Dataset:
        return Dataset(out_schema, [f(r) for r in x.records for f in fs])

    return make_transformation(
        dom, DatasetDomain(out_schema), metric, metric, run, StabilityMap.linear(len(fs)), f"multi_map[{len(fs)}]"
    )


def filter_rows(domain, pred: Callable[[Record], bool], metric: Metric = SYMMETRIC) -> Transformation:
    """Keep records satisfying ``pred``.

    Under ChangeOneDistance the output size is no longer fixed, so the
    output is measured in SymmetricDistance with constant 2.
    """
    dom = _domain(domain)
    metric = _dataset_metric(metric)

    def run(x: Dataset) -> Dataset:
        return Dataset(x.schema, [r for r in x.records if pred(r)])

    if metric is SYMMETRIC:
        return make_transformation(dom, dom, SYMMETRIC, SYMMETRIC, run, StabilityMap.linear(1), "filter_rows")
    return make_transformation(dom, dom, CHANGE_ONE, SYMMETRIC, run, StabilityMap.linear(2), "filter_rows")


def _check_bounds(lower: float, upper: float):
    if not lower <= upper:
        raise BoundsInverted(f"lower {lower} > upper {upper}")


def clamp(domain, column: str, lower: float, upper: float, metric: Metric = SYMMETRIC) -> Transformation:
    """Clip one numeric column into ``[lower, upper]`` and record the bound in the domain."""
    _check_bounds(lower, upper)
    dom = _domain(domain)
    metric = _dataset_metric(metric)
    idx = dom.schema.index(column)
    kind = dom.schema.kind(column)
    if kind not in ("int64", "float64"):
        raise IncompatibleMetric(f"cannot clamp non-numeric column {column!r} ({kind})")
    out_schema = dom.schema
    if kind == "int64" and not (float(lower).is_integer() and float(upper).is_integer()):
        cols = list(dom.schema.columns)
        cols[idx] = type(cols[idx])(column, "float64")
        out_schema = Schema(tuple(cols))
        kind = "float64"
    cast = int if kind == "int64" else float
    lo, hi = cast(lower), cast(upper)

    def run(x: Dataset) -> Dataset:
        rows = []
        for r in x.records:
            r = list(r)
            r[idx] = min(max(r[idx], lo), hi)
            rows.append(r)
        return Dataset(out_schema, rows)

    out_dom = DatasetDomain(out_schema, dom.bounds if out_schema == dom.schema else ()).with_bounds(column, lower, upper)
    return make_transformation(dom, out_dom, metric, metric, run, StabilityMap.linear(1), f"clamp[{column}]")


def sum_sensitivity(lower: float, upper: float, metric: Metric = SYMMETRIC) -> float:
    """Global sensitivity of a sum over values known to lie in ``[lower, upper]``."""
    _check_bounds(lower, upper)
    if metric is CHANGE_ONE:
        return float(upper - lower)
    return float(max(abs(lower), abs(upper)))


def sum_clamped(domain, column: str, lower: float, upper: float, metric: Metric = SYMMETRIC) -> Transformation:
    """Sum of a column whose domain already carries bounds within ``[lower, upper]``.

    Bounds must come from the domain (typically the output of :func:`clamp`);
    the data itself is never inspected to find them.
    """
    _check_bounds(lower, upper)
    dom = _domain(domain)
    metric = _dataset_metric(metric)
    have = dom.bounds_for(column)
    if have is None or have[0] < lower or have[1] > upper:
        raise UnclampedDomain(f"domain does not bound column {column!r} within [{lower}, {upper}]")
    idx = dom.schema.index(column)

    def run(x: Dataset) -> float:
        return float(math.fsum(r[idx] for r in x.records))

    c = sum_sensitivity(lower, upper, metric)
    return make_transformation(dom, ScalarDomain(), metric, ABSOLUTE, run, StabilityMap.linear(c), f"sum[{column}]")


def count(domain, metric: Metric = SYMMETRIC) -> Transformation:
    """Number of records.  1-stable when n is private, 0-stable when n is fixed."""
    dom = _domain(domain)
    metric = _dataset_metric(metric)
    c = 1.0 if metric is SYMMETRIC else 0.0

    def run(x: Dataset) -> float:
        return float(len(x))

    return make_transformation(dom, ScalarDomain(0.0), metric, ABSOLUTE, run, StabilityMap.linear(c), "count")


# --------------------------------------------------------------------------
# Partitions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionSpec:
    """Assignment of every possible record to exactly one of ``m`` pieces."""

    m: int
    assign: Callable[[Record], int]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise InvalidArity("a partition needs at least one piece")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.m)))

    @classmethod
    def from_predicates(cls, preds: Sequence[Callable[[Record], bool]], labels: Sequence[str] = ()) -> "PartitionSpec":
        """Pieces defined by predicates; each record must satisfy exactly one.

        Disjointness and totality are checked per record at evaluation time.
        """
        preds = tuple(preds)

        def assign(r: Record) -> int:
            hits = [i for i, p in enumerate(preds) if p(r)]
            if len(hits) != 1:
                raise OverlappingPieces(f"record {r!r} matches pieces {hits}; expected exactly one")
            return hits[0]

        return cls(len(preds), assign, tuple(labels))

    @classmethod
    def by_key(cls, key: Callable[[Record], Any], keys: Sequence[Any]) -> "PartitionSpec":
        """One piece per listed key value; records with other keys raise OverlappingPieces."""
        index = {k: i for i, k in enumerate(keys)}

        def assign(r: Record) -> int:
            try:
                return index[key(r)]
            except KeyError:
                raise OverlappingPieces(f"record {r!r} has key {key(r)!r} outside {list(keys)}") from None

        return cls(len(keys), assign, tuple(str(k) for k in keys))

    @classmethod
    def random(cls, m: int, seed: int) -> "PartitionSpec":
        """Seeded pseudo-random partition of the record universe.

        Assignment hashes (seed, record value), so it is a fixed function of
        the record and adding or removing a record never moves any other.
        """

        def assign(r: Record) -> int:
            digest = hashlib.blake2b(repr((seed, r)).encode(), digest_size=8).digest()
            return int.from_bytes(digest, "big") % m

        return cls(m, assign)

    def split(self, x: Dataset) -> tuple[Dataset, ...]:
        buckets: list[list] = [[] for _ in range(self.m)]
        for r in x.records:
            i = self.assign(r)
            if not 0 <= i < self.m:
                raise OverlappingPieces(f"record {r!r} assigned to piece {i} outside 0..{self.m - 1}")
            buckets[i].append(r)
        return tuple(Dataset(x.schema, b) for b in buckets)


def partition_stability(metric: Metric) -> float:
    return 1.0 if metric is SYMMETRIC else 2.0


def partition(domain, spec: PartitionSpec, metric: Metric = SYMMETRIC) -> Transformation:
    """Split a dataset into disjoint pieces.

    Output distance is the sum of per-piece symmetric distances: at most
    d_in when n is private, at most 2*d_in when records are changed in
    place (a changed record may move between pieces).
    """
    dom = _domain(domain)
    metric = _dataset_metric(metric)
    out = DatasetVectorDomain(DatasetDomain(dom.schema, dom.bounds), spec.m)
    return make_transformation(
        dom, out, metric, PER_PIECE, spec.split, StabilityMap.linear(partition_stability(metric)), f"partition[{spec.m}]"
    )
