"""Domains, metrics, privacy measures, and the Transformation/Measurement pair.

A Transformation is a deterministic function together with a stability map
bounding output distance by input distance.  A Measurement is a randomized
function together with a privacy map bounding the privacy loss between
output distributions by input distance.  Everything else in the package is
built by chaining and composing these two.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from privcalc.errors import (
    DataSchemaMismatch,
    DomainMismatch,
    IncomparableLoss,
    IncompatibleMetric,
    InvalidPrivacyMap,
    NegativeDistance,
    SchemaError,
)

CELL_KINDS = ("int64", "float64", "bool", "string")


# --------------------------------------------------------------------------
# Schema and Dataset
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    name: str
    kind: str


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if any(not n for n in names):
            raise SchemaError("column names must be non-empty")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        for c in self.columns:
            if c.kind not in CELL_KINDS:
                raise SchemaError(f"unknown cell kind {c.kind!r} for column {c.name!r}")

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "Schema":
        return cls(tuple(Column(n, k) for n, k in pairs))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    def kind(self, name: str) -> str:
        return self.columns[self.index(name)].kind

    def to_json(self) -> str:
        return json.dumps({"columns": [{"name": c.name, "kind": c.kind} for c in self.columns]})

    @classmethod
    def from_dict(cls, obj: dict) -> "Schema":
        try:
            return cls(tuple(Column(str(c["name"]), str(c["kind"])) for c in obj["columns"]))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema object: {obj!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Schema":
        return cls.from_dict(json.loads(text))


def _coerce_cell(value: Any, kind: str) -> Any:
    if kind == "int64":
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise DataSchemaMismatch(f"expected int64, got {value!r}")
        return int(value)
    if kind == "float64":
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise DataSchemaMismatch(f"expected float64, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise DataSchemaMismatch("NaN cells are not allowed")
        return value
    if kind == "bool":
        if not isinstance(value, (bool, np.bool_)):
            raise DataSchemaMismatch(f"expected bool, got {value!r}")
        return bool(value)
    if not isinstance(value, str):
        raise DataSchemaMismatch(f"expected string, got {value!r}")
    return value


_TRUE = {"true", "1", "yes", "t"}
_FALSE = {"false", "0", "no", "f"}


def parse_cell(text: str, kind: str) -> Any:
    """Parse one CSV cell; failures raise instead of producing nulls."""
    try:
        if kind == "int64":
            return int(text)
        if kind == "float64":
            value = float(text)
            if math.isnan(value):
                raise ValueError("NaN")
            return value
        if kind == "bool":
            low = text.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        return text
    except ValueError as exc:
        raise DataSchemaMismatch(f"cannot parse {text!r} as {kind}") from exc


class Dataset:
    """Immutable multiset of records conforming to a schema.

    Records are stored in a canonical sorted order, so two datasets holding
    the same multiset compare (and hash) equal regardless of input order.
    """

    __slots__ = ("schema", "records")

    def __init__(self, schema: Schema, records: Iterable[Sequence[Any]] = ()):
        width = len(schema.columns)
        rows = []
        for rec in records:
            rec = tuple(rec)
            if len(rec) != width:
                raise DataSchemaMismatch(f"record {rec!r} has {len(rec)} cells, schema has {width}")
            rows.append(tuple(_coerce_cell(v, c.kind) for v, c in zip(rec, schema.columns)))
        rows.sort()
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "records", tuple(rows))

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @classmethod
    def from_values(cls, values: Iterable[Any], name: str = "x", kind: str = "float64") -> "Dataset":
        return cls(Schema.of((name, kind)), [(v,) for v in values])

    @classmethod
    def from_csv(cls, path, schema: Schema) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataSchemaMismatch(f"{path}: missing header row") from None
            if header != schema.names:
                raise DataSchemaMismatch(f"{path}: header {header} does not match schema {schema.names}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise DataSchemaMismatch(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
                rows.append(tuple(parse_cell(v, c.kind) for v, c in zip(row, schema.columns)))
        return cls(schema, rows)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and self.records == other.records

    def __hash__(self):
        return hash((self.schema, self.records))

    def __repr__(self):
        return f"Dataset({self.schema.names}, {list(self.records)!r})"

    def column(self, name: str) -> list[Any]:
        i = self.schema.index(name)
        return [r[i] for r in self.records]


# --------------------------------------------------------------------------
# Domains
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetDomain:
    """Datasets over ``schema``; ``bounds`` records statically known column ranges."""

    schema: Schema
    bounds: tuple[tuple[str, float, float], ...] = ()
    carrier = "dataset"

    def bounds_for(self, column: str) -> Optional[tuple[float, float]]:
        for name, lo, hi in self.bounds:
            if name == column:
                return lo, hi
        return None

    def with_bounds(self, column: str, lower: float, upper: float) -> "DatasetDomain":
        rest = tuple(b for b in self.bounds if b[0] != column)
        return replace(self, bounds=tuple(sorted(rest + ((column, float(lower), float(upper)),))))

    def accepts(self, other) -> bool:
        if not isinstance(other, DatasetDomain) or other.schema != self.schema:
            return False
        for name, lo, hi in self.bounds:
            have = other.bounds_for(name)
            if have is None or have[0] < lo or have[1] > hi:
                return False
        return True


@dataclass(frozen=True)
class ScalarDomain:
    lower: float = -math.inf
    upper: float = math.inf
    carrier = "scalar"

    def accepts(self, other) -> bool:
        return isinstance(other, ScalarDomain) and self.lower <= other.lower and other.upper <= self.upper


@dataclass(frozen=True)
class VectorDomain:
    length: Optional[int] = None
    lower: float = -math.inf
    upper: float = math.inf
    carrier = "vector"

    def accepts(self, other) -> bool:
        return (
            isinstance(other, VectorDomain)
            and (self.length is None or self.length == other.length)
            and self.lower <= other.lower
            and other.upper <= self.upper
        )


@dataclass(frozen=True)
class DatasetVectorDomain:
    piece: DatasetDomain
    pieces: int
    carrier = "datasets"

    def accepts(self, other) -> bool:
        return isinstance(other, DatasetVectorDomain) and other == self


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------


def _symmetric(a: Dataset, b: Dataset) -> float:
    ca, cb = Counter(a.records), Counter(b.records)
    return float(sum(abs(ca[k] - cb[k]) for k in ca.keys() | cb.keys()))


def _change_one(a: Dataset, b: Dataset) -> float:
    if len(a) != len(b):
        return math.inf
    common = sum((Counter(a.records) & Counter(b.records)).values())
    return float(len(a) - common)


def _absolute(a, b) -> float:
    return abs(float(a) - float(b))


def _l1(a, b) -> float:
    if len(a) != len(b):
        return math.inf
    return float(sum(abs(float(x) - float(y)) for x, y in zip(a, b)))


def _per_piece(a, b) -> float:
    if len(a) != len(b):
        return math.inf
    return float(sum(_symmetric(x, y) for x, y in zip(a, b)))


@dataclass(frozen=True)
class Metric:
    """A distance on one carrier kind.

    PerPieceDistance reports the sum of per-piece symmetric distances; the
    individual components are available from :func:`piece_distances`.
    """

    name: str
    carrier: str
    _fn: Callable[[Any, Any], float] = field(repr=False, compare=False)

    def distance(self, a, b) -> float:
        return self._fn(a, b)

    def __str__(self):
        return self.name


SYMMETRIC = Metric("SymmetricDistance", "dataset", _symmetric)
CHANGE_ONE = Metric("ChangeOneDistance", "dataset", _change_one)
ABSOLUTE = Metric("AbsoluteDistance", "scalar", _absolute)
L1 = Metric("L1Distance", "vector", _l1)
PER_PIECE = Metric("PerPieceDistance", "datasets", _per_piece)

METRICS = {m.name: m for m in (SYMMETRIC, CHANGE_ONE, ABSOLUTE, L1, PER_PIECE)}
DATASET_METRICS = (SYMMETRIC, CHANGE_ONE)


def metric_named(name: str) -> Metric:
    aliases = {"symmetric": SYMMETRIC, "change_one": CHANGE_ONE, "unbounded": SYMMETRIC, "bounded": CHANGE_ONE}
    if name in METRICS:
        return METRICS[name]
    if name.lower() in aliases:
        return aliases[name.lower()]
    raise IncompatibleMetric(f"unknown metric {name!r}")


def piece_distances(a: Sequence[Dataset], b: Sequence[Dataset]) -> list[float]:
    return [_symmetric(x, y) for x, y in zip(a, b)]


# --------------------------------------------------------------------------
# Privacy measures and losses
# --------------------------------------------------------------------------


class PrivacyMeasure(enum.Enum):
    PURE_DP = "PureDP"
    APPROX_DP = "ApproxDP"


PURE_DP = PrivacyMeasure.PURE_DP
APPROX_DP = PrivacyMeasure.APPROX_DP


@dataclass(frozen=True)
class PrivacyLoss:
    epsilon: float
    delta: float = 0.0
    measure: PrivacyMeasure = PURE_DP

    def __post_init__(self):
        if self.measure is PURE_DP and self.delta != 0:
            raise ValueError("PureDP losses carry no delta")
        if not (0.0 <= self.delta <= 1.0):
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")

    @classmethod
    def pure(cls, epsilon: float) -> "PrivacyLoss":
        return cls(float(epsilon))

    @classmethod
    def approx(cls, epsilon: float, delta: float) -> "PrivacyLoss":
        return cls(float(epsilon), float(delta), APPROX_DP)

    @classmethod
    def zero(cls, measure: PrivacyMeasure = PURE_DP) -> "PrivacyLoss":
        return cls(0.0, 0.0, measure)

    def _same(self, other: "PrivacyLoss"):
        if self.measure is not other.measure:
            raise IncomparableLoss(f"cannot combine {self.measure.value} with {other.measure.value}")

    def __add__(self, other: "PrivacyLoss") -> "PrivacyLoss":
        self._same(other)
        return PrivacyLoss(self.epsilon + other.epsilon, min(1.0, self.delta + other.delta), self.measure)

    def scale(self, d: float) -> "PrivacyLoss":
        return PrivacyLoss(self.epsilon * d, min(1.0, self.delta * d), self.measure)

    def max(self, other: "PrivacyLoss") -> "PrivacyLoss":
        self._same(other)
        return PrivacyLoss(max(self.epsilon, other.epsilon), max(self.delta, other.delta), self.measure)

    def __le__(self, other: "PrivacyLoss") -> bool:
        self._same(other)
        return self.epsilon <= other.epsilon and self.delta <= other.delta

    def __ge__(self, other: "PrivacyLoss") -> bool:
        return other <= self

    @property
    def is_zero(self) -> bool:
        return self.epsilon == 0 and self.delta == 0

    def as_dict(self) -> dict:
        if self.measure is PURE_DP:
            return {"measure": self.measure.value, "epsilon": self.epsilon}
        return {"measure": self.measure.value, "epsilon": self.epsilon, "delta": self.delta}


# --------------------------------------------------------------------------
# Stability and privacy maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityMap:
    """Bound on output distance as a function of input distance."""

    fn: Optional[Callable[[float], float]] = None
    linear_constant: Optional[float] = None

    def __post_init__(self):
        if self.fn is None and self.linear_constant is None:
            raise ValueError("StabilityMap needs a function or a linear constant")
        if self.linear_constant is not None and self.linear_constant < 0:
            raise ValueError("stability constant must be nonnegative")

    @classmethod
    def linear(cls, c: float) -> "StabilityMap":
        return cls(linear_constant=float(c))

    def __call__(self, d: float) -> float:
        if d < 0:
            raise NegativeDistance(f"distance {d} < 0")
        if self.linear_constant is not None:
            return self.linear_constant * d
        return float(self.fn(d))


@dataclass(frozen=True)
class PrivacyMap:
    """Bound on the privacy loss between output distributions, by input distance.

    ``per_unit`` is the linear closed form (loss at distance 1 scaled by d);
    for ApproxDP this is the conservative (d*eps, d*delta) extension.
    """

    measure: PrivacyMeasure = PURE_DP
    fn: Optional[Callable[[float], PrivacyLoss]] = None
    per_unit: Optional[PrivacyLoss] = None

    def __post_init__(self):
        if self.fn is None and self.per_unit is None:
            raise ValueError("PrivacyMap needs a function or a per-unit loss")
        if self.per_unit is not None and self.per_unit.measure is not self.measure:
            raise InvalidPrivacyMap("per-unit loss measure differs from the map's measure")

    @classmethod
    def linear(cls, epsilon: float, delta: Optional[float] = None) -> "PrivacyMap":
        if delta is None:
            return cls(PURE_DP, per_unit=PrivacyLoss.pure(epsilon))
        return cls(APPROX_DP, per_unit=PrivacyLoss.approx(epsilon, delta))

    def __call__(self, d: float) -> PrivacyLoss:
        if d < 0:
            raise NegativeDistance(f"distance {d} < 0")
        if self.per_unit is not None:
            return self.per_unit.scale(d)
        return self.fn(d)


def is_monotone(map_fn: Callable[[float], Any], grid: Sequence[float]) -> bool:
    """Check map_fn is nondecreasing over a sorted grid of distances."""
    grid = sorted(grid)
    values = [map_fn(d) for d in grid]
    for lo, hi in zip(values, values[1:]):
        if isinstance(lo, PrivacyLoss):
            if not lo <= hi:
                return False
        elif lo > hi:
            return False
    return True


# --------------------------------------------------------------------------
# Transformations and Measurements
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Transformation:
    input_domain: Any
    output_domain: Any
    input_metric: Metric
    output_metric: Metric
    function: Callable[[Any], Any]
    stability: StabilityMap
    name: str = "transformation"

    def __call__(self, x):
        return self.function(x)

    def d_out(self, d_in: float) -> float:
        return self.stability(d_in)


@dataclass(frozen=True)
class Measurement:
    """A randomized function ``function(x, rng)`` with a privacy map.

    ``sampler(x, rng, size)`` optionally draws many independent outputs at
    once; ``pmf(x)`` optionally returns the exact output distribution as a
    dict for finite-outcome mechanisms.
    """

    input_domain: Any
    input_metric: Metric
    output_measure: PrivacyMeasure
    function: Callable[[Any, np.random.Generator], Any]
    privacy: PrivacyMap
    name: str = "measurement"
    sampler: Optional[Callable[[Any, np.random.Generator, int], np.ndarray]] = field(default=None, compare=False)
    pmf: Optional[Callable[[Any], dict]] = field(default=None, compare=False)

    def __call__(self, x, rng=None):
        return self.function(x, as_rng(rng))

    def sample(self, x, rng, size: int) -> np.ndarray:
        rng = as_rng(rng)
        if self.sampler is not None:
            return self.sampler(x, rng, size)
        return np.array([self.function(x, rng) for _ in range(size)])

    def loss_at(self, d_in: float) -> PrivacyLoss:
        return loss_at(self, d_in)


def as_rng(seed_or_rng=None) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _check_carrier(domain, metric: Metric, side: str):
    carrier = getattr(domain, "carrier", None)
    if carrier != metric.carrier:
        raise IncompatibleMetric(f"{side} metric {metric.name} applies to {metric.carrier}, domain carrier is {carrier}")


def make_transformation(
    input_domain,
    output_domain,
    input_metric: Metric,
    output_metric: Metric,
    function: Callable[[Any], Any],
    stability: StabilityMap,
    name: str = "transformation",
) -> Transformation:
    _check_carrier(input_domain, input_metric, "input")
    _check_carrier(output_domain, output_metric, "output")
    if stability(0.0) != 0:
        raise ValueError("stability map must send 0 to 0")
    return Transformation(input_domain, output_domain, input_metric, output_metric, function, stability, name)


def make_measurement(
    input_domain,
    input_metric: Metric,
    measure: PrivacyMeasure,
    function: Callable[[Any, np.random.Generator], Any],
    privacy: PrivacyMap,
    name: str = "measurement",
    sampler=None,
    pmf=None,
) -> Measurement:
    _check_carrier(input_domain, input_metric, "input")
    if privacy.measure is not measure:
        raise InvalidPrivacyMap(f"privacy map produces {privacy.measure.value}, measurement declares {measure.value}")
    zero = privacy(0.0)
    if not zero.is_zero:
        raise InvalidPrivacyMap(f"privacy map at distance 0 must be zero loss, got {zero}")
    at_one = privacy(1.0)
    if at_one.epsilon < 0 or at_one.delta < 0:
        raise InvalidPrivacyMap(f"negative privacy loss {at_one}")
    return Measurement(input_domain, input_metric, measure, function, privacy, name, sampler, pmf)


def loss_at(m: Measurement, d_in: float) -> PrivacyLoss:
    if d_in < 0:
        raise NegativeDistance(f"distance {d_in} < 0")
    return m.privacy(d_in)


def require_compatible(produced_domain, produced_metric: Metric, consumer_domain, consumer_metric: Metric):
    """Raise DomainMismatch unless a producer's output can feed a consumer's input."""
    if produced_metric != consumer_metric:
        raise DomainMismatch(f"metric {produced_metric.name} does not match {consumer_metric.name}")
    if not consumer_domain.accepts(produced_domain):
        raise DomainMismatch(f"domain {produced_domain} is not accepted by {consumer_domain}")
