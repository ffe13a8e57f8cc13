"""Checking privacy claims: exact enumeration and a sampling-based hypothesis test.

The exact check needs a mechanism exposing its output distribution
(``Measurement.pmf``).  The stochastic test treats the mechanism as a
black box: a PASS only means no violation was detected at the requested
significance, never that the claim is proved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import stats

from privcalc.core import (
    ABSOLUTE,
    APPROX_DP,
    CHANGE_ONE,
    SYMMETRIC,
    Dataset,
    Measurement,
    Metric,
    PrivacyLoss,
)
from privcalc.errors import InsufficientSamples, NotEnumerable

EXACT_TOLERANCE = 1e-12


# --------------------------------------------------------------------------
# Exact check
# --------------------------------------------------------------------------


@dataclass
class Witness:
    x: Any
    x_prime: Any
    outcomes: tuple
    p: float
    q: float


@dataclass
class ExactVerdict:
    passed: bool
    claimed: PrivacyLoss
    observed: float
    witness: Optional[Witness] = None

    def __bool__(self):
        return self.passed


def _adjacent(adjacency) -> Callable[[Any, Any], bool]:
    if isinstance(adjacency, Metric):
        return lambda a, b: adjacency.distance(a, b) == 1
    return adjacency


def max_divergence(p: dict, q: dict) -> tuple[float, Any]:
    """Max over outcome sets of log(P(S)/Q(S)); attained on a single outcome."""
    best, arg = -math.inf, None
    for o, po in p.items():
        if po <= 0:
            continue
        qo = q.get(o, 0.0)
        r = math.inf if qo <= 0 else math.log(po / qo)
        if r > best:
            best, arg = r, o
    return best, arg


def delta_divergence(p: dict, q: dict, epsilon: float) -> tuple[float, tuple]:
    """Max over S of P(S) - e^eps Q(S), with the maximizing set."""
    scale = math.exp(epsilon)
    worst = tuple(o for o, po in p.items() if po - scale * q.get(o, 0.0) > 0)
    return math.fsum(p[o] - scale * q.get(o, 0.0) for o in worst), worst


def exact_divergence_check(
    m: Measurement,
    input_space: Sequence[Any],
    adjacency,
    claimed,
    max_inputs: int = 6,
) -> ExactVerdict:
    """Enumerate every adjacent pair in ``input_space`` and compare the exact
    output distributions against ``claimed`` (a PrivacyLoss or a float epsilon)."""
    if m.pmf is None:
        raise NotEnumerable(f"{m.name} exposes no exact output distribution")
    inputs = list(input_space)
    if len(inputs) > max_inputs:
        raise ValueError(f"input space has {len(inputs)} elements, limit is {max_inputs}")
    if not isinstance(claimed, PrivacyLoss):
        claimed = PrivacyLoss.pure(claimed)
    adj = _adjacent(adjacency)
    pmfs = [m.pmf(x) for x in inputs]
    approx = claimed.measure is APPROX_DP

    observed, witness = -math.inf if not approx else 0.0, None
    for i, x in enumerate(inputs):
        for j, y in enumerate(inputs):
            if i == j or not adj(x, y):
                continue
            p, q = pmfs[i], pmfs[j]
            if approx:
                d, S = delta_divergence(p, q, claimed.epsilon)
                if d > observed or witness is None:
                    observed = d
                    witness = Witness(x, y, S, math.fsum(p[o] for o in S), math.fsum(q.get(o, 0.0) for o in S))
            else:
                d, o = max_divergence(p, q)
                if d > observed:
                    observed = d
                    witness = Witness(x, y, (o,), p[o], q.get(o, 0.0))
    bound = claimed.delta if approx else claimed.epsilon
    if observed == -math.inf:
        observed = 0.0
    passed = observed <= bound + EXACT_TOLERANCE
    return ExactVerdict(passed, claimed, observed, None if passed else witness)


# --------------------------------------------------------------------------
# Stochastic test
# --------------------------------------------------------------------------


def candidate_pairs(m: Measurement) -> list[tuple[Any, Any]]:
    """Fixed catalogue of adjacent inputs for a mechanism.

    Datasets must have a single numeric column.  Catalogue: empty vs
    singleton, one record above / below a constant dataset, and a spread
    dataset with one record removed (or, under change-one adjacency, one
    record changed up, down, or far away).
    """
    if m.input_metric is ABSOLUTE:
        return [(0.0, 1.0)]
    schema = m.input_domain.schema
    if len(schema.columns) != 1 or schema.columns[0].kind not in ("int64", "float64"):
        raise NotEnumerable("the pair catalogue needs a dataset with one numeric column")
    cast = int if schema.columns[0].kind == "int64" else float

    def ds(vals):
        return Dataset(schema, [(cast(v),) for v in vals])

    if m.input_metric is SYMMETRIC:
        raw = [
            ([], [1]),
            ([1, 1, 1], [1, 1, 1, 2]),
            ([1, 1, 1], [1, 1, 1, 0]),
            (list(range(10)), list(range(9))),
        ]
    elif m.input_metric is CHANGE_ONE:
        raw = [
            ([1, 1, 1], [1, 1, 2]),
            ([1, 1, 1], [1, 1, 0]),
            ([1, 1, 1, 1], [1, 1, 1, 5]),
            ([0], [1]),
        ]
    else:
        raise NotEnumerable(f"no pair catalogue for {m.input_metric.name}")
    return [(ds(a), ds(b)) for a, b in raw]


@dataclass
class EventRow:
    pair: int
    direction: int
    event: str
    threshold: float
    p1: float
    p2: float
    pvalue: float


@dataclass
class Counterexample:
    pair: int
    direction: int
    x: Any
    x_prime: Any
    event: str
    threshold: float
    p1: float
    p2: float
    pvalue: float


@dataclass
class StochasticVerdict:
    passed: bool
    claimed_epsilon: float
    samples: int
    significance: float
    seed: int
    n_tests: int
    min_pvalue: float
    rows: list[EventRow] = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    counterexample: Optional[Counterexample] = None
    pairs: list = field(default_factory=list)

    def __bool__(self):
        return self.passed

    @property
    def summary(self) -> str:
        if self.passed:
            return "PASS: no violation detected at this significance (evidence, not proof)"
        return "FAIL: claim rejected; counterexample attached"

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, Dataset):
                return [list(r) for r in v.records]
            return v

        out = {
            "verdict": "PASS" if self.passed else "FAIL",
            "summary": self.summary,
            "claimed_epsilon": self.claimed_epsilon,
            "samples": self.samples,
            "significance": self.significance,
            "seed": self.seed,
            "n_tests": self.n_tests,
            "bonferroni_level": self.significance / self.n_tests if self.n_tests else None,
            "min_pvalue": self.min_pvalue,
            "pairs": [[enc(a), enc(b)] for a, b in self.pairs],
            "thresholds": {str(k): v for k, v in self.thresholds.items()},
            "tests": [vars(r) for r in self.rows],
            "counterexample": None,
        }
        if self.counterexample is not None:
            c = dict(vars(self.counterexample))
            c["x"], c["x_prime"] = enc(c["x"]), enc(c["x_prime"])
            out["counterexample"] = c
        return out


def _stream(seed: int, pair: int, side: int, phase: int) -> np.random.Generator:
    return np.random.default_rng([seed, pair, side, phase])


def _draw(m: Measurement, x, seed: int, pair: int, side: int, phase: int, n: int) -> np.ndarray:
    out = np.asarray(m.sample(x, _stream(seed, pair, side, phase), n), dtype=float)
    if out.ndim != 1:
        raise NotEnumerable("the stochastic test handles scalar-valued mechanisms only")
    return out


def _event_counts(sample: np.ndarray, thresholds: np.ndarray) -> dict[str, np.ndarray]:
    s = np.sort(sample)
    above = len(s) - np.searchsorted(s, thresholds, side="right")
    return {">": above, "<=": len(s) - above}


def _pvalue(c1: int, c2: int, n: int, epsilon: float, rng: np.random.Generator) -> float:
    """One-sided test of H0: p1 <= e^eps * p2 from counts out of n draws each.

    ``c1`` is thinned by e^-eps, after which H0 means the thinned rate is at
    most p2; the two counts are compared by a one-sided Fisher exact test.
    """
    thinned = int(rng.binomial(c1, math.exp(-epsilon))) if c1 > 0 else 0
    if thinned == 0:
        return 1.0
    return float(stats.hypergeom.sf(thinned - 1, 2 * n, thinned + c2, n))


def _test_pair(m, x, y, k, thresholds, epsilon, n, seed):
    a = _draw(m, x, seed, k, 0, 1, n)
    b = _draw(m, y, seed, k, 1, 1, n)
    ca, cb = _event_counts(a, thresholds), _event_counts(b, thresholds)
    thin = _stream(seed, k, 2, 2)
    rows = []
    for direction, (first, second) in enumerate(((ca, cb), (cb, ca))):
        for event in (">", "<="):
            for t, c1, c2 in zip(thresholds, first[event], second[event]):
                p = _pvalue(int(c1), int(c2), n, epsilon, thin)
                rows.append(EventRow(k, direction, event, float(t), float(c1) / n, float(c2) / n, p))
    return rows


def _thresholds(m, x, y, k, seed, n, grid) -> np.ndarray:
    pilot_n = max(1000, n // 10)
    pooled = np.concatenate([_draw(m, x, seed, k, 0, 0, pilot_n), _draw(m, y, seed, k, 1, 0, pilot_n)])
    levels = np.arange(1, grid + 1) / (grid + 1)
    return np.unique(np.quantile(pooled, levels))


def stochastic_test(
    m: Measurement,
    claimed_epsilon: float,
    samples: int = 100_000,
    significance: float = 0.01,
    seed: int = 0,
    pairs: Optional[Sequence[tuple[Any, Any]]] = None,
    grid: int = 9,
) -> StochasticVerdict:
    """Search for a half-line event whose probability ratio between adjacent
    inputs exceeds ``e^claimed_epsilon`` beyond sampling error.

    Thresholds come from a separate pilot sample; every (pair, direction,
    event) combination is one test, Bonferroni-corrected.
    """
    if samples < 10_000:
        raise InsufficientSamples(f"need at least 10^4 samples, got {samples}")
    if not 0 < significance <= 0.1:
        raise ValueError(f"significance must lie in (0, 0.1], got {significance}")
    pairs = list(pairs) if pairs is not None else candidate_pairs(m)
    if math.isinf(claimed_epsilon):
        return StochasticVerdict(True, claimed_epsilon, samples, significance, seed, 0, 1.0, pairs=pairs)

    rows: list[EventRow] = []
    thresholds = {}
    for k, (x, y) in enumerate(pairs):
        ts = _thresholds(m, x, y, k, seed, samples, grid)
        thresholds[k] = ts.tolist()
        rows.extend(_test_pair(m, x, y, k, ts, claimed_epsilon, samples, seed))

    level = significance / len(rows)
    worst = min(rows, key=lambda r: r.pvalue)
    verdict = StochasticVerdict(
        worst.pvalue >= level, claimed_epsilon, samples, significance, seed, len(rows), worst.pvalue,
        rows, thresholds, pairs=pairs,
    )
    if not verdict.passed:
        x, y = pairs[worst.pair]
        if worst.direction == 1:
            x, y = y, x
        verdict.counterexample = Counterexample(
            worst.pair, worst.direction, x, y, worst.event, worst.threshold, worst.p1, worst.p2, worst.pvalue
        )
    return verdict


def replay_counterexample(m: Measurement, verdict: StochasticVerdict) -> EventRow:
    """Recompute the test behind a verdict's counterexample from the same seeded streams."""
    cex = verdict.counterexample
    if cex is None:
        raise ValueError("verdict carries no counterexample")
    x, y = verdict.pairs[cex.pair]
    ts = np.asarray(verdict.thresholds[cex.pair])
    rows = _test_pair(m, x, y, cex.pair, ts, verdict.claimed_epsilon, verdict.samples, verdict.seed)
    for r in rows:
        if r.direction == cex.direction and r.event == cex.event and r.threshold == cex.threshold:
            return r
    raise LookupError("counterexample event not reproduced")
