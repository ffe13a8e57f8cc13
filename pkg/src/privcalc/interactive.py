"""Interactive queryables with hierarchical budget agents.

Every queryable owns an agent.  A root agent is either a filter (enforces a
fixed budget) or an odometer (only meters).  Children created by
``partition`` share a group agent that charges its parent only for
increases of the childwise maximum; children created by ``spawn`` are
filters whose whole sub-budget is charged to the parent up front.

Accounting is exact: losses enter as floats and are converted to
``Fraction`` via their shortest decimal representation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple, Optional

import numpy as np

from privcalc.core import CHANGE_ONE, SYMMETRIC, Dataset, DatasetDomain, Measurement, Metric, PrivacyLoss
from privcalc.errors import BudgetExceeded, DomainMismatch, NegativeBudget
from privcalc.transforms import PartitionSpec


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


class Cost(NamedTuple):
    epsilon: Fraction
    delta: Fraction = Fraction(0)

    @classmethod
    def of(cls, loss) -> "Cost":
        if isinstance(loss, Cost):
            return loss
        if isinstance(loss, PrivacyLoss):
            return cls(to_fraction(loss.epsilon), to_fraction(loss.delta))
        if isinstance(loss, tuple):
            return cls(to_fraction(loss[0]), to_fraction(loss[1]))
        return cls(to_fraction(loss))

    def __add__(self, other: "Cost") -> "Cost":  # type: ignore[override]
        return Cost(self.epsilon + other.epsilon, self.delta + other.delta)

    def __sub__(self, other: "Cost") -> "Cost":
        return Cost(self.epsilon - other.epsilon, self.delta - other.delta)

    def fits(self, budget: "Cost") -> bool:
        return self.epsilon <= budget.epsilon and self.delta <= budget.delta

    def cmax(self, other: "Cost") -> "Cost":
        return Cost(max(self.epsilon, other.epsilon), max(self.delta, other.delta))

    def as_floats(self) -> tuple[float, float]:
        return float(self.epsilon), float(self.delta)


ZERO = Cost(Fraction(0), Fraction(0))


# --------------------------------------------------------------------------
# Agents
# --------------------------------------------------------------------------


class BudgetAgent:
    """Approves or rejects budget requests; ``spent`` is everything granted here."""

    def __init__(self):
        self.spent = ZERO
        self.ledger: list[Cost] = []

    def can_afford(self, cost: Cost) -> bool:
        raise NotImplementedError

    def _commit(self, cost: Cost):
        raise NotImplementedError

    def remaining(self) -> Optional[Cost]:
        """Largest request this agent would approve; ``None`` means unbounded."""
        raise NotImplementedError

    def request(self, cost: Cost):
        """All-or-nothing: either every agent up the chain records the charge, or none does."""
        if not self.can_afford(cost):
            raise BudgetExceeded(f"request of epsilon={float(cost.epsilon):g} exceeds the remaining budget")
        self._commit(cost)

    def _record(self, cost: Cost):
        self.spent = self.spent + cost
        self.ledger.append(cost)


class RootAgent(BudgetAgent):
    def __init__(self, budget: Optional[Cost], mode: str = "filter"):
        super().__init__()
        if mode not in ("filter", "odometer"):
            raise ValueError(f"mode must be 'filter' or 'odometer', got {mode!r}")
        self.mode = mode
        self.budget = budget

    def can_afford(self, cost: Cost) -> bool:
        if self.mode == "odometer":
            return True
        return (self.spent + cost).fits(self.budget)

    def _commit(self, cost: Cost):
        self._record(cost)

    def remaining(self) -> Optional[Cost]:
        if self.mode == "odometer":
            return None
        return self.budget - self.spent


class SequentialAgent(BudgetAgent):
    """Filter over a sub-budget already paid for by the parent."""

    def __init__(self, budget: Cost):
        super().__init__()
        self.budget = budget

    def can_afford(self, cost: Cost) -> bool:
        return (self.spent + cost).fits(self.budget)

    def _commit(self, cost: Cost):
        self._record(cost)

    def remaining(self) -> Optional[Cost]:
        return self.budget - self.spent


class PartitionGroup:
    """Shared accounting for the children of one partition call."""

    def __init__(self, parent: BudgetAgent, size: int, metric: Metric):
        self.parent = parent
        self.totals = [ZERO] * size
        self.metric = metric

    def _reduce(self, totals: list[Cost]) -> Cost:
        if self.metric is SYMMETRIC:
            out = ZERO
            for t in totals:
                out = out.cmax(t)
            return out
        eps = sorted((t.epsilon for t in totals), reverse=True)[:2]
        dl = sorted((t.delta for t in totals), reverse=True)[:2]
        return Cost(sum(eps, Fraction(0)), sum(dl, Fraction(0)))

    def increment(self, index: int, cost: Cost) -> Cost:
        new = list(self.totals)
        new[index] = new[index] + cost
        return self._reduce(new) - self._reduce(self.totals)

    def threshold(self, index: int) -> Cost:
        """Value child ``index`` may grow to before the parent is charged."""
        others = self.totals[:index] + self.totals[index + 1:]
        mine = self.totals[index]
        if self.metric is SYMMETRIC:
            cap = ZERO
            for t in others:
                cap = cap.cmax(t)
            return cap.cmax(mine)
        # top-two sum: free growth only up to the second-largest other total
        eps_others = sorted((t.epsilon for t in others), reverse=True)
        dl_others = sorted((t.delta for t in others), reverse=True)
        eps_cap = eps_others[1] if len(eps_others) > 1 else Fraction(0)
        dl_cap = dl_others[1] if len(dl_others) > 1 else Fraction(0)
        return Cost(max(eps_cap, mine.epsilon), max(dl_cap, mine.delta))


class PartitionChildAgent(BudgetAgent):
    def __init__(self, group: PartitionGroup, index: int):
        super().__init__()
        self.group = group
        self.index = index

    def can_afford(self, cost: Cost) -> bool:
        return self.group.parent.can_afford(self.group.increment(self.index, cost))

    def _commit(self, cost: Cost):
        inc = self.group.increment(self.index, cost)
        self.group.parent._commit(inc)
        self.group.totals[self.index] = self.group.totals[self.index] + cost
        self._record(cost)

    def remaining(self) -> Optional[Cost]:
        up = self.group.parent.remaining()
        if up is None:
            return None
        return self.group.threshold(self.index) - self.group.totals[self.index] + up


# --------------------------------------------------------------------------
# Queryables
# --------------------------------------------------------------------------


@dataclass
class TranscriptEntry:
    seq: int
    node: str
    query: str
    epsilon: float
    delta: float
    answer: Any
    digest: str

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "node": self.node, "query": self.query, "epsilon": self.epsilon,
             "delta": self.delta, "answer": self.answer, "digest": self.digest},
            sort_keys=True,
        )


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _digest(answer) -> str:
    return hashlib.sha256(json.dumps(answer, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Session:
    """State shared by every queryable in one tree: RNG, transcript, event log."""

    rng: np.random.Generator
    transcript: list[TranscriptEntry] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    nodes: dict = field(default_factory=dict)
    _next: int = 0

    def new_id(self) -> str:
        nid = f"q{self._next}"
        self._next += 1
        return nid

    def export_transcript(self, path):
        with open(path, "w") as fh:
            for entry in self.transcript:
                fh.write(entry.to_json() + "\n")


class Queryable:
    """Private data behind a budget agent; only measurement answers leave it."""

    def __init__(self, data: Dataset, metric: Metric, agent: BudgetAgent, session: Session, parent: Optional["Queryable"] = None):
        self._data = data
        self.metric = metric
        self.agent = agent
        self.session = session
        self.parent = parent
        self.children: list[Queryable] = []
        self.id = session.new_id()
        self.domain = DatasetDomain(data.schema)
        session.nodes[self.id] = self

    @property
    def spent(self) -> Cost:
        return self.agent.spent

    def remaining(self) -> Optional[Cost]:
        return self.agent.remaining()

    def query(self, m: Measurement):
        if m.input_metric != self.metric:
            raise DomainMismatch(f"measurement expects {m.input_metric.name}, queryable uses {self.metric.name}")
        if not m.input_domain.accepts(self.domain):
            raise DomainMismatch(f"measurement {m.name} does not accept this queryable's data")
        cost = Cost.of(m.loss_at(1))
        self.agent.request(cost)
        answer = _jsonable(m(self._data, self.session.rng))
        s = self.session
        s.events.append({"type": "query", "node": self.id, "cost": cost})
        eps, dl = cost.as_floats()
        s.transcript.append(TranscriptEntry(len(s.transcript), self.id, m.name, eps, dl, answer, _digest(answer)))
        return answer

    def partition(self, spec: PartitionSpec) -> list["Queryable"]:
        pieces = spec.split(self._data)
        group = PartitionGroup(self.agent, spec.m, self.metric)
        kids = [
            Queryable(piece, SYMMETRIC, PartitionChildAgent(group, i), self.session, self)
            for i, piece in enumerate(pieces)
        ]
        self.children.extend(kids)
        self.session.events.append(
            {"type": "partition", "node": self.id, "children": [k.id for k in kids], "metric": self.metric.name}
        )
        return kids

    def spawn(self, sub_budget) -> "Queryable":
        cost = Cost.of(sub_budget)
        if cost.epsilon < 0 or cost.delta < 0:
            raise NegativeBudget(f"sub-budget must be nonnegative, got {sub_budget}")
        self.agent.request(cost)
        kid = Queryable(self._data, self.metric, SequentialAgent(cost), self.session, self)
        self.children.append(kid)
        self.session.events.append({"type": "spawn", "node": self.id, "child": kid.id, "budget": cost})
        return kid


def make_root(dataset: Dataset, metric: Metric = SYMMETRIC, budget=None, mode: str = "filter", seed=None) -> Queryable:
    """Root queryable over ``dataset``.  ``budget`` is required in filter mode."""
    if mode == "filter":
        if budget is None:
            raise NegativeBudget("filter mode needs a budget")
        cost = Cost.of(budget)
        if cost.epsilon < 0 or cost.delta < 0 or (isinstance(budget, float) and math.isnan(budget)):
            raise NegativeBudget(f"budget must be nonnegative, got {budget}")
    else:
        cost = None
    if metric not in (SYMMETRIC, CHANGE_ONE):
        raise DomainMismatch(f"queryables hold datasets; {metric.name} is not a dataset metric")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Queryable(dataset, metric, RootAgent(cost, mode), Session(rng))
