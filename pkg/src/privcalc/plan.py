"""JSON batch plans: validation, construction, static budget check, execution.

A plan is checked against ``plan.schema.json``, compiled into measurements,
and its total privacy loss compared with the declared budget before the
CSV is opened.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional

import jsonschema
import numpy as np

from privcalc import mechanisms, transforms
from privcalc.combinators import chain_mt, chain_tt, compose_basic, compose_parallel
from privcalc.core import (
    ABSOLUTE,
    SYMMETRIC,
    Dataset,
    DatasetDomain,
    Measurement,
    Metric,
    Schema,
    Transformation,
    metric_named,
)
from privcalc.errors import BudgetViolation, PlanInvalid, PrivCalcError
from privcalc.interactive import Cost
from privcalc.predicates import compile_predicate
from privcalc.sampagg import ESTIMATORS, sample_and_aggregate

PLAN_VERSION = 1

ROW_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "identity": lambda v: float(v),
    "square": lambda v: float(v) * float(v),
    "abs": lambda v: abs(float(v)),
    "negate": lambda v: -float(v),
    "log1p": lambda v: math.log1p(float(v)),
}


def plan_schema() -> dict:
    return json.loads(resources.files("privcalc").joinpath("plan.schema.json").read_text())


def validate_plan(plan: dict):
    validator = jsonschema.Draft202012Validator(plan_schema())
    errors = sorted(validator.iter_errors(plan), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise PlanInvalid(f"plan invalid at {where}: {e.message}")


# --------------------------------------------------------------------------
# Building
# --------------------------------------------------------------------------


def _map_column(domain: DatasetDomain, column: str, fn_name: str, metric: Metric) -> Transformation:
    schema = domain.schema
    idx = schema.index(column)
    fn = ROW_FUNCTIONS[fn_name]
    cols = list(schema.columns)
    cols[idx] = type(cols[idx])(column, "float64")
    out = Schema(tuple(cols))

    def f(r):
        r = list(r)
        r[idx] = fn(r[idx])
        return tuple(r)

    return transforms.map_rows(domain, f, out, metric)


def _build_transformation(node: dict, domain, metric: Metric) -> Transformation:
    op = node["op"]
    if op == "clamp":
        return transforms.clamp(domain, node["column"], node["lower"], node["upper"], metric)
    if op == "filter":
        return transforms.filter_rows(domain, compile_predicate(node["where"], domain.schema), metric)
    if op == "map":
        return _map_column(domain, node["column"], node["fn"], metric)
    if op == "count":
        return transforms.count(domain, metric)
    if op == "sum":
        return transforms.sum_clamped(domain, node["column"], node["lower"], node["upper"], metric)
    raise PlanInvalid(f"{op!r} is not a transformation")


def _partition_spec(obj: dict, schema: Schema) -> transforms.PartitionSpec:
    if "by" in obj:
        pred = compile_predicate(obj["by"], schema)
        return transforms.PartitionSpec.from_predicates(
            [pred, lambda r: not pred(r)], [obj["by"], f"NOT ({obj['by']})"]
        )
    preds = [compile_predicate(p, schema) for p in obj["predicates"]]
    return transforms.PartitionSpec.from_predicates(preds, obj["predicates"])


def _value_column(domain: DatasetDomain, column: Optional[str], metric: Metric) -> Transformation:
    schema = domain.schema
    if column is None:
        if len(schema.columns) != 1:
            raise PlanInvalid("sample_aggregate needs 'column' when the schema has several columns")
        column = schema.columns[0].name
    idx = schema.index(column)
    return transforms.map_rows(domain, lambda r: (float(r[idx]),), Schema.of(("value", "float64")), metric)


def build_measurement(node: dict, domain, metric: Metric) -> Measurement:
    op = node["op"]
    if op == "noisy_count":
        return mechanisms.noisy_count(domain, node["epsilon"], metric)
    if op == "noisy_sum":
        return mechanisms.noisy_sum(domain, node["column"], node["lower"], node["upper"], node["epsilon"], metric)
    if op == "noisy_average":
        idx = domain.schema.index(node["column"])
        return mechanisms.noisy_average(domain, lambda r: float(r[idx]), node["epsilon"], metric)
    if op == "laplace":
        if metric is not ABSOLUTE:
            raise PlanInvalid("laplace applies to scalars; chain it after count or sum")
        return mechanisms.laplace_noise(node["scale"], domain)
    if op == "randomized_response":
        if metric is not ABSOLUTE:
            raise PlanInvalid("randomized_response applies to bits (scalars)")
        return mechanisms.randomized_response(node["p"])
    if op == "sample_aggregate":
        if node["estimator"] not in ESTIMATORS:
            raise PlanInvalid(f"unknown estimator {node['estimator']!r}; known: {sorted(ESTIMATORS)}")
        to_value = _value_column(domain, node.get("column"), metric)
        lo, hi = node["range"]
        inner = sample_and_aggregate(
            to_value.output_domain, node["estimator"], node["blocks"], node.get("seed", 0),
            (lo, hi), node["epsilon"], metric,
        )
        return chain_mt(inner, to_value)
    if op == "compose":
        return compose_basic([build_measurement(c, domain, metric) for c in node["children"]])
    if op == "parallel":
        spec = _partition_spec(node["partition"], domain.schema)
        piece = DatasetDomain(domain.schema, domain.bounds)
        kids = [build_measurement(c, piece, SYMMETRIC) for c in node["children"]]
        return compose_parallel(domain, spec, kids, metric)
    if op == "chain":
        stages = node["stages"]
        t = None
        cur_dom, cur_metric = domain, metric
        for stage in stages[:-1]:
            nxt = _build_transformation(stage, cur_dom, cur_metric)
            t = nxt if t is None else chain_tt(nxt, t)
            cur_dom, cur_metric = nxt.output_domain, nxt.output_metric
        m = build_measurement(stages[-1], cur_dom, cur_metric)
        return m if t is None else chain_mt(m, t)
    raise PlanInvalid(f"{op!r} is a transformation; wrap it in a chain ending with a measurement")


def compile_plan(plan: dict) -> tuple[Schema, Metric, list[tuple[str, Measurement]]]:
    validate_plan(plan)
    try:
        schema = Schema.from_dict(plan["dataset"]["schema"])
        metric = metric_named(plan.get("metric", "SymmetricDistance"))
        domain = DatasetDomain(schema)
        queries = []
        for i, node in enumerate(plan["queries"]):
            queries.append((node.get("name", f"q{i}"), build_measurement(node, domain, metric)))
    except PlanInvalid:
        raise
    except (PrivCalcError, KeyError, ValueError) as exc:
        raise PlanInvalid(f"cannot build plan: {exc}") from exc
    return schema, metric, queries


def load_plan(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanInvalid(f"cannot read plan {path}: {exc}") from exc


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------


def _jsonable(v: Any):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def run_plan(
    plan,
    data_path,
    seed: int = 0,
    loader: Callable[[Any, Schema], Dataset] = Dataset.from_csv,
) -> dict:
    """Validate, budget-check, then execute a plan; returns the results document."""
    if not isinstance(plan, dict):
        plan = load_plan(plan)
    schema, metric, queries = compile_plan(plan)

    losses = [Cost.of(m.loss_at(1)) for _, m in queries]
    total = Cost(sum((c.epsilon for c in losses), Fraction(0)), sum((c.delta for c in losses), Fraction(0)))
    budget = plan.get("budget")
    if budget is not None:
        cap = Cost.of((budget["epsilon"], budget.get("delta", 0.0)))
        if not total.fits(cap):
            raise BudgetViolation(
                f"plan needs epsilon={float(total.epsilon):g}, delta={float(total.delta):g}; "
                f"budget is epsilon={float(cap.epsilon):g}, delta={float(cap.delta):g}"
            )

    data = loader(data_path, schema)
    rng = np.random.default_rng(seed)
    results = []
    for (name, m), cost in zip(queries, losses):
        value = m(data, rng)
        results.append({
            "name": name,
            "mechanism": m.name,
            "loss": {"epsilon": float(cost.epsilon), "delta": float(cost.delta)},
            "value": _jsonable(value),
        })
    return {
        "version": PLAN_VERSION,
        "seed": seed,
        "metric": metric.name,
        "budget": budget,
        "total_loss": {"epsilon": float(total.epsilon), "delta": float(total.delta)},
        "results": results,
    }


def dump_results(results: dict) -> str:
    return json.dumps(results, indent=2, sort_keys=True) + "\n"
