"""Line-oriented interactive session over a queryable tree."""

from __future__ import annotations

import argparse
import shlex
import sys
from fractions import Fraction
from typing import Optional, TextIO

from privcalc import mechanisms
from privcalc.core import SYMMETRIC, Dataset, Metric
from privcalc.errors import BudgetExceeded, PrivCalcError
from privcalc.interactive import Cost, Queryable, make_root
from privcalc.predicates import compile_predicate
from privcalc.transforms import PartitionSpec

HELP = """commands:
  budget                                      spent / remaining at the current node
  count --epsilon E                           noisy record count
  sum --col C --lower L --upper U --epsilon E noisy clamped sum
  avg --col C --epsilon E                     noisy average, values clamped to [-1, 1]
  partition --by EXPR                         split into EXPR / NOT EXPR children
  use ID                                      move to queryable ID
  up                                          move to the parent queryable
  spawn --budget B                            child filter with B charged up front
  transcript FILE                             write answered queries as JSON lines
  quit"""


def fmt(x: Optional[Fraction]) -> str:
    """Exact decimal rendering with 6 places (round half to even)."""
    if x is None:
        return "inf"
    q = round(Fraction(x) * 10**6)
    sign = "-" if q < 0 else ""
    q = abs(q)
    return f"{sign}{q // 10**6}.{q % 10**6:06d}"


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _parser(prog: str, *args: tuple[str, type]) -> _Parser:
    p = _Parser(prog=prog, add_help=False)
    for flag, typ in args:
        p.add_argument(flag, type=typ, required=True)
    return p


_PARSERS = {
    "count": _parser("count", ("--epsilon", float)),
    "sum": _parser("sum", ("--col", str), ("--lower", float), ("--upper", float), ("--epsilon", float)),
    "avg": _parser("avg", ("--col", str), ("--epsilon", float)),
    "partition": _parser("partition", ("--by", str)),
    "spawn": _parser("spawn", ("--budget", float)),
}


class ReplSession:
    """Executes REPL command lines; each call returns the text to print."""

    def __init__(self, dataset: Dataset, budget: Optional[float], mode: str = "filter", metric: Metric = SYMMETRIC, seed=None):
        self.root: Queryable = make_root(dataset, metric, budget, mode, seed)
        self.current: Queryable = self.root
        self.done = False

    @property
    def session(self):
        return self.root.session

    def _status(self, node: Queryable) -> str:
        rem = node.remaining()
        return f"remaining={fmt(None if rem is None else rem.epsilon)}"

    def budget_line(self) -> str:
        node = self.current
        return (
            f"node={node.id} spent={fmt(node.spent.epsilon)} {self._status(node)} "
            f"root_spent={fmt(self.root.spent.epsilon)}"
        )

    def _ask(self, m) -> str:
        node = self.current
        try:
            answer = node.query(m)
        except BudgetExceeded as exc:
            return f"rejected: {exc}; {self._status(node)}"
        charged = Cost.of(m.loss_at(1)).epsilon
        return f"answer={answer!r} charged={fmt(charged)} {self._status(node)}"

    def execute(self, line: str) -> str:
        try:
            words = shlex.split(line)
        except ValueError as exc:
            return f"error: {exc}"
        if not words:
            return ""
        cmd, rest = words[0], words[1:]
        try:
            return self._dispatch(cmd, rest)
        except _ArgError as exc:
            return f"error: {cmd}: {exc}"
        except PrivCalcError as exc:
            return f"error: {exc}"

    def _dispatch(self, cmd: str, rest: list[str]) -> str:
        node = self.current
        schema = node.domain.schema
        if cmd in ("quit", "exit"):
            self.done = True
            return "bye"
        if cmd == "help":
            return HELP
        if cmd == "budget":
            return self.budget_line()
        if cmd == "count":
            a = _PARSERS["count"].parse_args(rest)
            return self._ask(mechanisms.noisy_count(node.domain, a.epsilon, node.metric))
        if cmd == "sum":
            a = _PARSERS["sum"].parse_args(rest)
            return self._ask(mechanisms.noisy_sum(node.domain, a.col, a.lower, a.upper, a.epsilon, node.metric))
        if cmd == "avg":
            a = _PARSERS["avg"].parse_args(rest)
            idx = schema.index(a.col)
            return self._ask(mechanisms.noisy_average(node.domain, lambda r: float(r[idx]), a.epsilon, node.metric))
        if cmd == "partition":
            a = _PARSERS["partition"].parse_args(rest)
            pred = compile_predicate(a.by, schema)
            spec = PartitionSpec.from_predicates([pred, lambda r: not pred(r)], [a.by, f"NOT ({a.by})"])
            kids = node.partition(spec)
            return "children: " + ", ".join(f"{k.id} [{label}]" for k, label in zip(kids, spec.labels))
        if cmd == "spawn":
            a = _PARSERS["spawn"].parse_args(rest)
            try:
                kid = node.spawn(a.budget)
            except BudgetExceeded as exc:
                return f"rejected: {exc}; {self._status(node)}"
            return f"spawned {kid.id} budget={fmt(kid.agent.budget.epsilon)} {self._status(node)}"
        if cmd == "use":
            if len(rest) != 1 or rest[0] not in self.session.nodes:
                return f"error: unknown queryable {' '.join(rest)!r}"
            self.current = self.session.nodes[rest[0]]
            return f"using {self.current.id}"
        if cmd == "up":
            if node.parent is None:
                return "error: already at the root"
            self.current = node.parent
            return f"using {self.current.id}"
        if cmd == "transcript":
            if len(rest) != 1:
                return "error: usage: transcript FILE"
            self.session.export_transcript(rest[0])
            return f"wrote {len(self.session.transcript)} entries to {rest[0]}"
        return f"error: unknown command {cmd!r} (try 'help')"


def run_repl(session: ReplSession, stdin: Optional[TextIO] = None, stdout: Optional[TextIO] = None, prompt: str = "privcalc> "):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    interactive = stdin.isatty()
    while not session.done:
        if interactive:
            stdout.write(prompt)
            stdout.flush()
        line = stdin.readline()
        if not line:
            break
        out = session.execute(line.strip())
        if out:
            stdout.write(out + "\n")
            stdout.flush()
