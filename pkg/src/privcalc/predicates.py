"""Minimal predicate grammar for partition and filter expressions.

    expr    := term ("OR" term)*
    term    := factor ("AND" factor)*
    factor  := "NOT" factor | "(" expr ")" | column OP literal
    OP      := == | != | < | <= | > | >=
    literal := number | 'string' | "string" | true | false

Keywords are case-insensitive.  Comparisons are typed by the column's
schema kind.
"""

from __future__ import annotations

import operator
import re
from typing import Callable

from privcalc.core import Schema
from privcalc.errors import PlanInvalid

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<op><=|>=|==|!=|<|>)
      | (?P<lp>\() | (?P<rp>\))
      | (?P<str>'[^']*'|"[^"]*")
      | (?P<num>-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)
      | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
    )""",
    re.VERBOSE,
)

_OPS = {
    "==": operator.eq, "!=": operator.ne, "<": operator.lt,
    "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PlanInvalid(f"cannot parse predicate near {text[pos:]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens, schema: Schema):
        self.toks = tokens
        self.i = 0
        self.schema = schema

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def keyword(self, word: str) -> bool:
        kind, val = self.peek()
        if kind == "word" and val.upper() == word:
            self.i += 1
            return True
        return False

    def expect(self, kind: str):
        k, v = self.peek()
        if k != kind:
            raise PlanInvalid(f"expected {kind}, found {v!r}")
        self.i += 1
        return v

    def expr(self):
        parts = [self.term()]
        while self.keyword("OR"):
            parts.append(self.term())
        return parts[0] if len(parts) == 1 else (lambda r, ps=parts: any(p(r) for p in ps))

    def term(self):
        parts = [self.factor()]
        while self.keyword("AND"):
            parts.append(self.factor())
        return parts[0] if len(parts) == 1 else (lambda r, ps=parts: all(p(r) for p in ps))

    def factor(self):
        if self.keyword("NOT"):
            inner = self.factor()
            return lambda r: not inner(r)
        if self.peek()[0] == "lp":
            self.i += 1
            inner = self.expr()
            self.expect("rp")
            return inner
        column = self.expect("word")
        try:
            idx = self.schema.index(column)
        except Exception as exc:
            raise PlanInvalid(str(exc)) from None
        op = _OPS[self.expect("op")]
        value = self.literal(self.schema.kind(column))
        return lambda r: op(r[idx], value)

    def literal(self, kind: str):
        k, v = self.peek()
        self.i += 1
        if k == "num" and kind in ("int64", "float64"):
            return float(v) if kind == "float64" else (int(v) if re.fullmatch(r"-?\d+", v) else float(v))
        if k == "str" and kind == "string":
            return v[1:-1]
        if k == "word" and kind == "bool" and v.lower() in ("true", "false"):
            return v.lower() == "true"
        raise PlanInvalid(f"literal {v!r} does not fit a {kind} column")


def compile_predicate(text: str, schema: Schema) -> Callable[[tuple], bool]:
    """Compile an expression into a record predicate over ``schema``."""
    p = _Parser(_tokenize(text), schema)
    fn = p.expr()
    if p.i != len(p.toks):
        raise PlanInvalid(f"trailing input in predicate: {p.toks[p.i:]!r}")
    return fn
