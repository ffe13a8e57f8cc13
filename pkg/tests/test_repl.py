import io
import json
from fractions import Fraction

import pytest

from privcalc.core import CHANGE_ONE, Dataset, Schema
from privcalc.repl import ReplSession, fmt, run_repl

SCHEMA = Schema.of(("age", "int64"), ("score", "float64"))


@pytest.fixture
def data():
    return Dataset(SCHEMA, [(20, 0.5), (35, -0.2), (41, 0.9), (67, 0.1), (30, 0.0)])


def fields(line):
    return dict(tok.split("=", 1) for tok in line.split() if "=" in tok)


def test_fmt():
    assert fmt(Fraction(1, 3)) == "0.333333"
    assert fmt(Fraction(3, 10)) == "0.300000"
    assert fmt(Fraction(-1, 8)) == "-0.125000"
    assert fmt(None) == "inf"


def test_second_count_rejected(data):
    s = ReplSession(data, 0.3, seed=0)
    first = s.execute("count --epsilon 0.2")
    assert fields(first)["charged"] == "0.200000" and fields(first)["remaining"] == "0.100000"
    second = s.execute("count --epsilon 0.2")
    assert second.startswith("rejected") and second.endswith("remaining=0.100000")


def test_partition_follows_max_increment(data):
    s = ReplSession(data, 2.0, seed=1)
    assert s.execute("partition --by 'age >= 40'") == "children: q1 [age >= 40], q2 [NOT (age >= 40)]"
    s.execute("use q1")
    s.execute("count --epsilon 0.2")
    s.execute("use q2")
    s.execute("count --epsilon 0.5")
    s.execute("use q1")
    s.execute("count --epsilon 0.4")
    assert fields(s.execute("budget"))["root_spent"] == "0.600000"
    s.execute("up")
    assert s.execute("budget") == "node=q0 spent=0.600000 remaining=1.400000 root_spent=0.600000"


def test_sum_avg_spawn(data):
    s = ReplSession(data, 1.0, seed=2)
    assert s.execute("sum --col score --lower -1 --upper 1 --epsilon 0.1").startswith("answer=")
    assert s.execute("avg --col score --epsilon 0.1").startswith("answer=")
    out = s.execute("spawn --budget 0.5")
    assert out == "spawned q1 budget=0.500000 remaining=0.300000"
    s.execute("use q1")
    assert s.execute("count --epsilon 0.6").startswith("rejected")
    assert s.execute("spawn --budget 5").startswith("rejected")


def test_transcript(tmp_path, data):
    s = ReplSession(data, 1.0, seed=3)
    s.execute("count --epsilon 0.1")
    s.execute("count --epsilon 5")
    s.execute("sum --col age --lower 0 --upper 100 --epsilon 0.2")
    path = tmp_path / "out.jsonl"
    assert s.execute(f"transcript {path}") == f"wrote 2 entries to {path}"
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["epsilon"] for r in rows] == [0.1, 0.2]


def test_errors_keep_session_alive(data):
    s = ReplSession(data, 1.0, seed=0)
    assert s.execute("count").startswith("error: count:")
    assert s.execute("sum --col nope --lower 0 --upper 1 --epsilon 0.1").startswith("error:")
    assert s.execute("partition --by 'age >>> 3'").startswith("error:")
    assert s.execute("frobnicate").startswith("error: unknown command")
    assert s.execute("up") == "error: already at the root"
    assert s.execute("use q99").startswith("error: unknown queryable")
    assert s.execute("count --epsilon 0.1").startswith("answer=")


def test_odometer_mode(data):
    s = ReplSession(data, None, "odometer", seed=0)
    for _ in range(3):
        s.execute("count --epsilon 0.5")
    assert s.execute("budget") == "node=q0 spent=1.500000 remaining=inf root_spent=1.500000"


def test_change_one_session(data):
    s = ReplSession(data, 1.0, metric=CHANGE_ONE, seed=0)
    s.execute("partition --by 'age < 35'")
    s.execute("use q1")
    s.execute("count --epsilon 0.2")
    s.execute("use q2")
    s.execute("count --epsilon 0.3")
    # change-one group charges the sum of the two largest child totals
    assert fields(s.execute("budget"))["root_spent"] == "0.500000"


def test_run_repl_loop(data):
    out = io.StringIO()
    run_repl(ReplSession(data, 1.0, seed=0), io.StringIO("count --epsilon 0.1\nquit\ncount --epsilon 0.1\n"), out)
    lines = out.getvalue().splitlines()
    assert len(lines) == 2 and lines[1] == "bye"


def test_budget_matches_ledger_after_every_command(data):
    s = ReplSession(data, 1.0, seed=5)
    script = ["count --epsilon 0.1", "partition --by 'score > 0'", "use q1", "count --epsilon 0.15",
              "spawn --budget 0.2", "use q3", "count --epsilon 0.05", "up", "up", "count --epsilon 0.3"]
    for line in script:
        s.execute(line)
        status = fields(s.execute("budget"))
        total = sum((c.epsilon for c in s.current.agent.ledger), Fraction(0))
        assert status["spent"] == fmt(total)
        assert status["root_spent"] == fmt(sum((c.epsilon for c in s.root.agent.ledger), Fraction(0)))
