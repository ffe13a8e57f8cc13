import json
from fractions import Fraction

import pytest

from conftest import ds
from harness import run_fuzz_session
from oracles import frac, replay_root_charge
from privcalc.core import CHANGE_ONE
from privcalc.errors import BudgetExceeded, DomainMismatch, NegativeBudget
from privcalc.interactive import Cost, PartitionGroup, RootAgent, make_root, to_fraction
from privcalc.mechanisms import noisy_count
from privcalc.transforms import PartitionSpec

F = Fraction


def c(x):
    return Cost.of(x)


class TestRootAgent:
    def test_filter_sequence(self):
        a = RootAgent(c(1.0), "filter")
        a.request(c(0.4))
        a.request(c(0.5))
        with pytest.raises(BudgetExceeded):
            a.request(c(0.3))
        assert a.spent.epsilon == F(9, 10)

    def test_odometer_sequence(self):
        a = RootAgent(None, "odometer")
        for e in (0.4, 0.5, 0.3):
            a.request(c(e))
        assert a.spent.epsilon == F(6, 5)
        assert a.remaining() is None

    def test_zero_budget(self):
        a = RootAgent(c(0), "filter")
        with pytest.raises(BudgetExceeded):
            a.request(c(1e-9))
        a.request(c(0))

    def test_exact_decimal_accounting(self):
        # ten requests of 0.1 drift in binary floating point but not here
        a = RootAgent(c(1.0), "filter")
        for _ in range(10):
            a.request(c(0.1))
        assert a.remaining().epsilon == 0
        assert to_fraction(0.1) == F(1, 10)

    def test_delta_is_enforced(self):
        a = RootAgent(c((1.0, 1e-6)), "filter")
        with pytest.raises(BudgetExceeded):
            a.request(c((0.1, 2e-6)))


class TestQueryable:
    def test_query_charges(self, xschema):
        root = make_root(ds(range(5)), budget=0.5, seed=0)
        root.query(noisy_count(xschema, 0.2))
        assert root.remaining().epsilon == F(3, 10)

    def test_rejection_leaves_state_untouched(self, xschema):
        root = make_root(ds(range(5)), budget=0.5, seed=0)
        root.query(noisy_count(xschema, 0.2))
        before = (root.spent, len(root.session.transcript), len(root.session.events),
                  root.session.rng.bit_generator.state)
        with pytest.raises(BudgetExceeded):
            root.query(noisy_count(xschema, 0.4))
        after = (root.spent, len(root.session.transcript), len(root.session.events),
                 root.session.rng.bit_generator.state)
        assert before == after

    def test_rejected_query_does_not_change_later_answers(self, xschema):
        a = make_root(ds(range(5)), budget=0.5, seed=3)
        b = make_root(ds(range(5)), budget=0.5, seed=3)
        with pytest.raises(BudgetExceeded):
            a.query(noisy_count(xschema, 0.9))
        assert a.query(noisy_count(xschema, 0.2)) == b.query(noisy_count(xschema, 0.2))

    def test_metric_mismatch(self, xschema):
        root = make_root(ds([1]), metric=CHANGE_ONE, budget=1.0)
        with pytest.raises(DomainMismatch):
            root.query(noisy_count(xschema, 0.1))

    def test_bad_budgets(self):
        with pytest.raises(NegativeBudget):
            make_root(ds([1]), budget=-1.0)
        with pytest.raises(NegativeBudget):
            make_root(ds([1]), budget=None)
        root = make_root(ds([1]), budget=1.0)
        with pytest.raises(NegativeBudget):
            root.spawn(-0.1)


class TestPartitionCharging:
    def setup_method(self):
        self.root = make_root(ds([-1, -2, 3, 4, 5]), budget=2.0, seed=1)
        self.spec = PartitionSpec.from_predicates([lambda r: r[0] < 0, lambda r: r[0] >= 0])

    def test_parent_charged_by_max_increment(self, xschema):
        c1, c2 = self.root.partition(self.spec)
        c1.query(noisy_count(xschema, 0.2))
        assert self.root.spent.epsilon == F(1, 5)
        c2.query(noisy_count(xschema, 0.5))
        assert self.root.spent.epsilon == F(1, 2)
        c1.query(noisy_count(xschema, 0.4))
        assert self.root.spent.epsilon == F(3, 5)
        assert self.root.agent.ledger[-1].epsilon == F(1, 10)

    def test_below_max_is_free(self, xschema):
        c1, c2 = self.root.partition(self.spec)
        c2.query(noisy_count(xschema, 0.5))
        c1.query(noisy_count(xschema, 0.3))
        assert self.root.agent.ledger[-1].epsilon == 0
        assert self.root.spent.epsilon == F(1, 2)

    def test_child_headroom_includes_free_growth(self, xschema):
        root = make_root(ds([-1, 3]), budget=1.0, seed=0)
        c1, c2 = root.partition(self.spec)
        c2.query(noisy_count(xschema, 0.5))
        assert c1.remaining().epsilon == F(1)
        c1.query(noisy_count(xschema, 1.0))
        assert root.spent.epsilon == F(1)

    def test_change_one_group_uses_top_two(self):
        g = PartitionGroup(RootAgent(None, "odometer"), 3, CHANGE_ONE)
        g.totals = [c(0.5), c(0.3), c(0.1)]
        assert g.increment(2, c(0.1)).epsilon == 0
        assert g.increment(2, c(0.3)).epsilon == to_fraction(0.1)
        assert g.increment(0, c(0.2)).epsilon == to_fraction(0.2)


class TestSpawn:
    def test_upfront(self, xschema):
        root = make_root(ds([1, 2]), budget=1.0, seed=0)
        kid = root.spawn(0.6)
        assert root.remaining().epsilon == F(2, 5)
        kid.query(noisy_count(xschema, 0.6))
        assert root.spent.epsilon == F(3, 5)
        with pytest.raises(BudgetExceeded):
            kid.query(noisy_count(xschema, 0.01))

    def test_oversized(self):
        root = make_root(ds([1]), budget=1.0)
        with pytest.raises(BudgetExceeded):
            root.spawn(1.2)
        assert root.spent.epsilon == 0


def test_depth_three_tree_matches_replay(xschema):
    root = make_root(ds([-3, -1, 2, 4, 6]), budget=5.0, seed=2)
    spec = PartitionSpec.from_predicates([lambda r: r[0] < 0, lambda r: r[0] >= 0])
    a, b = root.partition(spec)
    seq = b.spawn(0.7)
    seq.query(noisy_count(xschema, 0.3))
    a.query(noisy_count(xschema, 0.4))
    b.query(noisy_count(xschema, 0.25))
    root.query(noisy_count(xschema, 0.1))
    # group max: max(0.4, 0.7 + 0.25) = 0.95, plus 0.1 at the root
    assert root.spent.epsilon == F(21, 20)
    assert replay_root_charge(root.session.events) == F(21, 20)


def test_transcript_jsonl(tmp_path, xschema):
    root = make_root(ds([1, 2, 3]), budget=1.0, seed=0)
    root.query(noisy_count(xschema, 0.1))
    root.query(noisy_count(xschema, 0.2))
    path = tmp_path / "t.jsonl"
    root.session.export_transcript(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["epsilon"] for r in rows] == [0.1, 0.2]
    assert set(rows[0]) == {"seq", "node", "query", "epsilon", "delta", "answer", "digest"}


@pytest.mark.parametrize("mode", ["filter", "odometer"])
def test_fuzzed_sessions(mode):
    for seed in range(60):
        run_fuzz_session(seed, mode)


def test_budget_enforced_at_equality():
    root = make_root(ds([1.0]), budget=0.3)
    root.spawn(0.1)
    root.spawn(0.2)
    assert root.spent.epsilon == frac(0.3)
    assert root.remaining().epsilon == 0
