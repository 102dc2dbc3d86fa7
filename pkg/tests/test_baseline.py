import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import drive, dyadic_sequence, future_load
from oracles import max_deliverable_shortfall
from rcd.baseline import BaselineScheduler
from rcd.link import INSUFFICIENT, RCDScheduler
from rcd.model import EPS, Request


def test_asap_then_reschedule_then_reject():
    s = BaselineScheduler(1.0, horizon=10)
    d = s.submit(Request("a", 2.5, 0, 5))
    assert d.profile == {1: 1.0, 2: 1.0, 3: 0.5}
    d = s.submit(Request("b", 1.5, 0, 3))
    assert d.accepted
    assert s.reschedules == 1 and s.moved_requests == 1
    a, b = s.profile_of("a"), s.profile_of("b")
    assert sum(a.values()) == pytest.approx(2.5) and sum(b.values()) == pytest.approx(1.5)
    assert max(b) <= 3 and max(a) <= 5
    # the first request moved toward the end of its window
    assert a.get(4, 0.0) == pytest.approx(1.0)
    s.check_invariants()
    d = s.submit(Request("c", 1.1, 0, 5))
    assert not d.accepted and d.reason == INSUFFICIENT
    assert d.shortfall == pytest.approx(0.1)
    # prior schedule untouched
    assert s.profile_of("a") == a and s.profile_of("b") == b


def test_feasibility_oracle_confirms_reschedule_example():
    caps = {t: 1.0 for t in range(1, 6)}
    assert max_deliverable_shortfall([(2.5, 5), (1.5, 3)], caps, 0) == pytest.approx(0.0, abs=1e-12)
    assert max_deliverable_shortfall([(2.5, 5), (1.5, 3), (1.1, 5)], caps, 0) == pytest.approx(0.1)


def test_advance_baseline_cases():
    s = BaselineScheduler(1.0, horizon=10)
    assert s.pull_forward() == []
    idle = s.advance()
    assert idle.sent == 0.0
    s.submit(Request("a", 1.5, 1, 4))
    r = s.advance()
    assert r.sent == 0.0  # slot 1 is current; allocations start at slot 2
    r = s.advance()
    assert r.sent == 1.0 and r.completed == []
    r = s.advance()
    assert r.sent == pytest.approx(0.5) and r.completed == ["a"]


def test_history_untouched_by_rescheduling():
    s = BaselineScheduler(1.0, horizon=10)
    s.submit(Request("a", 3.0, 0, 6))
    s.advance()
    s.advance()
    sent = s.transfers["a"].sent
    s.submit(Request("b", 2.0, 2, 4))
    assert s.transfers["a"].sent == sent
    s.check_invariants()


def test_reserve_not_supported():
    with pytest.raises(NotImplementedError):
        BaselineScheduler(1.0, 5).reserve(Request("r", 1.0, 0, 3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_baseline_admission_complete(seed):
    rng = random.Random(seed)
    seq = dyadic_sequence(rng, rng.randint(2, 12), 12)

    def oracle(sched, req):
        load = future_load(sched) + [(req.volume, req.deadline)]
        end = max(td for _, td in load)
        caps = {t: sched.link.capacity for t in range(sched.t_now + 1, end + 1)}
        return max_deliverable_shortfall(load, caps, sched.t_now) <= EPS

    for accepted, feasible in drive(BaselineScheduler(1.0, horizon=24), seq, oracle):
        assert accepted == feasible


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_same_instant_decisions_match_rcd(seed):
    rng = random.Random(seed)
    rcd, base = RCDScheduler(1.0, 16), BaselineScheduler(1.0, 16)
    for i in range(rng.randint(1, 10)):
        req = Request(i, rng.randint(1, 40) / 16, 0, rng.randint(1, 12))
        assert rcd.submit(req).accepted == base.submit(req).accepted


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_rescheduling_meets_all_deadlines(seed):
    rng = random.Random(seed)
    s = BaselineScheduler(1.0, horizon=30)
    n = 0
    for slot in range(20):
        for _ in range(rng.randint(0, 4)):
            n += s.submit(Request((slot, _), rng.uniform(0.05, 1.2), slot, slot + rng.randint(1, 6))).accepted
        s.check_invariants()
        s.advance()
    for _ in range(10):
        s.advance()
    assert s.stats.missed == 0 and s.stats.completed == n
