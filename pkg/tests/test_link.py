import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import drive, dyadic_sequence, future_load
from oracles import max_deliverable_shortfall, oracle_min_prefix
from rcd.link import HORIZON, INSUFFICIENT, PAST_DEADLINE, RCDScheduler, Transfer
from rcd.model import EPS, RESERVATION, Request


def test_oracle_min_prefix_examples():
    caps = {t: 1.0 for t in range(1, 4)}
    assert oracle_min_prefix([(1.0, 3)], caps, 0, 2) == pytest.approx(0.0, abs=1e-12)
    assert oracle_min_prefix([(3.0, 3)], caps, 0, 2) == pytest.approx(2.0, abs=1e-12)


def test_submit_latest_first():
    s = RCDScheduler(1.0, horizon=10)
    d = s.submit(Request("a", 2.5, 0, 5))
    assert d.accepted and d.profile == {5: 1.0, 4: 1.0, 3: 0.5}
    assert s.link.residual[:6] == [1.0, 1.0, 1.0, 0.5, 0.0, 0.0]


def test_submit_boundary_then_exhausted():
    s = RCDScheduler(1.0, horizon=10)
    s.link.allocate("pre", {1: 0.5, 2: 0.5})
    s.transfers["pre"] = Transfer(Request("pre", 1.0, 0, 2))
    # window (0, 4] has 3.0 left
    assert s.submit(Request("a", 3.0, 0, 4)).accepted
    d = s.submit(Request("b", 0.1, 0, 4))
    assert not d.accepted and d.reason == INSUFFICIENT
    assert d.shortfall == pytest.approx(0.1)


def test_rejections_leave_state_untouched():
    s = RCDScheduler(1.0, horizon=5)
    s.submit(Request("a", 1.0, 0, 3))
    def core(state):
        doc = state.to_json()
        del doc["pending"], doc["stats"]
        return doc

    snap = core(s)
    assert s.submit(Request("b", 9.0, 0, 3)).reason == INSUFFICIENT
    assert s.submit(Request("c", 1.0, 0, 0)).reason == PAST_DEADLINE
    assert s.submit(Request("d", 1.0, 0, 6)).reason == HORIZON
    assert core(s) == snap


def test_submit_requires_current_arrival():
    s = RCDScheduler(1.0, horizon=5)
    with pytest.raises(ValueError):
        s.submit(Request("a", 1.0, 2, 3))


def test_pull_forward_earliest_slot_first():
    s = RCDScheduler(1.0, horizon=10, t_now=1)
    s.link.allocate("cur", {1: 0.6})
    s.submit(Request("X", 0.3, 1, 2))
    s.submit(Request("Y", 0.5, 1, 3))
    assert s.profile_of("X") == {2: 0.3} and s.profile_of("Y") == {3: 0.5}
    s.transfers["cur"] = Transfer(Request("cur", 0.6, 0, 1))
    moves = s.pull_forward()
    assert [m[0] for m in moves] == ["X", "Y"]
    assert moves[0][1] == pytest.approx(0.3)
    assert moves[1][1] == pytest.approx(0.1)
    assert s.profile_of("Y")[3] == pytest.approx(0.4)
    assert sum(s.profile_of("Y").values()) == pytest.approx(0.5)
    s.check_invariants()


def test_pull_forward_nothing_to_do():
    s = RCDScheduler(1.0, horizon=10)
    assert s.pull_forward() == []
    s.link.allocate("cur", {0: 1.0})
    s.transfers["cur"] = Transfer(Request("cur", 1.0, 0, 1))
    s.submit(Request("a", 1.0, 0, 4))
    assert s.pull_forward() == []


def test_pull_forward_ties_by_deadline_then_id():
    s = RCDScheduler(1.0, horizon=10)
    s.submit(Request("b", 0.5, 0, 6))
    s.submit(Request("a", 0.5, 0, 6))
    # both land in slot 6; ties go by deadline then id
    moves = s.pull_forward()
    assert [m[0] for m in moves] == ["a", "b"]


def test_advance_reports_and_completes():
    s = RCDScheduler(1.0, horizon=10)
    s.submit(Request("a", 0.9, 0, 3))
    s.pull_forward()
    r = s.advance()
    assert r.slot == 0 and r.sent == pytest.approx(0.9) and r.utilization == pytest.approx(0.9)
    assert r.completed == ["a"] and r.accepted == 1 and r.rejected == 0
    assert "a" not in s.transfers
    assert s.t_now == 1
    r = s.advance()
    assert r.sent == 0.0 and r.accepted == 0
    assert set(r.to_json()) == {"slot", "sent", "utilization", "accepted", "rejected", "cancelled_reservations", "completed"}


def test_without_pull_forward_mass_waits_for_its_slot():
    s = RCDScheduler(1.0, horizon=10)
    s.submit(Request("a", 1.0, 0, 2))
    assert s.advance().sent == 0.0
    assert s.advance().sent == 0.0
    r = s.advance()
    assert r.sent == 1.0 and r.completed == ["a"]


def test_reserve_allocates_like_elastic():
    s = RCDScheduler(1.0, horizon=10)
    d = s.reserve(Request("r", 2.0, 0, 4))
    assert d.profile == {4: 1.0, 3: 1.0}
    assert s.transfers["r"].request.kind == RESERVATION


def test_reservation_content_arrives():
    s = RCDScheduler(1.0, horizon=10)
    s.reserve(Request("r", 2.0, 0, 4))
    s.pull_forward()
    s.advance()
    s.mark_content_available("r")
    moves = s.pull_forward()
    assert moves == [("r", 1.0)]
    s.advance()
    s.pull_forward()
    r = s.advance()
    assert r.completed == ["r"]


def test_reservation_expires_and_restores():
    s = RCDScheduler(1.0, horizon=10)
    s.reserve(Request("r", 2.0, 0, 4))
    cancelled = []
    for _ in range(4):
        s.pull_forward()
        rep = s.advance()
        s.check_invariants()
        cancelled += rep.cancelled_reservations
        if cancelled:
            break
    # slot 3 could not be sent and slot 4 alone cannot carry 2 units
    assert cancelled == ["r"] and rep.slot == 3
    assert "r" not in s.transfers
    assert s.link.residual_at(4) == 1.0
    assert s.stats.sent == 0.0


def _prefix_check(sched):
    load = future_load(sched)
    if not load:
        return
    end = max(td for _, td in load)
    caps = {t: sched.link.capacity for t in range(sched.t_now + 1, end + 1)}
    running = 0.0
    for threshold in range(sched.t_now + 1, end + 1):
        running += sched.link.used_at(threshold)
        expected = oracle_min_prefix(load, caps, sched.t_now, threshold)
        assert running == pytest.approx(expected, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), pull=st.booleans())
def test_prefix_minimality(seed, pull):
    rng = random.Random(seed)
    s = RCDScheduler(1.0, horizon=12)
    for i in range(rng.randint(1, 8)):
        if rng.random() < 0.3 and s.t_now < 6:
            if pull:
                s.pull_forward()
            s.advance()
        td = rng.randint(s.t_now + 1, min(12, s.t_now + 12))
        s.submit(Request(i, round(rng.uniform(0.05, 2.5), 4), s.t_now, td))
        _prefix_check(s)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_admission_completeness(seed):
    rng = random.Random(seed)
    seq = dyadic_sequence(rng, rng.randint(2, 12), 12)

    def oracle(sched, req):
        load = future_load(sched) + [(req.volume, req.deadline)]
        end = max(td for _, td in load)
        caps = {t: sched.link.capacity for t in range(sched.t_now + 1, end + 1)}
        return max_deliverable_shortfall(load, caps, sched.t_now) <= EPS

    for accepted, feasible in drive(RCDScheduler(1.0, horizon=24), seq, oracle):
        assert accepted == feasible


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_no_preemption_and_deadlines_met(seed):
    rng = random.Random(seed)
    s = RCDScheduler(1.0, horizon=30)
    sent_seen = {}
    admitted = {}
    for slot in range(25):
        for _ in range(rng.randint(0, 3)):
            rid = len(admitted) + 1000 * slot
            req = Request(rid, rng.uniform(0.05, 1.0), slot, slot + rng.randint(1, 5))
            if s.submit(req).accepted:
                admitted[rid] = req
        s.pull_forward()
        if s.link.residual_at(s.t_now) > EPS:
            # work conservation: nothing left in the future
            assert all(t <= s.t_now for t in s.link.by_slot)
        s.check_invariants()
        rep = s.advance()
        for rid, tr in s.transfers.items():
            assert tr.sent >= sent_seen.get(rid, 0.0)
            assert tr.sent <= tr.request.volume + EPS
            sent_seen[rid] = tr.sent
    for _ in range(10):
        s.pull_forward()
        s.advance()
    assert s.stats.missed == 0
    assert s.stats.completed == len(admitted)


def test_state_round_trip_gives_identical_decisions():
    rng = random.Random(9)
    a = RCDScheduler(1.0, horizon=20)
    for i in range(15):
        a.submit(Request(i, rng.uniform(0.1, 1.0), a.t_now, a.t_now + rng.randint(1, 10)))
        if i % 4 == 3:
            a.pull_forward()
            a.advance()
    b = RCDScheduler.from_json(a.to_json())
    assert b.to_json() == a.to_json()
    for i in range(15, 40):
        req = Request(i, rng.uniform(0.1, 1.0), a.t_now, a.t_now + rng.randint(1, 10))
        assert a.submit(req).to_json() == b.submit(req).to_json()
        if i % 3 == 0:
            assert a.pull_forward() == b.pull_forward()
            assert a.advance() == b.advance()
