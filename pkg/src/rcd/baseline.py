"""Rescheduling comparator: as-soon-as-possible placement, first come first
served, no preemption, and a full re-pack of every admitted request when a
new arrival does not fit.

The re-pack is idealized: it reconsiders all admitted requests rather than a
heuristic subset, so it admits at least as much as any subset-based variant.
"""

from __future__ import annotations

from .kernel import fill_forward
from .link import INSUFFICIENT, Decision, RCDScheduler, Transfer, accepted, rejected
from .model import RESERVATION, Request


class BaselineScheduler(RCDScheduler):
    name = "baseline"

    def __init__(self, capacity: float, horizon: int, t_now: int = 0) -> None:
        super().__init__(capacity, horizon, t_now)
        self.reschedules = 0
        self.moved_requests = 0

    def submit(self, request: Request) -> Decision:
        early = self._intake(request)
        if early is not None:
            return self._count(early)
        t_now, td = self.t_now, request.deadline
        amounts, short = fill_forward(request.volume, self.link.window(t_now, td))
        if not short:
            entries = {t_now + 1 + i: a for i, a in enumerate(amounts) if a > 0}
            self.link.allocate(request.id, entries)
            self.transfers[request.id] = Transfer(request)
            return self._count(accepted(request.id, entries))
        plan, short = self._repack(request)
        if plan is None:
            return self._count(rejected(request.id, INSUFFICIENT, short))
        self.reschedules += 1
        self.transfers[request.id] = Transfer(request)
        for rid, entries in plan.items():
            old = {t: a for t, a in self.link.ledger.get(rid, {}).items() if t > t_now}
            if old == entries:
                continue
            self.moved_requests += rid != request.id
            self.link.release(rid, from_slot=t_now + 1)
            self.link.allocate(rid, entries)
        return self._count(accepted(request.id, plan[request.id]))

    def _repack(self, request: Request):
        """Earliest-deadline-first, earliest-slot-first packing of every
        admitted request's future volume plus ``request``.

        Returns ``(plan, 0.0)`` or ``(None, shortfall)``.
        """
        t_now = self.t_now
        jobs = []
        for rank, (rid, tr) in enumerate(self.transfers.items()):
            future = sum(a for t, a in self.link.ledger.get(rid, {}).items() if t > t_now)
            if future > 0:
                jobs.append((tr.request.deadline, rank, rid, future))
        jobs.append((request.deadline, len(self.transfers), request.id, request.volume))
        jobs.sort(key=lambda j: (j[0], j[1]))
        horizon_end = max(j[0] for j in jobs)
        # future slots carry only these jobs' mass, so start from full capacity
        free = [self.link.capacity] * (horizon_end - t_now)
        plan = {}
        short_total = 0.0
        for td, _, rid, volume in jobs:
            window = free[: td - t_now]
            amounts, short = fill_forward(volume, window)
            short_total += short
            entries = {}
            for i, a in enumerate(amounts):
                if a > 0:
                    free[i] -= a
                    entries[t_now + 1 + i] = a
            plan[rid] = entries
        if short_total:
            return None, short_total
        return plan, 0.0

    def reserve(self, request: Request) -> Decision:
        raise NotImplementedError("the baseline has no reservation mechanism")

    def pull_forward(self) -> list:
        # ASAP packing leaves no spare capacity ahead of scheduled mass
        return []

    @classmethod
    def from_json(cls, doc: dict) -> BaselineScheduler:
        sched = super().from_json(doc)
        if any(tr.request.kind == RESERVATION for tr in sched.transfers.values()):
            raise ValueError("baseline state cannot hold reservations")
        return sched
