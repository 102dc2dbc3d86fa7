"""Shared random-instance builders for scheduler tests."""

import random

from rcd.model import Request


def future_load(sched):
    """(remaining future volume, deadline) per admitted request, t > t_now."""
    out = []
    for rid, tr in sched.transfers.items():
        fut = sum(a for t, a in sched.link.ledger.get(rid, {}).items() if t > sched.t_now)
        if fut > 0:
            out.append((fut, tr.request.deadline))
    return out


def dyadic_sequence(rng: random.Random, n_requests: int, max_slots: int, grid: int = 16):
    """Requests with volumes on a 1/grid lattice so float sums stay exact.

    Returns a list of (arrival, volume, deadline_offset) sorted by arrival.
    """
    reqs = []
    for _ in range(n_requests):
        arrival = rng.randint(0, max_slots // 2)
        offset = rng.randint(1, max(1, max_slots - arrival))
        volume = rng.randint(1, 2 * grid) / grid
        reqs.append((arrival, volume, offset))
    reqs.sort(key=lambda r: r[0])
    return reqs


def drive(sched, seq, on_submit=None):
    """Feed (arrival, volume, offset) triples through ``sched`` slot by slot."""
    decisions = []
    i = 0
    last = max((a for a, _, _ in seq), default=0)
    while sched.t_now <= last:
        while i < len(seq) and seq[i][0] == sched.t_now:
            arrival, volume, offset = seq[i]
            req = Request(i, volume, arrival, arrival + offset)
            before = on_submit(sched, req) if on_submit else None
            d = sched.submit(req)
            decisions.append((d.accepted, before))
            i += 1
        sched.pull_forward()
        sched.advance()
    return decisions
