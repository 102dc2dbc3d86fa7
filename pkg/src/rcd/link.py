"""Close-to-deadline scheduler for a single link.

Each arrival is placed as late as possible on the current residuals and is
either accepted or rejected on the spot; existing allocations are never
rearranged for admission.  At each slot, spare capacity is filled by pulling
mass from the earliest non-empty future slot.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Hashable

from .kernel import fill_backward
from .model import ELASTIC, EPS, RESERVATION, AllocationProfile, HorizonError, LinkState, Request

log = logging.getLogger(__name__)

INSUFFICIENT = "insufficient_capacity"
PAST_DEADLINE = "past_deadline"
HORIZON = "horizon"
NO_PATH = "no_path"


@dataclass
class Decision:
    request_id: Hashable
    accepted: bool
    profile: dict = field(default_factory=dict)
    reason: str | None = None
    shortfall: float = 0.0

    def __bool__(self) -> bool:
        return self.accepted

    def to_json(self) -> dict:
        out: dict = {"id": self.request_id, "accepted": self.accepted}
        if self.accepted:
            out["profile"] = AllocationProfile(self.profile).to_json()
        else:
            out["reason"] = self.reason
            out["shortfall"] = self.shortfall
        return out


def accepted(rid, profile) -> Decision:
    return Decision(rid, True, dict(profile))


def rejected(rid, reason: str, shortfall: float = 0.0) -> Decision:
    return Decision(rid, False, {}, reason, shortfall)


@dataclass
class SlotReport:
    slot: int
    sent: float
    utilization: float
    accepted: int
    rejected: int
    cancelled_reservations: list = field(default_factory=list)
    completed: list = field(default_factory=list)
    per_link: dict | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        if out["per_link"] is None:
            del out["per_link"]
        return out


@dataclass
class Transfer:
    """Book-keeping for one admitted request."""

    request: Request
    sent: float = 0.0
    content_available: bool = True

    @property
    def remaining(self) -> float:
        return self.request.volume - self.sent

    @property
    def waiting_for_content(self) -> bool:
        return self.request.kind == RESERVATION and not self.content_available


@dataclass
class Stats:
    accepted: int = 0
    rejected: int = 0
    sent: float = 0.0
    completed: int = 0
    cancelled: int = 0
    missed: int = 0


class RCDScheduler:
    """Single-writer state machine; call order per slot is
    ``submit``/``reserve`` for every arrival, ``pull_forward``, ``advance``.
    """

    name = "rcd"

    def __init__(self, capacity: float, horizon: int, t_now: int = 0) -> None:
        self.link = LinkState(capacity, horizon, t_now)
        self.t_now = t_now
        self.transfers: dict[Hashable, Transfer] = {}
        self.stats = Stats()
        self._slot_accepted = 0
        self._slot_rejected = 0
        self._cancelled: list = []

    # -- admission -------------------------------------------------------
    @property
    def admitted(self) -> set:
        return set(self.transfers)

    @property
    def reservations(self) -> set:
        return {rid for rid, tr in self.transfers.items() if tr.request.kind == RESERVATION}

    def _intake(self, request: Request) -> Decision | None:
        if request.arrival != self.t_now:
            raise ValueError(
                f"request {request.id!r} arrives at {request.arrival}, clock is at {self.t_now}"
            )
        if request.id in self.transfers:
            raise ValueError(f"duplicate request id {request.id!r}")
        if request.deadline <= self.t_now:
            return rejected(request.id, PAST_DEADLINE)
        if request.deadline > self.link.last_slot:
            return rejected(request.id, HORIZON)
        return None

    def _count(self, decision: Decision) -> Decision:
        if decision.accepted:
            self.stats.accepted += 1
            self._slot_accepted += 1
        else:
            self.stats.rejected += 1
            self._slot_rejected += 1
        return decision

    def submit(self, request: Request) -> Decision:
        """Admit ``request`` with its latest-first profile, or reject it.

        Accepts iff the residual capacity in ``(t_now, deadline]`` covers the
        volume; state is untouched on rejection.
        """
        early = self._intake(request)
        if early is not None:
            return self._count(early)
        t_now, td = self.t_now, request.deadline
        amounts, short = fill_backward(request.volume, self.link.window(t_now, td))
        if short:
            return self._count(rejected(request.id, INSUFFICIENT, short))
        entries = {t_now + 1 + i: a for i, a in enumerate(amounts) if a > 0}
        self.link.allocate(request.id, entries)
        self.transfers[request.id] = Transfer(
            request, content_available=request.kind != RESERVATION
        )
        return self._count(accepted(request.id, entries))

    def reserve(self, request: Request) -> Decision:
        """Admit bandwidth for content that is not yet available."""
        if request.kind != RESERVATION:
            request = Request(
                request.id, request.volume, request.arrival, request.deadline,
                request.source, request.destination, RESERVATION,
            )
        return self.submit(request)

    def mark_content_available(self, rid: Hashable) -> None:
        self.transfers[rid].content_available = True

    # -- rule 2 ------------------------------------------------------------
    def _displace_waiting(self) -> list:
        """Free current-slot mass of reservations still waiting for content."""
        out = []
        here = self.link.by_slot.get(self.t_now)
        if not here:
            return out
        for rid in sorted(here, key=lambda r: self.transfers[r].request.sort_key):
            if self.transfers[rid].waiting_for_content:
                out.append((rid, self.link.remove(rid, self.t_now)))
        return out

    def _replace(self, displaced: list) -> None:
        """Push displaced reservation mass back, latest first, into the
        remaining window.  Whatever does not fit is left unplaced; the
        expiry check at the next boundary cancels the reservation."""
        for rid, amount in displaced:
            td = self.transfers[rid].request.deadline
            if td <= self.t_now:
                continue
            amounts, _ = fill_backward(amount, self.link.window(self.t_now, td))
            self.link.allocate(rid, {self.t_now + 1 + i: a for i, a in enumerate(amounts) if a > 0})

    def pull_forward(self) -> list[tuple[Hashable, float]]:
        """Fill spare capacity of the current slot from the earliest future
        slots; returns ``(request id, amount)`` moves in order."""
        displaced = self._displace_waiting()
        link, t_now = self.link, self.t_now
        moves: list[tuple[Hashable, float]] = []
        spare = link.residual_at(t_now)
        if spare > EPS:
            for t in range(t_now + 1, link.last_slot + 1):
                here = link.by_slot.get(t)
                if not here:
                    continue
                order = sorted(here, key=lambda r: self.transfers[r].request.sort_key)
                for rid in order:
                    if self.transfers[rid].waiting_for_content:
                        continue
                    take = min(here[rid], spare)
                    moved = link.move(rid, t, t_now, take)
                    moves.append((rid, moved))
                    spare = link.residual_at(t_now)
                    if spare <= EPS:
                        break
                if spare <= EPS:
                    break
        self._replace(displaced)
        return moves

    # -- clock -------------------------------------------------------------
    def advance(self) -> SlotReport:
        """Transmit the current slot, retire finished transfers, expire
        hopeless reservations and move the clock one slot forward."""
        self._replace(self._displace_waiting())
        slot = self.t_now
        sent_now = self.link.pop_slot(slot)
        sent = 0.0
        for rid, amount in sent_now.items():
            self.transfers[rid].sent += amount
            sent += amount
        self.stats.sent += sent
        completed = []
        for rid in sorted(sent_now, key=str):
            tr = self.transfers[rid]
            if tr.remaining <= EPS:
                completed.append(rid)
                self.link.release(rid)
                del self.transfers[rid]
                self.stats.completed += 1
        self.t_now = slot + 1
        self.link.rotate(self.t_now)
        self._expire()
        report = SlotReport(
            slot=slot,
            sent=sent,
            utilization=sent / self.link.capacity,
            accepted=self._slot_accepted,
            rejected=self._slot_rejected,
            cancelled_reservations=self._cancelled,
            completed=completed,
        )
        self._slot_accepted = self._slot_rejected = 0
        self._cancelled = []
        return report

    def _expire(self) -> None:
        for rid in list(self.transfers):
            tr = self.transfers[rid]
            td = tr.request.deadline
            if tr.waiting_for_content:
                mine = self.link.ledger.get(rid, {})
                usable = sum(mine.values())
                if td >= self.t_now:
                    usable += sum(self.link.residual_at(t) for t in range(self.t_now, td + 1))
                if td < self.t_now or usable < tr.remaining - EPS:
                    self.link.release(rid)
                    del self.transfers[rid]
                    self._cancelled.append(rid)
                    self.stats.cancelled += 1
                    log.debug("reservation %r cancelled at slot %d", rid, self.t_now)
            elif td < self.t_now:
                # cannot happen for admitted elastic traffic; kept as a guard
                log.warning("request %r missed its deadline by %.3g", rid, tr.remaining)
                self.link.release(rid)
                del self.transfers[rid]
                self.stats.missed += 1

    # -- inspection / persistence -------------------------------------------
    def profile_of(self, rid: Hashable) -> dict[int, float]:
        return dict(self.link.ledger.get(rid, {}))

    def check_invariants(self) -> None:
        link = self.link
        if link.conservation_error() > EPS:
            raise AssertionError(f"conservation violated by {link.conservation_error()}")
        if link.bounds_error() > EPS:
            raise AssertionError(f"residual outside [0, capacity] by {link.bounds_error()}")
        for rid, mine in link.ledger.items():
            tr = self.transfers[rid]
            if min(mine) < self.t_now:
                raise AssertionError(f"{rid!r} holds mass in the past")
            if max(mine) > tr.request.deadline:
                raise AssertionError(f"{rid!r} holds mass after its deadline")
            if sum(mine.values()) > tr.remaining + EPS:
                raise AssertionError(f"{rid!r} over-allocated")
            if not tr.waiting_for_content and sum(mine.values()) < tr.remaining - EPS:
                raise AssertionError(f"{rid!r} under-allocated")

    def to_json(self) -> dict:
        return {
            "scheduler": self.name,
            "t_now": self.t_now,
            "capacity": self.link.capacity,
            "horizon": self.link.horizon,
            "residual": self.link.residual,
            "pending": {"accepted": self._slot_accepted, "rejected": self._slot_rejected},
            "stats": asdict(self.stats),
            "transfers": [
                {
                    "id": rid,
                    "volume": tr.request.volume,
                    "arrival": tr.request.arrival,
                    "deadline": tr.request.deadline,
                    "kind": tr.request.kind,
                    "sent": tr.sent,
                    "content_available": tr.content_available,
                    "allocation": [
                        {"slot": t, "amount": a} for t, a in sorted(self.link.ledger.get(rid, {}).items())
                    ],
                }
                for rid, tr in self.transfers.items()
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> RCDScheduler:
        sched = cls(doc["capacity"], doc["horizon"], doc.get("t_now", 0))
        _restore_link(sched, doc)
        pending = doc.get("pending", {})
        sched._slot_accepted = pending.get("accepted", 0)
        sched._slot_rejected = pending.get("rejected", 0)
        if "stats" in doc:
            sched.stats = Stats(**doc["stats"])
        return sched


def _restore_link(sched, doc: dict) -> None:
    link = sched.link
    for row in doc.get("transfers", []):
        req = Request(
            row["id"], row["volume"], row["arrival"], row["deadline"],
            kind=row.get("kind", ELASTIC),
        )
        sched.transfers[req.id] = Transfer(
            req, row.get("sent", 0.0), row.get("content_available", True)
        )
        for entry in row.get("allocation", []):
            t, a = entry["slot"], entry["amount"]
            link.ledger.setdefault(req.id, {})[t] = a
            link.by_slot.setdefault(t, {})[req.id] = a
    if "residual" in doc:
        link.set_residuals(doc["residual"])
    else:
        for t, here in link.by_slot.items():
            link._take(t, sum(here.values()))
    if link.bounds_error() > EPS or link.conservation_error() > EPS:
        raise ValueError("state file residuals disagree with its allocations")


__all__ = [
    "Decision",
    "HorizonError",
    "RCDScheduler",
    "SlotReport",
    "Transfer",
    "INSUFFICIENT",
    "PAST_DEADLINE",
    "HORIZON",
]
