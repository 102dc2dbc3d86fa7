"""Domain types shared by every scheduler: requests, allocation profiles,
per-link residual state and topologies.

Time is a sequence of integer slot indices.  Quantities are real-valued
traffic units compared with an absolute tolerance of ``EPS``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping

EPS = 1e-9
SLOT_SECONDS = 300

ELASTIC = "elastic"
RESERVATION = "reservation"


class HorizonError(ValueError):
    """A slot lies beyond the tracked horizon of a link."""


@dataclass(frozen=True)
class TimeSlot:
    index: int
    slot_duration: int = SLOT_SECONDS

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"slot index must be non-negative, got {self.index}")

    def __int__(self) -> int:
        return self.index


@dataclass(frozen=True)
class Request:
    """A transfer of ``volume`` units that must finish by slot ``deadline``.

    ``source``/``destination`` are only used by the network scheduler.  A
    request with an empty window (``deadline <= arrival``) is constructible;
    schedulers reject it at intake.
    """

    id: Hashable
    volume: float
    arrival: int
    deadline: int
    source: Hashable | None = None
    destination: Hashable | None = None
    kind: str = ELASTIC

    def __post_init__(self) -> None:
        if not self.volume > 0:
            raise ValueError(f"request {self.id!r}: volume must be > 0, got {self.volume}")
        if self.arrival < 0:
            raise ValueError(f"request {self.id!r}: negative arrival slot")
        if self.kind not in (ELASTIC, RESERVATION):
            raise ValueError(f"request {self.id!r}: unknown kind {self.kind!r}")
        if (
            self.source is not None
            and self.destination is not None
            and self.source == self.destination
        ):
            raise ValueError(f"request {self.id!r}: source equals destination")

    @property
    def sort_key(self) -> tuple:
        return (self.deadline, self.id)


class AllocationProfile:
    """Map from slot (or ``(slot, link_id)``) to a positive amount.

    Zero (or sub-``EPS``) entries are never stored.
    """

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping | Iterable | None = None) -> None:
        self.entries: dict = {}
        if entries is None:
            return
        items = entries.items() if isinstance(entries, Mapping) else entries
        for key, amount in items:
            self.add(key, amount)

    def add(self, key, amount: float) -> None:
        if amount <= 0:
            return
        self.entries[key] = self.entries.get(key, 0.0) + amount

    def total(self) -> float:
        return sum(self.entries.values())

    def slots(self) -> list[int]:
        return sorted({k[0] if isinstance(k, tuple) else k for k in self.entries})

    def at(self, key) -> float:
        return self.entries.get(key, 0.0)

    def items(self):
        return self.entries.items()

    def __iter__(self) -> Iterator:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, AllocationProfile):
            return self.entries == other.entries
        if isinstance(other, Mapping):
            return self.entries == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        body = ", ".join(f"{k!r}: {v:g}" for k, v in sorted(self.entries.items(), key=_key_order))
        return f"AllocationProfile({{{body}}})"

    def copy(self) -> AllocationProfile:
        p = AllocationProfile()
        p.entries = dict(self.entries)
        return p

    def to_json(self) -> list:
        out = []
        for key, amount in sorted(self.entries.items(), key=_key_order):
            if isinstance(key, tuple):
                out.append({"slot": key[0], "link": key[1], "amount": amount})
            else:
                out.append({"slot": key, "amount": amount})
        return out

    @classmethod
    def from_json(cls, rows: list) -> AllocationProfile:
        p = cls()
        for row in rows:
            key = (row["slot"], row["link"]) if "link" in row else row["slot"]
            p.add(key, float(row["amount"]))
        return p


def _key_order(item):
    key = item[0]
    return (key[0], str(key[1])) if isinstance(key, tuple) else (key, "")


class LinkState:
    """Residual capacity of one link over a sliding window of slots.

    Slots ``base .. base + horizon`` are tracked in a ring buffer, where
    ``base`` is the current slot.  ``ledger`` maps request id to its
    allocation on this link (slot -> amount); ``by_slot`` is the inverse
    index used by pull-forward.
    """

    def __init__(self, capacity: float, horizon: int, base: int = 0) -> None:
        if not capacity > 0:
            raise ValueError(f"capacity must be > 0, got {capacity}")
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.capacity = float(capacity)
        self.horizon = int(horizon)
        self.base = int(base)
        self._ring = [self.capacity] * (self.horizon + 1)
        self.ledger: dict[Hashable, dict[int, float]] = {}
        self.by_slot: dict[int, dict[Hashable, float]] = {}

    # -- residual access ------------------------------------------------
    @property
    def last_slot(self) -> int:
        return self.base + self.horizon

    def _check(self, t: int) -> None:
        if t < self.base or t > self.base + self.horizon:
            raise HorizonError(
                f"slot {t} outside tracked window [{self.base}, {self.base + self.horizon}]"
            )

    def residual_at(self, t: int) -> float:
        self._check(t)
        return self._ring[t % len(self._ring)]

    @property
    def residual(self) -> list[float]:
        """Residuals for slots ``base .. base + horizon`` in order."""
        n = len(self._ring)
        return [self._ring[(self.base + i) % n] for i in range(n)]

    def window(self, t_now: int, td: int) -> list[float]:
        """Residuals of slots ``t_now+1 .. td``."""
        if td <= t_now:
            raise ValueError(f"empty window: td={td} <= t_now={t_now}")
        self._check(t_now)
        self._check(td)
        ring, n = self._ring, len(self._ring)
        return [ring[t % n] for t in range(t_now + 1, td + 1)]

    def used_at(self, t: int) -> float:
        return sum(self.by_slot.get(t, {}).values())

    # -- mutation ---------------------------------------------------------
    def _take(self, t: int, amount: float) -> None:
        i = t % len(self._ring)
        self._ring[i] -= amount

    def allocate(self, rid: Hashable, entries: Mapping[int, float]) -> None:
        """Add ``entries`` (slot -> amount) to request ``rid``'s allocation."""
        mine = self.ledger.setdefault(rid, {})
        for t, amount in entries.items():
            if amount <= 0:
                continue
            self._check(t)
            self._take(t, amount)
            mine[t] = mine.get(t, 0.0) + amount
            slot = self.by_slot.setdefault(t, {})
            slot[rid] = slot.get(rid, 0.0) + amount
        if not mine:
            del self.ledger[rid]

    def remove(self, rid: Hashable, t: int, amount: float | None = None) -> float:
        """Free ``amount`` (default: all) of ``rid``'s mass at slot ``t``.

        Returns the amount freed.  A remainder at or below ``EPS`` is freed
        as well so that no crumbs are stored.
        """
        mine = self.ledger.get(rid)
        if not mine or t not in mine:
            return 0.0
        have = mine[t]
        if amount is None or have - amount <= EPS:
            amount = have
        left = have - amount
        slot = self.by_slot[t]
        if amount == have:
            del mine[t]
            del slot[rid]
            if not slot:
                del self.by_slot[t]
            if not mine:
                del self.ledger[rid]
        else:
            mine[t] = left
            slot[rid] = left
        if self.base <= t <= self.base + self.horizon:
            self._take(t, -amount)
        return amount

    def release(self, rid: Hashable, from_slot: int | None = None) -> float:
        """Free all of ``rid``'s mass (optionally only at slots >= ``from_slot``)."""
        mine = self.ledger.get(rid)
        if not mine:
            return 0.0
        freed = 0.0
        for t in sorted(mine):
            if from_slot is None or t >= from_slot:
                freed += self.remove(rid, t)
        return freed

    def move(self, rid: Hashable, src: int, dst: int, amount: float) -> float:
        moved = self.remove(rid, src, amount)
        self.allocate(rid, {dst: moved})
        return moved

    def pop_slot(self, t: int) -> dict[Hashable, float]:
        """Detach and return all allocations at slot ``t`` (transmission)."""
        slot = self.by_slot.pop(t, {})
        for rid in slot:
            mine = self.ledger[rid]
            del mine[t]
            if not mine:
                del self.ledger[rid]
        return slot

    def rotate(self, new_base: int) -> None:
        """Advance the window origin; recycled cells get full capacity."""
        if new_base < self.base:
            raise ValueError("cannot rotate backwards")
        n = len(self._ring)
        for t in range(self.base, min(new_base, self.base + n)):
            if t in self.by_slot:
                raise ValueError(f"slot {t} still holds allocations")
            self._ring[t % n] = self.capacity
        self.base = new_base

    def grow(self, horizon: int) -> None:
        """Enlarge the tracked window to ``horizon`` future slots."""
        if horizon <= self.horizon:
            return
        old = self.residual
        self.horizon = horizon
        self._ring = [self.capacity] * (horizon + 1)
        for i, value in enumerate(old):
            self._ring[(self.base + i) % len(self._ring)] = value

    def set_residuals(self, values: Iterable[float]) -> None:
        values = list(values)
        if len(values) != self.horizon + 1:
            raise ValueError("residual vector length must be horizon + 1")
        n = len(self._ring)
        for i, value in enumerate(values):
            self._ring[(self.base + i) % n] = float(value)

    # -- checks -----------------------------------------------------------
    def conservation_error(self) -> float:
        """Largest |capacity - residual - allocated| over tracked slots."""
        worst = 0.0
        for t in range(self.base, self.base + self.horizon + 1):
            err = abs(self.capacity - self.residual_at(t) - self.used_at(t))
            worst = max(worst, err)
        return worst

    def bounds_error(self) -> float:
        worst = 0.0
        for r in self._ring:
            worst = max(worst, -r, r - self.capacity)
        return worst


def window_residual(link: LinkState, t_now: int, td: int) -> float:
    """Total residual capacity of ``link`` over slots ``(t_now, td]``."""
    return sum(link.window(t_now, td))


@dataclass(frozen=True)
class Link:
    id: Hashable
    src: Hashable
    dst: Hashable
    capacity: float


@dataclass
class Topology:
    """Directed graph of capacitated links; each link carries a LinkState."""

    nodes: list
    links: list[Link]
    horizon: int = 288
    base: int = 0
    states: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.links:
            raise ValueError("topology needs at least one link")
        node_set = set(self.nodes)
        seen = set()
        for link in self.links:
            if link.id in seen:
                raise ValueError(f"duplicate link id {link.id!r}")
            seen.add(link.id)
            if link.src not in node_set or link.dst not in node_set:
                raise ValueError(f"link {link.id!r} has an endpoint outside nodes")
            if link.src == link.dst:
                raise ValueError(f"link {link.id!r} is a self-loop")
            if link.id not in self.states:
                self.states[link.id] = LinkState(link.capacity, self.horizon, self.base)

    @property
    def m(self) -> int:
        return len(self.links)

    def link(self, link_id) -> Link:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(link_id)

    def index_of(self, link_id) -> int:
        for i, link in enumerate(self.links):
            if link.id == link_id:
                return i
        raise KeyError(link_id)

    @classmethod
    def from_dict(cls, doc: Mapping, horizon: int = 288, base: int = 0) -> Topology:
        links = [
            Link(row["id"], row["src"], row["dst"], float(row["capacity"]))
            for row in doc["links"]
        ]
        return cls(list(doc["nodes"]), links, horizon=horizon, base=base)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "links": [
                {"id": l.id, "src": l.src, "dst": l.dst, "capacity": l.capacity}
                for l in self.links
            ],
        }
