"""Optimization kernel.

Single link: the latest-first allocation minimizes
``sum_t E(t) * (td - t)`` subject to ``sum_t E(t) = Q`` and
``0 <= E(t) <= C_t``.  Since the per-unit cost strictly decreases with
``t``, the backward greedy fill is exact.

Network: the same objective summed over links, subject to per-slot flow
conservation, solved as min-cost flow on a time-layered graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import networkx as nx

from .mincostflow import MinCostFlow
from .model import EPS, AllocationProfile


class Infeasible(Exception):
    """The demand does not fit the window; ``shortfall`` is what is missing."""

    def __init__(self, shortfall: float, reason: str = "insufficient_capacity") -> None:
        self.shortfall = shortfall
        self.reason = reason
        super().__init__(f"{reason}: short by {shortfall:.6g}")


@dataclass
class LatestFirstProblem:
    q: float
    td: int
    t_now: int
    residual: Sequence[float]  # slots t_now+1 .. td

    def __post_init__(self) -> None:
        if not self.q > 0:
            raise ValueError("q must be > 0")
        if len(self.residual) != self.td - self.t_now:
            raise ValueError(
                f"residual has {len(self.residual)} entries, window is {self.td - self.t_now}"
            )


def fill_backward(q: float, residual: Sequence[float]) -> tuple[list[float], float]:
    """Fill ``residual`` from the last slot backwards until ``q`` is placed.

    Returns per-slot amounts (same indexing as ``residual``) and the
    unplaced remainder (0.0 when everything fits).
    """
    amounts = [0.0] * len(residual)
    remaining = q
    for i in range(len(residual) - 1, -1, -1):
        if remaining <= EPS:
            break
        r = residual[i]
        if r <= EPS:
            continue
        a = r if r < remaining else remaining
        amounts[i] = a
        remaining -= a
    return amounts, (remaining if remaining > EPS else 0.0)


def fill_forward(q: float, residual: Sequence[float]) -> tuple[list[float], float]:
    """Mirror image of :func:`fill_backward` (as-soon-as-possible)."""
    amounts = [0.0] * len(residual)
    remaining = q
    for i, r in enumerate(residual):
        if remaining <= EPS:
            break
        if r <= EPS:
            continue
        a = r if r < remaining else remaining
        amounts[i] = a
        remaining -= a
    return amounts, (remaining if remaining > EPS else 0.0)


def _to_profile(amounts: Sequence[float], t_now: int) -> AllocationProfile:
    p = AllocationProfile()
    for i, a in enumerate(amounts):
        if a > 0:
            p.entries[t_now + 1 + i] = a
    return p


def solve_latest_first(p: LatestFirstProblem) -> AllocationProfile:
    """Minimum-cost (latest possible) allocation; raises :class:`Infeasible`."""
    amounts, short = fill_backward(p.q, p.residual)
    if short:
        raise Infeasible(short)
    return _to_profile(amounts, p.t_now)


def solve_earliest_first(p: LatestFirstProblem) -> AllocationProfile:
    amounts, short = fill_forward(p.q, p.residual)
    if short:
        raise Infeasible(short)
    return _to_profile(amounts, p.t_now)


def latest_first_objective(profile: AllocationProfile, td: int) -> float:
    return sum(a * (td - t) for t, a in profile.items())


@dataclass
class FlowProblem:
    """Single-commodity instance on the residual network.

    ``links`` are objects with ``id``, ``src`` and ``dst``; ``residual``
    maps link id to capacities for slots ``t_now+1 .. td``.
    """

    links: Sequence
    residual: Mapping[Hashable, Sequence[float]]
    source: Hashable
    sink: Hashable
    q: float
    td: int
    t_now: int
    admissible: frozenset | None = None
    nodes: Sequence | None = field(default=None)

    def __post_init__(self) -> None:
        if self.source == self.sink:
            raise ValueError("source equals sink")
        if not self.q > 0:
            raise ValueError("q must be > 0")
        if self.td <= self.t_now:
            raise ValueError("empty window")
        w = self.td - self.t_now
        for link in self.links:
            res = self.residual[link.id]
            if len(res) != w:
                raise ValueError(f"link {link.id!r}: residual length {len(res)} != {w}")
            if any(r < -EPS for r in res):
                raise ValueError(f"link {link.id!r}: negative residual")
        if self.nodes is None:
            seen: dict = {}
            for link in self.links:
                seen.setdefault(link.src, None)
                seen.setdefault(link.dst, None)
            seen.setdefault(self.source, None)
            seen.setdefault(self.sink, None)
            self.nodes = list(seen)

    @property
    def window(self) -> int:
        return self.td - self.t_now

    def usable_links(self) -> list[tuple[int, object]]:
        """(index, link) pairs that may carry this request's flow.

        Links entering the source or leaving the sink can only carry
        circulations, so they are excluded.
        """
        out = []
        for i, link in enumerate(self.links):
            if self.admissible is not None and link.id not in self.admissible:
                continue
            if link.dst == self.source or link.src == self.sink:
                continue
            out.append((i, link))
        return out


def variable_count(m: int, t_now: int, td: int) -> int:
    """Number of decision variables ``E(t, l)`` of the network LP."""
    return m * (td - t_now)


def solve_flow(p: FlowProblem) -> AllocationProfile:
    """Minimum-cost allocation keyed by ``(slot, link_id)``.

    Ties between optima are broken towards fewer hops, then lower link
    index.  Raises :class:`Infeasible` when the window's max flow is short.
    """
    nodes = list(p.nodes)
    node_ix = {n: i for i, n in enumerate(nodes)}
    n_nodes = len(nodes)
    w = p.window
    usable = p.usable_links()
    m = max(1, len(p.links))

    # layer 0 is the deadline slot so Dijkstra meets later slots first on ties
    def vid(layer: int, node) -> int:
        return 2 + layer * n_nodes + node_ix[node]

    n_vertices = 2 + w * n_nodes
    k1 = 2 * n_vertices * m + 1
    k2 = 2 * (n_vertices * k1 + n_vertices * m) + 1

    g = MinCostFlow(n_vertices, EPS)
    arcs = []
    for layer in range(w):
        t = p.td - layer
        i_slot = t - p.t_now - 1
        g.add_edge(0, vid(layer, p.source), float("inf"), 0)
        g.add_edge(vid(layer, p.sink), 1, float("inf"), 0)
        for idx, link in usable:
            cap = p.residual[link.id][i_slot]
            if cap <= EPS:
                continue
            cost = (p.td - t) * k2 + k1 + idx
            arc = g.add_edge(vid(layer, link.src), vid(layer, link.dst), cap, cost)
            arcs.append((arc, t, link.id))

    short = g.run(0, 1, p.q)
    if short:
        raise Infeasible(short)
    profile = AllocationProfile()
    for arc, t, lid in arcs:
        f = g.flow[arc]
        if f > EPS:
            profile.entries[(t, lid)] = f
    return profile


def flow_objective(profile: AllocationProfile, td: int) -> float:
    return sum(a * (td - t) for (t, _), a in profile.items())


def k_shortest_paths(topology, src, dst, k: int) -> frozenset:
    """Union of link ids on the ``k`` shortest (hop count) simple paths.

    Parallel links between two consecutive path nodes are all admitted.
    Returns an empty set when ``dst`` is unreachable.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    g = nx.DiGraph()
    g.add_nodes_from(topology.nodes)
    between: dict[tuple, list] = {}
    for link in topology.links:
        g.add_edge(link.src, link.dst)
        between.setdefault((link.src, link.dst), []).append(link.id)
    if src not in g or dst not in g:
        raise KeyError(f"unknown node {src if src not in g else dst!r}")
    if not nx.has_path(g, src, dst):
        return frozenset()
    chosen: set = set()
    for i, path in enumerate(nx.shortest_simple_paths(g, src, dst)):
        if i >= k:
            break
        for u, v in zip(path, path[1:]):
            chosen.update(between[(u, v)])
    return frozenset(chosen)
