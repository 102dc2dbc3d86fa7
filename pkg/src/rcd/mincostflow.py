"""Successive shortest paths min-cost flow with Johnson potentials.

Capacities are real, costs are integers (so potentials and Dijkstra
distances are exact).  Arcs whose residual capacity is at or below
``eps`` are treated as saturated.
"""

from __future__ import annotations

import heapq

INF = float("inf")


class MinCostFlow:
    def __init__(self, n: int, eps: float = 1e-9) -> None:
        self.n = n
        self.eps = eps
        self.graph: list[list[int]] = [[] for _ in range(n)]
        # parallel arrays indexed by arc id; arc ^ 1 is the reverse arc
        self.to: list[int] = []
        self.cap: list[float] = []
        self.cost: list[int] = []
        self.flow: list[float] = []

    def add_edge(self, u: int, v: int, cap: float, cost: int) -> int:
        arc = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0.0]
        self.cost += [cost, -cost]
        self.flow += [0.0, 0.0]
        self.graph[u].append(arc)
        self.graph[v].append(arc + 1)
        return arc

    def _residual(self, arc: int) -> float:
        return self.cap[arc] - self.flow[arc]

    def run(self, s: int, t: int, demand: float) -> float:
        """Push up to ``demand`` units from ``s`` to ``t`` at minimum cost.

        Returns the undelivered remainder (0.0 when the demand is met to
        within ``eps``).
        """
        eps = self.eps
        pot = [0] * self.n
        remaining = demand
        to, graph, cost = self.to, self.graph, self.cost
        while remaining > eps:
            dist: list = [None] * self.n
            parent = [-1] * self.n
            dist[s] = 0
            heap = [(0, s)]
            done = [False] * self.n
            while heap:
                d, u = heapq.heappop(heap)
                if done[u]:
                    continue
                done[u] = True
                pu = pot[u]
                for arc in graph[u]:
                    if self.cap[arc] - self.flow[arc] <= eps:
                        continue
                    v = to[arc]
                    if done[v]:
                        continue
                    nd = d + cost[arc] + pu - pot[v]
                    if dist[v] is None or nd < dist[v]:
                        dist[v] = nd
                        parent[v] = arc
                        heapq.heappush(heap, (nd, v))
            if dist[t] is None:
                break
            for v in range(self.n):
                if dist[v] is not None:
                    pot[v] += dist[v]
            push = remaining
            v = t
            while v != s:
                arc = parent[v]
                push = min(push, self.cap[arc] - self.flow[arc])
                v = to[arc ^ 1]
            v = t
            while v != s:
                arc = parent[v]
                self.flow[arc] += push
                self.flow[arc ^ 1] -= push
                v = to[arc ^ 1]
            remaining -= push
        return remaining if remaining > eps else 0.0
