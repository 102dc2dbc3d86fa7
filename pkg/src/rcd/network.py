"""Close-to-deadline scheduling on a multi-link topology.

Admission solves one min-cost flow over the residual time-layered network
for the new request only.  Filling the current slot is heuristic: a
request's flow at one slot may be split over several paths, and which
request to pull first has no optimal answer without knowing future
arrivals, so the order is fixed (earliest scheduled slot, then deadline,
then id).
"""

from __future__ import annotations

import csv
import logging
from collections import deque
from typing import Hashable

import networkx as nx

from .kernel import FlowProblem, Infeasible, k_shortest_paths, solve_flow, variable_count
from .link import (
    HORIZON,
    INSUFFICIENT,
    NO_PATH,
    PAST_DEADLINE,
    Decision,
    SlotReport,
    Stats,
    Transfer,
    accepted,
    rejected,
)
from .model import EPS, Link, Request, Topology

log = logging.getLogger(__name__)


class NetworkScheduler:
    name = "rcd-net"

    def __init__(self, topology: Topology, k: int = 0) -> None:
        self.topology = topology
        self.k = k
        self.t_now = topology.base
        self.transfers: dict[Hashable, Transfer] = {}
        self.stats = Stats()
        self.last_variables = 0
        self.last_variables_pruned = 0
        self._admissible: dict[tuple, frozenset | None] = {}
        self._graph = nx.DiGraph()
        self._graph.add_nodes_from(topology.nodes)
        self._graph.add_edges_from((l.src, l.dst) for l in topology.links)
        self._slot_accepted = 0
        self._slot_rejected = 0

    @property
    def states(self):
        return self.topology.states

    @property
    def horizon(self) -> int:
        return next(iter(self.states.values())).horizon

    # -- admission ----------------------------------------------------------
    def admissible_links(self, src, dst) -> frozenset | None:
        """Links the request may use; ``None`` means all, empty means no path."""
        key = (src, dst)
        if key not in self._admissible:
            if not nx.has_path(self._graph, src, dst):
                self._admissible[key] = frozenset()
            elif self.k > 0:
                self._admissible[key] = k_shortest_paths(self.topology, src, dst, self.k)
            else:
                self._admissible[key] = None
        return self._admissible[key]

    def flow_problem(self, request: Request) -> FlowProblem:
        t_now, td = self.t_now, request.deadline
        return FlowProblem(
            links=self.topology.links,
            residual={l.id: self.states[l.id].window(t_now, td) for l in self.topology.links},
            source=request.source,
            sink=request.destination,
            q=request.volume,
            td=td,
            t_now=t_now,
            admissible=self.admissible_links(request.source, request.destination),
            nodes=self.topology.nodes,
        )

    def submit(self, request: Request) -> Decision:
        """Admit ``request`` with a minimum-cost flow on the residual network
        or reject it; existing allocations are never touched."""
        nodes = set(self.topology.nodes)
        if request.source not in nodes or request.destination not in nodes:
            raise ValueError(f"request {request.id!r}: endpoints must be topology nodes")
        if request.arrival != self.t_now:
            raise ValueError(
                f"request {request.id!r} arrives at {request.arrival}, clock is at {self.t_now}"
            )
        if request.id in self.transfers:
            raise ValueError(f"duplicate request id {request.id!r}")
        if request.deadline <= self.t_now:
            return self._count(rejected(request.id, PAST_DEADLINE))
        if request.deadline > self.t_now + self.horizon:
            return self._count(rejected(request.id, HORIZON))
        adm = self.admissible_links(request.source, request.destination)
        if adm is not None and not adm:
            return self._count(rejected(request.id, NO_PATH, request.volume))
        problem = self.flow_problem(request)
        window = request.deadline - self.t_now
        self.last_variables = variable_count(self.topology.m, self.t_now, request.deadline)
        self.last_variables_pruned = len(problem.usable_links()) * window
        try:
            profile = solve_flow(problem)
        except Infeasible as err:
            return self._count(rejected(request.id, INSUFFICIENT, err.shortfall))
        per_link: dict = {}
        for (t, lid), a in profile.items():
            per_link.setdefault(lid, {})[t] = a
        for lid, entries in per_link.items():
            self.states[lid].allocate(request.id, entries)
        self.transfers[request.id] = Transfer(request)
        return self._count(accepted(request.id, profile.entries))

    submit_net = submit

    def _count(self, decision: Decision) -> Decision:
        if decision.accepted:
            self.stats.accepted += 1
            self._slot_accepted += 1
        else:
            self.stats.rejected += 1
            self._slot_rejected += 1
        return decision

    # -- inspection ---------------------------------------------------------
    def profile_of(self, rid) -> dict:
        out = {}
        for l in self.topology.links:
            for t, a in self.states[l.id].ledger.get(rid, {}).items():
                out[(t, l.id)] = a
        return out

    def slot_flows(self, rid, t) -> dict:
        out = {}
        for l in self.topology.links:
            a = self.states[l.id].ledger.get(rid, {}).get(t)
            if a:
                out[l.id] = a
        return out

    def decompose(self, rid, t) -> list[tuple[tuple, float]]:
        """Split ``rid``'s flow at slot ``t`` into source-sink paths
        (fewest hops first, then lowest link index).  Reporting aid only."""
        req = self.transfers[rid].request
        flows = self.slot_flows(rid, t)
        return decompose_paths(self.topology.links, flows, req.source, req.destination)

    # -- current-slot filling -------------------------------------------------
    def _future_slots(self, rid) -> list[int]:
        slots = set()
        for l in self.topology.links:
            slots.update(t for t in self.states[l.id].ledger.get(rid, {}) if t > self.t_now)
        return sorted(slots)

    def pull_forward(self) -> list[tuple[Hashable, tuple, float]]:
        """Move whole-path chunks of future mass into the current slot where
        every link of the path has spare capacity now."""
        t_now = self.t_now
        moves = []
        blocked: set = set()
        while True:
            cands = []
            for rid, tr in self.transfers.items():
                if rid in blocked:
                    continue
                slots = self._future_slots(rid)
                if slots:
                    cands.append((slots[0], tr.request.deadline, rid, slots))
            if not cands:
                break
            cands.sort(key=lambda c: (c[0], c[1], c[2]))
            _, _, rid, slots = cands[0]
            move = self._try_pull(rid, slots)
            if move is None:
                blocked.add(rid)
            else:
                moves.append(move)
        return moves

    pull_forward_net = pull_forward

    def _try_pull(self, rid, slots):
        t_now = self.t_now
        for s in slots:
            for path, amount in self.decompose(rid, s):
                spare = min(self.states[lid].residual_at(t_now) for lid in path)
                if spare <= EPS:
                    continue
                take = amount if amount - spare <= EPS else spare
                for lid in path:
                    self.states[lid].move(rid, s, t_now, take)
                return (rid, path, take)
        return None

    # -- clock ----------------------------------------------------------------
    def advance(self) -> SlotReport:
        slot = self.t_now
        per_link = {}
        delivered: dict = {}
        for l in self.topology.links:
            ls = self.states[l.id]
            popped = ls.pop_slot(slot)
            used = sum(popped.values())
            per_link[l.id] = used / ls.capacity
            for rid, a in popped.items():
                req = self.transfers[rid].request
                if l.src == req.source:
                    delivered[rid] = delivered.get(rid, 0.0) + a
        sent = 0.0
        for rid, a in delivered.items():
            self.transfers[rid].sent += a
            sent += a
        completed = []
        for rid in sorted(delivered, key=str):
            tr = self.transfers[rid]
            if tr.remaining <= EPS:
                completed.append(rid)
                for l in self.topology.links:
                    self.states[l.id].release(rid)
                del self.transfers[rid]
                self.stats.completed += 1
        self.stats.sent += sent
        self.t_now = slot + 1
        for l in self.topology.links:
            self.states[l.id].rotate(self.t_now)
        for rid in list(self.transfers):
            if self.transfers[rid].request.deadline < self.t_now:
                log.warning("request %r missed its deadline", rid)
                for l in self.topology.links:
                    self.states[l.id].release(rid)
                del self.transfers[rid]
                self.stats.missed += 1
        report = SlotReport(
            slot=slot,
            sent=sent,
            utilization=sum(per_link.values()) / len(per_link),
            accepted=self._slot_accepted,
            rejected=self._slot_rejected,
            completed=completed,
            per_link=per_link,
        )
        self._slot_accepted = self._slot_rejected = 0
        return report

    advance_net = advance

    # -- invariants / persistence ---------------------------------------------
    def constraint_error(self) -> float:
        """Worst violation over capacity, conservation and demand rows."""
        worst = 0.0
        for l in self.topology.links:
            ls = self.states[l.id]
            worst = max(worst, ls.bounds_error(), ls.conservation_error())
        for rid, tr in self.transfers.items():
            req = tr.request
            out_src = 0.0
            balance: dict = {}
            for (t, lid), a in self.profile_of(rid).items():
                if t < self.t_now or t > req.deadline:
                    return float("inf")
                link = self.topology.link(lid)
                if link.src == req.source:
                    out_src += a
                node_bal = balance.setdefault(t, {})
                node_bal[link.dst] = node_bal.get(link.dst, 0.0) + a
                node_bal[link.src] = node_bal.get(link.src, 0.0) - a
            worst = max(worst, abs(out_src - tr.remaining))
            for node_bal in balance.values():
                for node, b in node_bal.items():
                    if node not in (req.source, req.destination):
                        worst = max(worst, abs(b))
        return worst

    def to_json(self) -> dict:
        return {
            "scheduler": self.name,
            "t_now": self.t_now,
            "horizon": self.horizon,
            "k": self.k,
            "topology": self.topology.to_dict(),
            "residual": {str(l.id): self.states[l.id].residual for l in self.topology.links},
            "pending": {"accepted": self._slot_accepted, "rejected": self._slot_rejected},
            "transfers": [
                {
                    "id": rid,
                    "volume": tr.request.volume,
                    "arrival": tr.request.arrival,
                    "deadline": tr.request.deadline,
                    "src": tr.request.source,
                    "dst": tr.request.destination,
                    "sent": tr.sent,
                    "allocation": [
                        {"slot": t, "link": lid, "amount": a}
                        for (t, lid), a in sorted(self.profile_of(rid).items(), key=lambda kv: (kv[0][0], str(kv[0][1])))
                    ],
                }
                for rid, tr in self.transfers.items()
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> NetworkScheduler:
        topo = Topology.from_dict(doc["topology"], horizon=doc["horizon"], base=doc.get("t_now", 0))
        sched = cls(topo, k=doc.get("k", 0))
        for row in doc.get("transfers", []):
            req = Request(row["id"], row["volume"], row["arrival"], row["deadline"], row["src"], row["dst"])
            sched.transfers[req.id] = Transfer(req, row.get("sent", 0.0))
            for e in row.get("allocation", []):
                ls = topo.states[e["link"]]
                ls.ledger.setdefault(req.id, {})[e["slot"]] = e["amount"]
                ls.by_slot.setdefault(e["slot"], {})[req.id] = e["amount"]
        residual = doc.get("residual")
        for l in topo.links:
            ls = topo.states[l.id]
            if residual is not None:
                ls.set_residuals(residual[str(l.id)])
            else:
                for t, here in ls.by_slot.items():
                    ls._take(t, sum(here.values()))
        pending = doc.get("pending", {})
        sched._slot_accepted = pending.get("accepted", 0)
        sched._slot_rejected = pending.get("rejected", 0)
        if sched.constraint_error() > EPS:
            raise ValueError("state file violates capacity or conservation constraints")
        return sched

    def write_utilization_csv(self, reports: list[SlotReport], path) -> None:
        """Per-link utilization, one row per (slot, link)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "link", "utilization"])
            for rep in reports:
                for lid, u in (rep.per_link or {}).items():
                    w.writerow([rep.slot, lid, f"{u:.6f}"])
                w.writerow([rep.slot, "mean", f"{rep.utilization:.6f}"])


def decompose_paths(links: list[Link], flows: dict, source, sink) -> list[tuple[tuple, float]]:
    """Peel ``flows`` (link id -> amount) into source-sink paths by repeated
    fewest-hop search; leftover circulation is ignored."""
    flows = {lid: a for lid, a in flows.items() if a > EPS}
    order = {l.id: i for i, l in enumerate(links)}
    out_links: dict = {}
    for l in links:
        out_links.setdefault(l.src, []).append(l)
    paths = []
    while True:
        prev: dict = {source: None}
        queue = deque([source])
        while queue and sink not in prev:
            u = queue.popleft()
            for l in sorted(out_links.get(u, []), key=lambda l: order[l.id]):
                if flows.get(l.id, 0.0) > EPS and l.dst not in prev:
                    prev[l.dst] = l
                    queue.append(l.dst)
        if sink not in prev:
            break
        path = []
        v = sink
        while prev[v] is not None:
            path.append(prev[v].id)
            v = prev[v].src
        path.reverse()
        amount = min(flows[lid] for lid in path)
        for lid in path:
            flows[lid] -= amount
        paths.append((tuple(path), amount))
    return paths
