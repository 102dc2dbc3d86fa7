"""Slot-by-slot simulation producing failure rate, utilization and mean
allocation time, averaged over replications."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import networkx as nx

from .baseline import BaselineScheduler
from .link import HORIZON, RCDScheduler
from .model import Topology
from .network import NetworkScheduler
from .workload import ConfigError, HorizonConfigError, SimulationConfig, generate_workload

log = logging.getLogger(__name__)


@dataclass
class ReplicationResult:
    replication: int
    requests: int
    accepted: int
    rejected: int
    failure_rate: float
    utilization: float
    mean_alloc_time_us: float
    sent: float


@dataclass
class MetricsReport:
    scheduler: str
    lam: float
    failure_rate: float
    mean_utilization: float
    mean_allocation_time: float  # seconds per submit
    replications: list[ReplicationResult] = field(default_factory=list)

    @property
    def mean_alloc_time_us(self) -> float:
        return self.mean_allocation_time * 1e6

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def _make_scheduler(config: SimulationConfig, horizon: int, topology_doc: dict | None):
    if topology_doc is not None:
        if config.scheduler != "rcd":
            raise ConfigError("network mode only supports the rcd scheduler")
        topo = Topology.from_dict(topology_doc, horizon=horizon)
        return NetworkScheduler(topo, k=config.k_paths)
    cls = RCDScheduler if config.scheduler == "rcd" else BaselineScheduler
    return cls(config.effective_capacity, horizon)


def _pairs(topology_doc: dict) -> list[tuple]:
    g = nx.DiGraph()
    g.add_nodes_from(topology_doc["nodes"])
    g.add_edges_from((l["src"], l["dst"]) for l in topology_doc["links"])
    pairs = [
        (u, v) for u, v in itertools.permutations(topology_doc["nodes"], 2) if nx.has_path(g, u, v)
    ]
    if not pairs:
        raise ConfigError("topology has no connected node pair")
    return pairs


def run_replication(
    config: SimulationConfig,
    replication: int,
    topology_doc: dict | None = None,
    reports: list | None = None,
    stream: list | None = None,
) -> ReplicationResult:
    """One pass over ``config.slots`` slots.  ``stream`` replaces the
    generated workload when given (it must be sorted by arrival)."""
    if stream is None:
        pairs = _pairs(topology_doc) if topology_doc is not None else None
        stream = generate_workload(config, replication, pairs)
    horizon = max((r.deadline - r.arrival for r in stream), default=1)
    sched = _make_scheduler(config, horizon, topology_doc)
    clock = time.perf_counter_ns
    elapsed = 0
    util_sum = 0.0
    i = 0
    for slot in range(config.slots):
        while i < len(stream) and stream[i].arrival == slot:
            req = stream[i]
            t0 = clock()
            decision = sched.submit(req)
            elapsed += clock() - t0
            if not decision.accepted and decision.reason == HORIZON:
                raise HorizonConfigError(f"request {req.id} lies beyond the scheduler horizon")
            i += 1
        sched.pull_forward()
        rep = sched.advance()
        util_sum += rep.utilization
        if reports is not None:
            reports.append(rep)
    n = len(stream)
    stats = sched.stats
    return ReplicationResult(
        replication=replication,
        requests=n,
        accepted=stats.accepted,
        rejected=stats.rejected,
        failure_rate=stats.rejected / n if n else 0.0,
        utilization=util_sum / config.slots,
        mean_alloc_time_us=elapsed / n / 1e3 if n else 0.0,
        sent=stats.sent,
    )


def run_simulation(
    config: SimulationConfig, topology_doc: dict | None = None, stream: list | None = None
) -> MetricsReport:
    """Drive the configured scheduler over every replication and average.

    A fixed ``stream`` is replayed once instead of generating replications.
    """
    if stream is not None:
        results = [run_replication(config, 0, topology_doc, stream=stream)]
    else:
        results = [run_replication(config, r, topology_doc) for r in range(config.replications)]
    k = len(results)
    return MetricsReport(
        scheduler=config.scheduler if topology_doc is None else "rcd-net",
        lam=config.lam,
        failure_rate=sum(r.failure_rate for r in results) / k,
        mean_utilization=sum(r.utilization for r in results) / k,
        mean_allocation_time=sum(r.mean_alloc_time_us for r in results) / k / 1e6,
        replications=results,
    )


@dataclass
class ComparisonRow:
    lam: float
    rcd: MetricsReport
    baseline: MetricsReport

    @property
    def speedup(self) -> float:
        t = self.rcd.mean_allocation_time
        return self.baseline.mean_allocation_time / t if t > 0 else float("inf")


def compare_schedulers(lambdas, config: SimulationConfig) -> list[ComparisonRow]:
    """Run RCD and the baseline on identical request streams per lambda."""
    rows = []
    for lam in lambdas:
        reports = {
            name: run_simulation(replace(config, lam=float(lam), scheduler=name))
            for name in ("rcd", "baseline")
        }
        rows.append(ComparisonRow(float(lam), reports["rcd"], reports["baseline"]))
        log.info(
            "lambda=%g failure %.3f/%.3f util %.3f/%.3f speedup %.2f",
            lam, reports["rcd"].failure_rate, reports["baseline"].failure_rate,
            reports["rcd"].mean_utilization, reports["baseline"].mean_utilization,
            rows[-1].speedup,
        )
    return rows
