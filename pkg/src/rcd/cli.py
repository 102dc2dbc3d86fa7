"""Command-line entry point: ``rcd simulate | sweep | compare | solve``.

Exit codes: 0 success, 2 bad arguments or config, 3 horizon error, 4 I/O
error.  ``RCD_LOG_LEVEL`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .baseline import BaselineScheduler
from .formats import (
    gscale_path,
    load_requests,
    load_topology_doc,
    read_json,
    request_from_dict,
    results_csv,
    table_csv,
)
from .link import HORIZON, RCDScheduler
from .model import Request, Topology
from .network import NetworkScheduler
from .sim import compare_schedulers, run_simulation
from .workload import ConfigError, HorizonConfigError, SimulationConfig

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_HORIZON = 3
EXIT_IO = 4

log = logging.getLogger("rcd")

# CLI flag -> SimulationConfig field
OVERRIDES = {
    "lam": "lam",
    "slots": "slots",
    "seed": "seed",
    "replications": "replications",
    "scheduler": "scheduler",
    "capacity": "capacity",
    "highpri_fraction": "highpri_fraction",
    "k_paths": "k_paths",
}


class UsageError(ConfigError):
    pass


def _lambdas(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty lambda list")
    return vals


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with SimulationConfig fields")
    p.add_argument("--lambda", dest="lam", type=float, help="mean arrivals per slot")
    p.add_argument("--slots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--capacity", type=float, help="link capacity per slot")
    p.add_argument("--highpri-fraction", type=float, help="capacity share held back for highpri traffic")
    p.add_argument("--k-paths", type=int, help="prune to k shortest paths (0 = all links)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-timing", action="store_true", help="blank out timing columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcd", description="Deadline-aware bandwidth scheduling")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    _common(sim)
    sim.add_argument("--scheduler", choices=("rcd", "baseline", "net"))
    sim.add_argument("--topology", help="topology JSON, or 'gscale' for the bundled one")
    sim.add_argument("--workload", help="request JSON to replay instead of generating arrivals")

    sweep = sub.add_parser("sweep", help="both schedulers over a range of lambda")
    _common(sweep)
    sweep.add_argument("--lambdas", type=_lambdas, default=_lambdas("1,2,3,4,5,6,7,8"))
    sweep.add_argument("--table", help="also write the per-lambda comparison table here")

    cmp_ = sub.add_parser("compare", help="both schedulers at one lambda")
    _common(cmp_)

    solve = sub.add_parser("solve", help="allocate one request against a state")
    solve.add_argument("--state", help="saved scheduler state (JSON)")
    solve.add_argument("--topology", help="start from an empty network with this topology")
    solve.add_argument("--request", help="request JSON")
    solve.add_argument("--id", default="r0")
    solve.add_argument("--volume", type=float)
    solve.add_argument("--deadline", type=int)
    solve.add_argument("--src")
    solve.add_argument("--dst")
    solve.add_argument("--capacity", type=float, default=1.0)
    solve.add_argument("--horizon", type=int, default=288)
    solve.add_argument("--k-paths", type=int, default=0)
    solve.add_argument("--baseline", action="store_true", help="use the baseline scheduler")
    solve.add_argument("--save-state", help="write the updated state here")
    solve.add_argument("--out", help="output file (default: stdout)")
    return parser


def make_config(args) -> SimulationConfig:
    doc = read_json(args.config) if args.config else {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{args.config}: expected a JSON object")
    config = SimulationConfig.from_dict(doc)
    changes = {
        field: getattr(args, flag)
        for flag, field in OVERRIDES.items()
        if getattr(args, flag, None) is not None
    }
    if changes.get("scheduler") == "net":
        changes["scheduler"] = "rcd"
    try:
        return replace(config, **changes)
    except TypeError as err:
        raise ConfigError(str(err)) from None


def _topology_doc(name: str | None) -> dict | None:
    if name is None:
        return None
    return load_topology_doc(gscale_path() if name == "gscale" else name)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _report_dict(report, timing: bool) -> dict:
    d = report.to_dict()
    if not timing:
        d["mean_allocation_time"] = None
        for r in d["replications"]:
            r["mean_alloc_time_us"] = None
    return d


def cmd_simulate(args) -> int:
    config = make_config(args)
    network = args.scheduler == "net" or args.topology is not None
    if network and args.topology is None:
        raise UsageError("network mode needs --topology")
    topo = _topology_doc(args.topology)
    stream = load_requests(args.workload) if args.workload else None
    report = run_simulation(config, topo, stream)
    timing = not args.no_timing
    if args.format == "json":
        _emit(json.dumps(_report_dict(report, timing), indent=2) + "\n", args.out)
    else:
        _emit(results_csv([report], timing), args.out)
    return EXIT_OK


def _comparison(args, lambdas) -> int:
    config = make_config(args)
    rows = compare_schedulers(lambdas, config)
    timing = not args.no_timing
    if args.format == "json":
        doc = {
            "rows": [
                {
                    "lambda": row.lam,
                    "rcd": _report_dict(row.rcd, timing),
                    "baseline": _report_dict(row.baseline, timing),
                    "speedup": row.speedup if timing else None,
                }
                for row in rows
            ]
        }
        if timing:
            doc["max_speedup"] = max(row.speedup for row in rows)
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        reports = [rep for row in rows for rep in (row.rcd, row.baseline)]
        _emit(results_csv(reports, timing), args.out)
    if getattr(args, "table", None):
        Path(args.table).write_text(table_csv(rows, timing))
    if timing:
        best = max(rows, key=lambda r: r.speedup)
        print(f"max speedup {best.speedup:.2f}x at lambda={best.lam:g}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    return _comparison(args, args.lambdas)


def cmd_compare(args) -> int:
    return _comparison(args, [args.lam if args.lam is not None else make_config(args).lam])


def _load_state(args):
    if args.state:
        doc = read_json(args.state)
        kind = doc.get("scheduler", "rcd")
        cls = {"rcd": RCDScheduler, "baseline": BaselineScheduler, "rcd-net": NetworkScheduler}.get(kind)
        if cls is None:
            raise ConfigError(f"{args.state}: unknown scheduler {kind!r}")
        try:
            return cls.from_json(doc)
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"{args.state}: {err}") from None
    if args.topology:
        doc = _topology_doc(args.topology)
        try:
            topo = Topology.from_dict(doc, horizon=args.horizon)
        except ValueError as err:
            raise ConfigError(f"{args.topology}: {err}") from None
        return NetworkScheduler(topo, k=args.k_paths)
    cls = BaselineScheduler if args.baseline else RCDScheduler
    return cls(args.capacity, args.horizon)


def _request(args, t_now: int) -> Request:
    if args.request:
        reqs = load_requests(args.request)
        if len(reqs) != 1:
            raise ConfigError(f"{args.request}: expected exactly one request, got {len(reqs)}")
        return reqs[0]
    if args.volume is None or args.deadline is None:
        raise UsageError("give --request or both --volume and --deadline")
    row = {"id": args.id, "volume": args.volume, "arrival": t_now, "deadline": args.deadline}
    if args.src is not None or args.dst is not None:
        row.update(src=args.src, dst=args.dst)
    return request_from_dict(row)


def cmd_solve(args) -> int:
    sched = _load_state(args)
    req = _request(args, sched.t_now)
    network = isinstance(sched, NetworkScheduler)
    if network and (req.source is None or req.destination is None):
        raise UsageError("network requests need src and dst")
    try:
        decision = sched.submit(req)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    diagnostics = {"scheduler": sched.name, "t_now": sched.t_now, "window": req.deadline - sched.t_now}
    if network:
        diagnostics["links"] = sched.topology.m
        diagnostics["variables"] = sched.last_variables
        diagnostics["variables_pruned"] = sched.last_variables_pruned
    else:
        diagnostics["variables"] = max(0, req.deadline - sched.t_now)
    _emit(json.dumps({"decision": decision.to_json(), "diagnostics": diagnostics}, indent=2) + "\n", args.out)
    if args.save_state:
        Path(args.save_state).write_text(json.dumps(sched.to_json(), indent=2) + "\n")
    if not decision.accepted and decision.reason == HORIZON:
        return EXIT_HORIZON
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "compare": cmd_compare, "solve": cmd_solve}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("RCD_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except HorizonConfigError as err:
        print(f"rcd: horizon error: {err}", file=sys.stderr)
        return EXIT_HORIZON
    except ConfigError as err:
        print(f"rcd: {err}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as err:
        print(f"rcd: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
