"""File formats: topology and request documents (JSON), scheduler state
files, and the long-format results CSV."""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path

from .model import Request, Topology
from .workload import ConfigError

RESULT_COLUMNS = ["lambda", "scheduler", "replication", "failure_rate", "utilization", "mean_alloc_time_us"]
TABLE_COLUMNS = [
    "lambda",
    "failure_rcd",
    "failure_baseline",
    "utilization_rcd",
    "utilization_baseline",
    "alloc_time_us_rcd",
    "alloc_time_us_baseline",
    "speedup",
]


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None


def load_topology_doc(path) -> dict:
    doc = read_json(path)
    if not isinstance(doc, dict) or "nodes" not in doc or "links" not in doc:
        raise ConfigError(f"{path}: topology needs 'nodes' and 'links'")
    for row in doc["links"]:
        missing = {"id", "src", "dst", "capacity"} - set(row)
        if missing:
            raise ConfigError(f"{path}: link missing {sorted(missing)}")
    return doc


def load_topology(path, horizon: int = 288) -> Topology:
    doc = load_topology_doc(path)
    try:
        return Topology.from_dict(doc, horizon=horizon)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None


def gscale_path() -> Path:
    return Path(str(resources.files("rcd") / "data" / "gscale.json"))


def request_from_dict(row: dict) -> Request:
    try:
        return Request(
            row["id"],
            float(row["volume"]),
            int(row["arrival"]),
            int(row["deadline"]),
            row.get("src"),
            row.get("dst"),
            row.get("kind", "elastic"),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"bad request {row!r}: {err}") from None


def load_requests(path) -> list[Request]:
    doc = read_json(path)
    if isinstance(doc, dict):
        doc = [doc]
    reqs = [request_from_dict(row) for row in doc]
    reqs.sort(key=lambda r: r.arrival)
    return reqs


def request_to_dict(req: Request) -> dict:
    out = {"id": req.id, "volume": req.volume, "arrival": req.arrival, "deadline": req.deadline}
    if req.source is not None:
        out["src"] = req.source
        out["dst"] = req.destination
    return out


def results_csv(reports, timing: bool = True) -> str:
    """Long format: one row per (lambda, scheduler, replication)."""
    fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for rep in reports:
        for r in rep.replications:
            w.writerow([
                f"{rep.lam:g}",
                rep.scheduler,
                r.replication,
                f"{r.failure_rate:.6f}",
                f"{r.utilization:.6f}",
                int(round(r.mean_alloc_time_us)) if timing else "",
            ])
    return fh.getvalue()


def table_csv(rows, timing: bool = True) -> str:
    """Per-lambda side-by-side comparison of both schedulers."""
    fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row in rows:
        w.writerow([
            f"{row.lam:g}",
            f"{row.rcd.failure_rate:.6f}",
            f"{row.baseline.failure_rate:.6f}",
            f"{row.rcd.mean_utilization:.6f}",
            f"{row.baseline.mean_utilization:.6f}",
            int(round(row.rcd.mean_alloc_time_us)) if timing else "",
            int(round(row.baseline.mean_alloc_time_us)) if timing else "",
            f"{row.speedup:.2f}" if timing else "",
        ])
    return fh.getvalue()


def write_results_csv(reports, path, timing: bool = True) -> None:
    Path(path).write_text(results_csv(reports, timing))


def write_table_csv(rows, path, timing: bool = True) -> None:
    Path(path).write_text(table_csv(rows, timing))
