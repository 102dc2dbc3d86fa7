"""Synthetic arrivals: Poisson counts per slot, exponential deadline offsets
(rounded to whole slots, at least one) and exponential volumes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .model import Request

SCHEDULERS = ("rcd", "baseline")


class ConfigError(ValueError):
    pass


class HorizonConfigError(ConfigError):
    """A request lies beyond what the configured horizon can hold."""


@dataclass
class SimulationConfig:
    lam: float = 1.0
    mean_deadline_offset: float = 12.0
    mean_demand: float = 0.286
    slots: int = 576
    replications: int = 3
    seed: int = 0
    scheduler: str = "rcd"
    capacity: float = 1.0
    highpri_fraction: float = 0.0
    k_paths: int = 0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ConfigError("lambda must be > 0")
        if self.slots < 1 or self.replications < 1:
            raise ConfigError("slots and replications must be >= 1")
        if not (self.mean_deadline_offset > 0 and self.mean_demand > 0 and self.capacity > 0):
            raise ConfigError("mean values and capacity must be > 0")
        if not 0 <= self.highpri_fraction < 1:
            raise ConfigError("highpri_fraction must lie in [0, 1)")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"scheduler must be one of {SCHEDULERS}")
        if self.k_paths < 0:
            raise ConfigError("k_paths must be >= 0")

    @property
    def effective_capacity(self) -> float:
        """Capacity left for elastic traffic after the highpri share."""
        return self.capacity * (1.0 - self.highpri_fraction)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> SimulationConfig:
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def load(cls, path) -> SimulationConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
        return cls.from_dict(doc)


def generate_workload(
    config: SimulationConfig, replication: int = 0, pairs: list[tuple] | None = None
) -> list[Request]:
    """Request stream for one replication, ordered by arrival slot.

    Reproducible from ``(config.seed, replication)``.  With ``pairs`` each
    request also gets a (source, destination) drawn uniformly from it.
    """
    rng = np.random.default_rng([config.seed, replication])
    counts = rng.poisson(config.lam, config.slots)
    total = int(counts.sum())
    offsets = np.maximum(1, np.rint(rng.exponential(config.mean_deadline_offset, total))).astype(int)
    volumes = rng.exponential(config.mean_demand, total)
    # an exact zero draw is possible in principle; volumes must be positive
    volumes = np.where(volumes > 0, volumes, np.finfo(float).tiny)
    ends = rng.integers(len(pairs), size=total) if pairs else None
    arrivals = np.repeat(np.arange(config.slots), counts)
    out = []
    for i in range(total):
        a = int(arrivals[i])
        src = dst = None
        if ends is not None:
            src, dst = pairs[int(ends[i])]
        out.append(Request(i, float(volumes[i]), a, a + int(offsets[i]), src, dst))
    return out
