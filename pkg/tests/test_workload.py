import json

import numpy as np
import pytest

from rcd.workload import ConfigError, SimulationConfig, generate_workload


def test_request_count_within_three_sigma():
    # Poisson(576) per replication: mean 576, sd 24
    counts = [len(generate_workload(SimulationConfig(lam=1.0, seed=s))) for s in range(40)]
    assert all(abs(c - 576) <= 3 * 24 for c in counts)
    assert abs(np.mean(counts) - 576) <= 3 * 24 / np.sqrt(len(counts))


def test_stream_is_deterministic():
    cfg = SimulationConfig(lam=3.0, seed=11)
    assert generate_workload(cfg, 2) == generate_workload(cfg, 2)
    assert generate_workload(cfg, 0) != generate_workload(cfg, 1)


def test_offset_and_volume_means():
    cfg = SimulationConfig(lam=1e5 / 576, seed=5)
    stream = generate_workload(cfg)
    assert len(stream) > 90_000
    offsets = np.array([r.deadline - r.arrival for r in stream])
    volumes = np.array([r.volume for r in stream])
    assert offsets.min() >= 1
    # rounding Exp(12) to the nearest integer keeps the mean, the floor of 1 adds ~0.04
    assert offsets.mean() == pytest.approx(12.0, rel=0.02)
    assert volumes.mean() == pytest.approx(0.286, rel=0.02)
    assert (volumes > 0).all()


def test_stream_is_ordered_with_pairs():
    pairs = [("A", "B"), ("B", "A")]
    stream = generate_workload(SimulationConfig(lam=2.0, slots=20), pairs=pairs)
    assert [r.arrival for r in stream] == sorted(r.arrival for r in stream)
    assert {(r.source, r.destination) for r in stream} <= set(pairs)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lam": 0},
        {"slots": 0},
        {"replications": 0},
        {"mean_demand": -1},
        {"highpri_fraction": 1.0},
        {"scheduler": "fifo"},
        {"k_paths": -1},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        SimulationConfig(**kwargs)


def test_config_file_round_trip(tmp_path):
    cfg = SimulationConfig(lam=2.5, seed=3, scheduler="baseline")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert SimulationConfig.load(path) == cfg
    path.write_text(json.dumps({"lambda": 1, "bogus": 2}))
    with pytest.raises(ConfigError):
        SimulationConfig.load(path)


def test_highpri_fraction_reduces_capacity():
    assert SimulationConfig(capacity=2.0, highpri_fraction=0.25).effective_capacity == 1.5
