"""Shared fixtures: the two expensive reference simulation runs.

Both runs are reused across the unit tests and the acceptance suite so the
whole suite pays for each 1e5-trial simulation exactly once.
"""
from __future__ import annotations

import time

import pytest

from riscov import montecarlo
from riscov.config import NetworkConfig

ACCEPT_SEED = 20260810


class TimedRun:
    def __init__(self, spec: montecarlo.RunSpec):
        self.spec = spec
        t0 = time.perf_counter()
        self.records = montecarlo.simulate(spec)
        self.duration_s = time.perf_counter() - t0


@pytest.fixture(scope="session")
def dense_run() -> TimedRun:
    """1e5 trials at the default dense-reflector operating point."""
    cfg = NetworkConfig(n_trials=100_000, master_seed=ACCEPT_SEED)
    return TimedRun(montecarlo.RunSpec.from_config(cfg))


@pytest.fixture(scope="session")
def sparse_run() -> TimedRun:
    """1e5 trials at the distance-distribution benchmark densities
    (1000 reflectors and 25 bases per km^2)."""
    cfg = NetworkConfig(lambda_ris=1000.0, n_trials=100_000, master_seed=ACCEPT_SEED + 1)
    return TimedRun(montecarlo.RunSpec.from_config(cfg))
