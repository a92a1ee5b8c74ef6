from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from driftwatch.divergence import BinningSpec, ScoreDistribution
from driftwatch.monitor import MonitorConfig
from driftwatch.windowing import WindowSpec

ORIGIN = datetime(2020, 1, 1, tzinfo=timezone.utc)
TWO_BINS = BinningSpec(2)
TEN_BINS = BinningSpec(10)


def dist(*mass, binning=None, n=100):
    binning = binning or BinningSpec(len(mass))
    return ScoreDistribution(binning, mass, n)


def random_dist(rng: np.random.Generator, bins: int = 10, sparse: bool = False) -> ScoreDistribution:
    raw = rng.dirichlet(np.ones(bins))
    if sparse:
        raw[rng.random(bins) < 0.3] = 0.0
        if raw.sum() == 0:
            raw[0] = 1.0
    raw = raw / raw.sum()
    return ScoreDistribution(BinningSpec(bins), raw.tolist(), 1000)


@pytest.fixture
def window_spec() -> WindowSpec:
    return WindowSpec(timedelta(days=30), ORIGIN, min_samples=100)


@pytest.fixture
def config(window_spec) -> MonitorConfig:
    return MonitorConfig("AI1", ("AI2", "AI3"), window_spec)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
