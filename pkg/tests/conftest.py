"""Shared scan builders for the test suite."""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlscomplex.scan_model import Scan  # noqa: E402


def rotating_scan(ranges_per_pulse, n_p: float, speed: float = 1.0, rate: float = 10.0,
                  theta0: float = 0.0) -> Scan:
    """Scan of a head turning about +x while moving along +x.

    ``ranges_per_pulse`` is a list (one entry per pulse) of range lists,
    sorted ascending; empty lists are empty pulses.
    """
    P = len(ranges_per_pulse)
    k = np.arange(P)
    theta = np.mod(theta0 + 2 * math.pi * np.mod(k / n_p, 1.0), 2 * math.pi)
    time = k / (n_p * rate)
    origin = np.stack([speed * time, np.zeros(P), np.zeros(P)], axis=1)
    direction = np.stack([np.zeros(P), -np.sin(theta), np.cos(theta)], axis=1)
    counts = [len(r) for r in ranges_per_pulse]
    return Scan(
        pulse_id=k, time=time, theta=theta, origin=origin, direction=direction,
        echo_offsets=np.r_[0, np.cumsum(counts)].astype(np.int64),
        echo_range=[float(x) for r in ranges_per_pulse for x in r], n_p=n_p,
    )


def random_scan(seed: int, n_p: float = 10.0, lines: int = 10, max_echoes: int = 3,
                p_empty: float = 0.1, base_range: float = 10.0, jitter: float = 0.05,
                p_outlier: float = 0.2) -> Scan:
    """Mostly smooth ranges with random extra echoes, outliers and empty pulses."""
    rng = np.random.default_rng(seed)
    P = int(round(n_p * lines))
    pulses = []
    for k in range(P):
        if rng.random() < p_empty:
            pulses.append([])
            continue
        m = int(rng.integers(1, max_echoes + 1))
        r = [base_range * (1 + jitter * rng.standard_normal())]
        for _ in range(m - 1):
            r.append(float(rng.uniform(0.5, 3.0) * base_range) if rng.random() < p_outlier
                     else r[0] + float(rng.uniform(0.2, 2.0)))
        pulses.append(sorted(max(x, 0.1) for x in r))
    return rotating_scan(pulses, n_p)


@pytest.fixture
def small_random_scan() -> Scan:
    return random_scan(0)
