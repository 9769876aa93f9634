from __future__ import annotations

import math

import numpy as np
import pytest

from seedbank import rng
from seedbank.stats import Estimate, two_sided_p, wilson_interval, z_against, z_score


def _draw(g, size):
    return g.random(size)


def test_streams_are_keyed():
    a = rng.stream(1, "x", 0).random(4)
    assert np.array_equal(a, rng.stream(1, "x", 0).random(4))
    assert not np.array_equal(a, rng.stream(1, "y", 0).random(4))
    assert not np.array_equal(a, rng.stream(1, "x", 1).random(4))
    assert not np.array_equal(a, rng.stream(2, "x", 0).random(4))


def test_map_chunks_order_and_sizes():
    assert rng.chunk_sizes(10, 4) == [4, 4, 2]
    with pytest.raises(ValueError):
        rng.chunk_sizes(0)
    serial = rng.concat(rng.map_chunks(_draw, 10, 3, "e", chunk=4, n_workers=1))
    parallel = rng.concat(rng.map_chunks(_draw, 10, 3, "e", chunk=4, n_workers=2))
    assert serial.shape == (10,) and np.array_equal(serial, parallel)


def test_env_worker_fallback(monkeypatch):
    monkeypatch.setenv("SEEDBANK_THREADS", "3")
    assert rng.default_workers() == 3
    monkeypatch.delenv("SEEDBANK_THREADS")
    assert rng.default_workers() >= 1


def test_z_scores():
    a = Estimate.of([1.0, 0.0, 1.0, 0.0])
    assert a.mean == 0.5 and a.n == 4
    assert z_against(a, 0.5) == 0.0
    z, s = z_score(a, Estimate.of([0.0, 0.0, 0.0, 0.0]))
    assert s > 0 and z == pytest.approx(0.5 / s)
    const = Estimate.of([1.0, 1.0])
    assert z_against(const, 1.0) == 0.0 and math.isinf(z_against(const, 0.5))
    assert two_sided_p(0.0) == pytest.approx(1.0)
    assert two_sided_p(4.0) == pytest.approx(6.334e-5, rel=1e-3)


def test_wilson_interval():
    lo, hi = wilson_interval(np.array([0, 50, 100]), 100)
    assert lo[0] == 0 and hi[2] == 1
    assert lo[1] < 0.5 < hi[1]
