from __future__ import annotations

import numpy as np
import pytest

from seedbank.forward import (
    ForwardState,
    forward_acceptance_probability,
    forward_simulate,
    forward_step,
    forward_total_rate,
    run_forward,
)
from seedbank.model import Configuration, System, config_add_sub, delta, sample_initial
from seedbank.rng import stream
from seedbank.stats import Estimate, z_against


def single(N, M, lam=1.0):
    return System.build(1, 1, N, M, lam)


def test_config_add_sub_examples():
    p = single(3, 2).profile
    eta = Configuration([2], [1])
    assert config_add_sub(p, eta, Configuration([0], [0])) == eta
    assert config_add_sub(p, Configuration([3], [1]), delta(1, 0, "A")).X[0] == 3
    assert config_add_sub(p, Configuration([0], [1]), delta(1, 0, "A"), sign=-1).X[0] == 0
    assert config_add_sub(p, eta, delta(1, 0, "D")) == Configuration([2], [2])
    with pytest.raises(ValueError):
        config_add_sub(p, eta, eta, sign=2)


def test_configuration_validation():
    p = single(2, 1).profile
    with pytest.raises(ValueError):
        Configuration([3], [0]).validate(p)
    with pytest.raises(ValueError):
        Configuration([1, 1], [0, 0]).validate(p)
    with pytest.raises(ValueError):
        delta(2, 0, "X")


def test_sample_initial_extremes():
    p = System.build(1, 4, (2, 3, 2, 1), (1, 2, 2, 1)).profile
    rng = stream(0, "t")
    assert sample_initial(p, {"type": "binomial", "theta": 0.0}, rng).mass == 0
    top = sample_initial(p, {"type": "binomial", "theta": 1.0}, rng)
    assert top == Configuration(p.N, p.M)
    X, Y = sample_initial(p, {"type": "binomial", "theta": 0.5}, rng, size=50)
    assert X.shape == (50, 4) and np.all(X <= p.N_arr) and np.all(Y <= p.M_arr)
    with pytest.raises(ValueError):
        sample_initial(p, {"type": "binomial", "theta": 1.5}, rng)


def test_total_rate_hand_sums():
    s = single(2, 1)
    # a(0,0)=1/2: resampling 1/2*(1*1/2 + 1*1/2) = 1/2; exchange (1*0 + 1*1)/1 = 1
    assert forward_total_rate(s, [1], [1]) == pytest.approx(1.5)
    assert forward_total_rate(s, [2], [1]) == 0.0
    assert forward_total_rate(s, [0], [0]) == 0.0


def test_acceptance_identity_on_ring():
    s = System.build(1, 4, (2, 3, 2, 1), (1, 2, 2, 1))
    rng = stream(1, "acc")
    for _ in range(200):
        X = rng.integers(0, s.N + 1)
        Y = rng.integers(0, s.M + 1)
        assert s.envelope * forward_acceptance_probability(s, X, Y) == pytest.approx(
            forward_total_rate(s, X, Y), abs=1e-12)


def test_step_moves_one_unit():
    s = System.build(1, 3, 2, 1)
    st = ForwardState.start(s, Configuration([1, 2, 0], [0, 1, 1]))
    rng = stream(2, "step")
    for _ in range(500):
        before = (st.X.copy(), st.Y.copy())
        _, ev = forward_step(s, st, rng)
        change = np.abs(st.X - before[0]).sum() + np.abs(st.Y - before[1]).sum()
        if ev.kind == "rejected-proposal":
            assert change == 0
        elif ev.kind.startswith("resample"):
            assert change == 1
        else:
            assert change == 2 and (st.X + st.Y).sum() == (before[0] + before[1]).sum()


def test_horizon_zero_and_absorbing():
    s = System.build(1, 3, 2, 1)
    init = Configuration([1, 0, 2], [1, 0, 0])
    tr = forward_simulate(s, init, [0.0], stream(0, "h0"))
    assert tr.X.tolist() == [[1, 0, 2]] and tr.Y.tolist() == [[1, 0, 0]]
    zero = forward_simulate(s, Configuration([0, 0, 0], [0, 0, 0]), [1.0, 5.0], stream(0, "z"))
    assert zero.X.sum() == 0 and zero.Y.sum() == 0


def test_batch_reproducible_and_boxed():
    s = System.build(1, 4, (2, 3, 2, 1), (1, 2, 2, 1))
    a = run_forward(s, {"type": "binomial", "theta": 0.5}, [0.5, 1.0], 3000, 7, "t", check=True)
    b = run_forward(s, {"type": "binomial", "theta": 0.5}, [0.5, 1.0], 3000, 7, "t", check=True)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    assert a.violations == 0
    assert np.all((a.X >= 0) & (a.X <= s.N) & (a.Y >= 0) & (a.Y <= s.M))


def test_batch_independent_of_worker_count():
    s = System.build(1, 2, 2, 1)
    from seedbank import rng

    rng.set_workers(2)
    try:
        a = run_forward(s, Configuration([1, 1], [0, 1]), [1.0], 20_000, 3, "w")
    finally:
        rng.set_workers(1)
    b = run_forward(s, Configuration([1, 1], [0, 1]), [1.0], 20_000, 3, "w")
    assert np.array_equal(a.X, b.X)


def test_single_site_N1_M1_never_fixes():
    # resampling is a no-op when N=1, so {(1,0),(0,1)} is a closed class
    from seedbank.oracle import build_forward_generator, stationary_distribution

    s = single(1, 1)
    fw = build_forward_generator(s)
    st = stationary_distribution(fw)
    classes = sorted(sorted(map(tuple, fw.states[c].tolist())) for c in st.classes)
    assert classes == [[(0, 0)], [(0, 1), (1, 0)], [(1, 1)]]
    assert sorted(st.traps) == [False, False, True]
    start = fw.lookup(np.array([1, 0]))
    top = [c for c, cls in enumerate(st.classes) if fw.states[cls[0]].tolist() == [1, 1]][0]
    assert st.absorption[start, top] == 0.0
    with pytest.raises(ValueError, match="never fixes"):
        run_forward(s, Configuration([1], [0]), [np.inf], 10, 0, "fix11", stop_when_absorbed=True)
    # over a long finite window the pair keeps swapping and mass stays 1
    b = run_forward(s, Configuration([1], [0]), [50.0], 2000, 0, "swap11")
    assert np.all(b.X[:, 0, 0] + b.Y[:, 0, 0] == 1)


def test_fixation_single_site_N2_M1():
    s = single(2, 1)
    b = run_forward(s, Configuration([1], [1]), [np.inf], 100_000, 11, "fix21", stop_when_absorbed=True)
    ends = set(map(tuple, np.c_[b.X[:, 0, 0], b.Y[:, 0, 0]].tolist()))
    assert ends <= {(0, 0), (2, 1)}
    z = z_against(Estimate.of(b.X[:, 0, 0] == 2), 2 / 3)
    assert abs(z) <= 4


def test_infinite_horizon_guards():
    s = single(2, 1)
    with pytest.raises(ValueError):
        run_forward(s, Configuration([1], [1]), [np.inf], 10, 0, "g")
    with pytest.raises(ValueError):
        forward_simulate(s, Configuration([1], [1]), [np.inf], stream(0, "g"))
