from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from seedbank import oracle
from seedbank.dual import (
    DualState,
    TwoParticleState,
    check_exclusion,
    coalescence_probability,
    counts_of,
    dual_simulate,
    dual_step,
    gamma_tail_diagnostic,
    pair_transitions,
    run_dual,
    run_pairs,
    two_particle_simulate,
)
from seedbank.model import System
from seedbank.rng import stream
from seedbank.stats import Estimate, z_against


def test_exclusion_rejected():
    s = System.build(1, 2, 2, 1)
    with pytest.raises(ValueError):
        check_exclusion(s, *counts_of(s, [(0, "D"), (0, "D")]))
    with pytest.raises(ValueError):
        DualState.start(s, [(1, "A")] * 3)


def test_one_active_particle_ring_frequencies():
    # L=3, N=2, M=1: per ring (rate c + lam = 2) own slot 1/8, own site empty 1/8,
    # each neighbour 1/8, fall dormant 1/2
    s = System.build(1, 3, 2, 1)
    rng = stream(0, "one")
    kinds = Counter()
    R = 40_000
    for _ in range(R):
        st = DualState.start(s, [(1, "A")])
        _, kind = dual_step(s, st, rng)
        kinds[kind] += 1
        if kind == "migration":
            kinds[f"to{st.particles[0].site}"] += 1
    want = {"own-slot": 1 / 8, "own-site": 1 / 8, "to0": 1 / 8, "to2": 1 / 8, "AtoD": 1 / 2}
    for k, p in want.items():
        z = (kinds[k] / R - p) / np.sqrt(p * (1 - p) / R)
        assert abs(z) <= 4, (k, kinds[k])
    assert kinds["coalescence"] == 0


def test_lone_dormant_particle_only_wakes():
    s = System.build(1, 2, 3, 2, lam=0.5)
    rng = stream(1, "dorm")
    st = DualState.start(s, [(0, "D")])
    assert st.total_rate(s) == pytest.approx(0.5 * 3 / 2)
    _, kind = dual_step(s, st, rng)
    assert kind == "DtoA" and st.particles[0].active


def test_within_site_coalescence_rate_from_generator():
    s = System.build(1, 1, 2, 1)
    dl = oracle.build_dual_generator(s, 3, particle_cap=3)
    two = dl.lookup(np.array([2, 0]))
    one = dl.lookup(np.array([1, 0]))
    assert dl.Q[two, one] == pytest.approx(0.5)


def test_single_particle_partition_fixed():
    s = System.build(1, 4, 2, 1)
    tr = dual_simulate(s, [(2, "A")], [0.5, 3.0], stream(0, "p1"))
    assert tr.live.tolist() == [1, 1]
    assert tr.partitions[-1][0][0] == [0]


def test_full_colony_coalesces_to_one():
    s = System.build(1, 1, 3, 2)
    full = [(0, "A")] * 3 + [(0, "D")] * 2
    for seed in range(20):
        tr = dual_simulate(s, full, [np.inf], stream(seed, "full"))
        assert tr.live[-1] == 1
        assert tr.partitions[-1][0][0] == [0, 1, 2, 3, 4]


def test_trap_pair_on_unit_colony():
    s = System.build(1, 1, 1, 1)
    dl = oracle.build_dual_generator(s, 2, particle_cap=2)
    st = oracle.stationary_distribution(dl)
    pair = dl.lookup(np.array([1, 1]))
    assert dl.exit_rates[pair] == 0.0
    trap = [c for c, cls in enumerate(st.classes) if pair in cls]
    assert st.traps[trap[0]]
    with pytest.raises(RuntimeError):
        dual_simulate(s, [(0, "A"), (0, "D")], [np.inf], stream(0, "trap"), max_events=1000)


def test_pair_validation():
    s = System.build(1, 2, 1, 2)
    with pytest.raises(ValueError):
        TwoParticleState.of((0, "A"), (0, "A")).validate(s)
    TwoParticleState.of((0, "D"), (0, "D")).validate(s)


def test_pair_rates_sum_matches_count_generator():
    s = System.build(1, 2, 2, 1)
    init = TwoParticleState.of((0, "A"), (0, "A"))
    out = sum(r for r, _ in pair_transitions(s, init))
    dl = oracle.build_dual_generator(s, 2)
    assert out == pytest.approx(dl.exit_rates[dl.lookup(np.array([2, 0, 0, 0]))])


def test_coalescence_probability_t0():
    s = System.build(1, 3, 2, 1)
    c = coalescence_probability(s, TwoParticleState.of((0, "A"), (1, "A")), [0.0], 100, 0)
    assert c.estimate.tolist() == [1.0]


def test_survival_against_oracle():
    s = System.build(1, 1, 2, 2)
    init = TwoParticleState.of((0, "A"), (0, "D"))
    times = [0.5, 1.0, 2.0, 4.0]
    curve = coalescence_probability(s, init, times, 50_000, 3)
    pc = oracle.build_pair_generator(s, init)
    coal = pc.states[:, 4].astype(bool)
    for t, est in zip(times, curve.estimate):
        exact = float(oracle.transient_distribution(pc, 0, t)[~coal].sum())
        assert abs((est - exact) / np.sqrt(exact * (1 - exact) / 50_000)) <= 4
    assert np.all(np.diff(curve.estimate) <= 0)


def test_gillespie_pair_matches_batch():
    s = System.build(1, 3, 2, 1)
    init = TwoParticleState.of((0, "A"), (1, "D"))
    rng = stream(5, "gill")
    R = 4000
    coal = np.array([two_particle_simulate(s, init, 2.0, rng).tau is not None for _ in range(R)], float)
    b = run_pairs(s, init, [2.0], 50_000, 5)
    z = (coal.mean() - b.coalesced[:, 0].mean()) / np.hypot(coal.std() / np.sqrt(R), b.coalesced.std() / np.sqrt(50_000))
    assert abs(z) <= 4


def test_labelled_and_count_engines_agree():
    s = System.build(1, 3, 2, 1)
    start = [(0, "A"), (0, "A"), (1, "D"), (2, "A")]
    rng = stream(9, "lab")
    R = 3000
    lab = np.array([dual_simulate(s, start, [1.0], rng).live[0] for _ in range(R)], float)
    cnt = run_dual(s, start, [1.0], 50_000, 9).live[:, 0].astype(float)
    z = (lab.mean() - cnt.mean()) / np.hypot(lab.std() / np.sqrt(R), cnt.std() / np.sqrt(cnt.size))
    assert abs(z) <= 4


def test_count_batch_invariants():
    s = System.build(1, 4, (2, 3, 2, 1), (1, 2, 2, 1))
    start = [(0, "A"), (0, "A"), (1, "A"), (1, "D"), (2, "D")]
    b = run_dual(s, start, [0.5, 1.0, 2.0], 5000, 2, check=True)
    assert b.violations == 0 and b.increases == 0
    assert np.all(np.diff(b.live, axis=1) <= 0)
    assert np.all(b.n <= s.N) and np.all(b.m <= s.M)
    assert np.all(b.live == b.n.sum(axis=2) + b.m.sum(axis=2))


def test_gamma_tail_small_T():
    s = System.build(1, 8, 2, 1)
    d = gamma_tail_diagnostic(s, [(0, "A")], 1e-9, 2000, 0)
    assert d["gamma0"] == 0 and d["tail"][1] == 0.0
    d = gamma_tail_diagnostic(s, [(0, "A")], 2.0, 5000, 0)
    assert all(a >= b for a, b in zip(d["tail"], d["tail"][1:]))
    assert d["tail"][0] == 1.0
