from __future__ import annotations

import math
import warnings
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from scipy.linalg import expm

from seedbank import oracle
from seedbank.duality import (
    DualityTable,
    StirlingTable,
    distribution_from_moments,
    duality_D,
    equilibrium_generating_check,
    falling_factorial,
    mc_duality_check,
    moments_from_distribution,
    raw_moments_from_dual,
)
from seedbank.model import Configuration, System


def test_duality_function_examples():
    p = System.build(1, 1, 3, 2).profile
    assert duality_D(p, Configuration([2], [1]), Configuration([0], [0])).exact == 1
    assert duality_D(p, Configuration([2], [1]), Configuration([1], [1])).exact == Fraction(1, 3)
    v = duality_D(p, Configuration([0], [2]), Configuration([1], [0]))
    assert v.exact == 0 and v.excluded
    with pytest.raises(ValueError):
        duality_D(p, Configuration([2], [1]), Configuration([4], [0]))


def test_duality_table_matches_exact():
    s = System.build(1, 3, (2, 3, 1), (2, 1, 2))
    tab = DualityTable(s.profile)
    rng = np.random.default_rng(0)
    for _ in range(300):
        X, Y = rng.integers(0, s.N + 1), rng.integers(0, s.M + 1)
        n, m = rng.integers(0, s.N + 1), rng.integers(0, s.M + 1)
        want = float(duality_D(s.profile, Configuration(X, Y), Configuration(n, m)).exact)
        assert tab(X, Y, n, m) == pytest.approx(want, abs=1e-15)


def test_falling_factorial_and_stirling():
    assert falling_factorial(5, 0) == 1 and falling_factorial(5, 3) == 60 and falling_factorial(2, 3) == 0
    st = StirlingTable(10)
    assert st.check_recurrence()
    assert [st.bell(n) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]
    assert st(4, 2) == 7 and st(5, 3) == 25
    with pytest.raises(ValueError):
        st(11, 1)


def test_raw_moments_examples():
    st = StirlingTable(6)
    assert raw_moments_from_dual(2, 1, 1, 1, 1, 0, st) == Fraction(4, 3)
    for n, m in product(range(4), range(3)):
        if (n, m) == (0, 0):
            continue
        assert raw_moments_from_dual(3, 2, 0, 0, n, m, st) == 0
        assert raw_moments_from_dual(3, 2, 3, 2, n, m, st) == 3**n * 2**m


def test_moment_inversion():
    e = np.array([1.0, 0.3])
    np.testing.assert_allclose(distribution_from_moments(e, [1]), [0.7, 0.3])
    top = np.zeros((4, 4))
    top[-1, -1] = 1.0
    np.testing.assert_allclose(distribution_from_moments(moments_from_distribution(top, [3, 3]), [3, 3]), top,
                               atol=1e-12)
    rng = np.random.default_rng(1)
    p = rng.random((4, 4))
    p /= p.sum()
    back = distribution_from_moments(moments_from_distribution(p, [3, 3]), [3, 3])
    assert np.abs(back - p).max() < 1e-9
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        q = np.zeros(14)
        q[0] = 1
        distribution_from_moments(moments_from_distribution(q, [13]), [13])
    assert any("badly conditioned" in str(x.message) for x in w)


def test_two_state_transient_closed_form():
    s = System.build(1, 1, 2, 1)
    ch = oracle.build_single_generator(s)
    p = oracle.transient_distribution(ch, ch.index[(0, "A")], 1.0)
    assert p[ch.index[(0, "A")]] == pytest.approx((2 + math.exp(-3)) / 3, abs=1e-12)
    assert oracle.transient_distribution(ch, 0, 0.0).tolist() == [1.0, 0.0]
    with pytest.raises(ValueError):
        oracle.transient_distribution(ch, 0, 1.0, tol=1e-3)


def test_uniformization_matches_dense_expm():
    s = System.build(1, 2, 2, 1)
    fw = oracle.build_forward_generator(s)
    F = np.random.default_rng(0).random((fw.size, 3))
    for t in (0.1, 1.0, 5.0):
        np.testing.assert_allclose(oracle.expm_apply(fw, F, t), expm(t * fw.dense()) @ F, atol=1e-10)


def test_generators_conserve_probability():
    s = System.build(1, 4, (2, 3, 2, 1), (1, 2, 2, 1))
    fw = oracle.build_forward_generator(s)
    assert fw.size == np.prod((s.N + 1) * (s.M + 1))
    assert fw.row_sum_error() < 1e-12
    dl = oracle.build_dual_generator(s, 2)
    assert dl.row_sum_error() < 1e-12
    assert np.all(dl.mass <= 2)


def test_dual_generator_never_gains_particles():
    s = System.build(1, 3, 2, 1)
    dl = oracle.build_dual_generator(s, 3)
    coo = dl.Q.tocoo()
    off = coo.row != coo.col
    assert np.all(dl.mass[coo.col[off]] <= dl.mass[coo.row[off]])


def test_generator_residual_and_fault():
    s = System.build(1, 1, 3, 2)
    fw = oracle.build_forward_generator(s)
    dl = oracle.build_dual_generator(s, 5, particle_cap=5)
    D = oracle.duality_matrix(s, fw, dl)
    assert oracle.generator_criterion_residual(fw, dl, D) < 1e-12
    assert oracle.exact_duality_check(fw, dl, D, 0.0) == 0.0
    bad = oracle.build_dual_generator(s, 5, fault=1e-3, particle_cap=5)
    assert oracle.generator_criterion_residual(fw, bad, D) >= 1e-4
    assert oracle.exact_duality_check(fw, bad, D, 1.0, tol=1e-12) >= 1e-4


def test_dual_particle_cap():
    s = System.build(1, 1, 3, 2)
    with pytest.raises(ValueError):
        oracle.build_dual_generator(s, 5)


def test_stationary_single_colony():
    s = System.build(1, 1, 3, 2)
    fw = oracle.build_forward_generator(s)
    st = oracle.stationary_distribution(fw)
    assert [fw.states[c].tolist() for c in st.classes] == [[[0, 0]], [[3, 2]]]
    assert st.traps == [False, False]
    np.testing.assert_allclose(st.absorption[:, 1], (fw.X[:, 0] + fw.Y[:, 0]) / 5, atol=1e-12)


def test_dump_triplets(tmp_path):
    Q = np.array([[-1.0, 1.0], [0.0, 0.0]])
    oracle.dump_triplets(Q, tmp_path / "q.txt")
    assert (tmp_path / "q.txt").read_text().split("\n")[:2] == ["0 0 -1.0", "0 1 1.0"]


def test_mc_duality_trivial_cases():
    s = System.build(1, 2, 2, 1)
    eta = Configuration([1, 2], [0, 1])
    xi = Configuration([1, 0], [0, 1])
    r = mc_duality_check(s, eta, xi, 0.0, 10, 0)
    assert r.lhs == r.rhs == pytest.approx(0.5) and r.z == 0
    r = mc_duality_check(s, eta, Configuration([0, 0], [0, 0]), 1.0, 10, 0)
    assert r.lhs == r.rhs == 1.0
    assert r.to_dict()["pass"] is True


def test_mc_duality_small_ring():
    s = System.build(1, 3, 2, 1)
    r = mc_duality_check(s, Configuration([2, 1, 0], [1, 0, 1]), Configuration([1, 1, 0], [0, 0, 1]), 1.0, 40_000, 4)
    assert r.passed


def test_generating_function_edges():
    s = System.build(1, 3, 2, 1)
    parts = [(0, "A"), (1, "A"), (2, "D")]
    one = equilibrium_generating_check(s, parts, 1.0, [0.5, 1.0], 500, 0)
    zero = equilibrium_generating_check(s, parts, 0.0, [0.5, 1.0], 500, 0)
    single = equilibrium_generating_check(s, [(1, "D")], 0.3, [0.5, 2.0], 500, 0)
    assert one.mean == [1.0, 1.0] and zero.mean == [0.0, 0.0]
    assert single.mean == pytest.approx([0.3, 0.3])
    with pytest.raises(ValueError):
        equilibrium_generating_check(s, parts, 1.5, [1.0], 10, 0)
