"""Property-based checks of the algebraic invariants."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from seedbank.analysis import heterozygosity, moment_identity_residuals
from seedbank.duality import (
    StirlingTable,
    distribution_from_moments,
    duality_D,
    falling_factorial,
    moments_from_distribution,
)
from seedbank.forward import forward_acceptance_probability, forward_total_rate
from seedbank.geometry import Geometry
from seedbank.kernel import build_kernel
from seedbank.model import Configuration, System, config_add_sub

sizes = st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=5)


@st.composite
def system_and_state(draw):
    L = draw(st.integers(1, 5))
    NM = draw(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=L, max_size=L))
    lam = draw(st.sampled_from([0.25, 1.0, 3.0]))
    kern = draw(st.sampled_from([{"type": "nearest-neighbor"}, {"type": "geometric", "params": {"rho": 0.5}}]))
    s = System.build(1, L, [n for n, _ in NM], [m for _, m in NM], lam, kern)
    X = [draw(st.integers(0, n)) for n, _ in NM]
    Y = [draw(st.integers(0, m)) for _, m in NM]
    return s, Configuration(X, Y)


@given(system_and_state(), st.data())
def test_add_sub_stays_in_box(sys_state, data):
    s, eta = sys_state
    S = s.n_sites
    xi = Configuration(data.draw(st.lists(st.integers(0, 6), min_size=S, max_size=S)),
                       data.draw(st.lists(st.integers(0, 6), min_size=S, max_size=S)))
    for sign in (1, -1):
        out = config_add_sub(s.profile, eta, xi, sign)
        assert out.in_box(s.profile)
    zero = Configuration([0] * S, [0] * S)
    assert config_add_sub(s.profile, eta, zero) == eta


@settings(deadline=None)
@given(system_and_state())
def test_thinning_reproduces_total_rate(sys_state):
    s, eta = sys_state
    total = forward_total_rate(s, eta.X, eta.Y)
    assert abs(s.envelope * forward_acceptance_probability(s, eta.X, eta.Y) - total) <= 1e-12 * max(1.0, total)
    assert total <= s.envelope + 1e-12


@settings(deadline=None)
@given(st.integers(1, 2), st.integers(2, 6), st.sampled_from([0.3, 0.5, 0.8]))
def test_kernel_invariants(d, L, rho):
    g = Geometry(d, L)
    k = build_kernel({"type": "geometric", "params": {"rho": rho}, "truncation_radius": 2 * L}, g)
    A = k.matrix
    assert np.all(A >= 0)
    assert np.allclose(np.diag(A), 0.5)
    np.testing.assert_allclose(A.sum(axis=1), k.c)
    assert k.c <= 1 + 1e-12
    # symmetric kernels give symmetric rates
    np.testing.assert_allclose(A, A.T, atol=1e-15)


@given(system_and_state(), st.data())
def test_duality_function_bounds_and_monotone(sys_state, data):
    s, eta = sys_state
    S = s.n_sites
    n = [data.draw(st.integers(0, int(v))) for v in s.N]
    m = [data.draw(st.integers(0, int(v))) for v in s.M]
    xi = Configuration(n, m)
    v = duality_D(s.profile, eta, xi).exact
    assert 0 <= v <= 1
    # adding tracked-type individuals never decreases D
    up = config_add_sub(s.profile, eta, Configuration([1] * S, [1] * S))
    assert duality_D(s.profile, up, xi).exact >= v
    # D at the top configuration is 1, at zero it vanishes unless xi is empty
    assert duality_D(s.profile, Configuration(s.N, s.M), xi).exact == 1
    zero = duality_D(s.profile, Configuration([0] * S, [0] * S), xi).exact
    assert zero == (1 if xi.mass == 0 else 0)


@given(st.integers(0, 15), st.integers(0, 12))
def test_stirling_power_identity(x, n):
    st_ = StirlingTable(12)
    assert st_.power(x, n) == x**n
    assert sum(st_(n, j) for j in range(n + 1)) == st_.bell(n)
    assert falling_factorial(x, n) == (0 if n > x else np.prod(range(x - n + 1, x + 1), dtype=object))


@settings(deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 2**32 - 1))
def test_moment_round_trip(box, seed):
    rng = np.random.default_rng(seed)
    p = rng.random(tuple(b + 1 for b in box))
    p /= p.sum()
    back = distribution_from_moments(moments_from_distribution(p, box), box)
    assert np.abs(back - p).max() < 1e-9


@given(system_and_state(), st.data())
def test_heterozygosity_range_and_identities(sys_state, data):
    s, eta = sys_state
    i = data.draw(st.integers(0, s.n_sites - 1))
    j = data.draw(st.integers(0, s.n_sites - 1))
    for kind in ("AA", "AD"):
        h = heterozygosity(s.profile, eta, i, j, kind, exact=True)
        assert isinstance(h, Fraction) and 0 <= h <= 1
    assert all(v == 0 for v in moment_identity_residuals(s.profile, eta, i, j).values())
