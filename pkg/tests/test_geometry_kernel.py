from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from seedbank.conditions import check_duality_condition, saturation_verdict
from seedbank.geometry import ColonyProfile, Geometry, ProfileSpec, build_profile
from seedbank.kernel import KernelError, KernelSpec, build_kernel


def test_geometry_indexing_round_trip():
    g = Geometry(2, 3)
    assert g.n_sites == 9
    for i in range(g.n_sites):
        assert g.index(g.coord(i)) == i
    assert g.index((4, -1)) == g.index((1, 2))
    assert g.norm((2, 0)) == 1
    assert g.max_norm == 1


@pytest.mark.parametrize("d,L", [(0, 3), (1, 0), (1.5, 2)])
def test_geometry_rejects_bad_shape(d, L):
    with pytest.raises(ValueError):
        Geometry(d, L)


def test_profile_rejects_zero_sizes():
    with pytest.raises(ValueError):
        ColonyProfile((1, 0), (1, 1))
    with pytest.raises(ValueError):
        ColonyProfile((1,), (1, 1))


def test_profile_specs():
    g = Geometry(1, 4)
    p = build_profile({"type": "constant", "params": {"N": 3, "M": 2}}, g)
    assert p.N == (3,) * 4 and p.K == (Fraction(3, 2),) * 4
    p = build_profile({"type": "explicit", "params": {"N": [2, 3, 2, 1], "M": [1, 2, 2, 1]}}, g)
    assert p.N == (2, 3, 2, 1)
    with pytest.raises(ValueError):
        build_profile({"type": "explicit", "params": {"N": [1], "M": [1]}}, g)
    with pytest.raises(ValueError):
        ProfileSpec.from_dict({"type": "constant", "N": 1})


def test_nearest_neighbour_table():
    k = build_kernel({"type": "nearest-neighbor"}, Geometry(1, 8))
    assert dict(zip(k.offsets, k.exact)) == {(0,): Fraction(1, 2), (1,): Fraction(1, 4), (7,): Fraction(1, 4)}
    assert k.c_exact == 1
    assert k.matrix[0, 0] == 0.5 and k.matrix[3, 2] == 0.25 and k.matrix[0, 7] == 0.25
    np.testing.assert_allclose(k.matrix.sum(axis=1), 1.0)


def test_center_rate_enforced():
    spec = {"type": "explicit", "params": {"table": [[[0], 0.4], [[1], 0.3], [[-1], 0.3]]}}
    with pytest.raises(KernelError, match="center rate must be 1/2"):
        build_kernel(spec, Geometry(1, 8))


def test_irreducibility_enforced():
    spec = {"type": "explicit", "params": {"table": [[[0], 0.5], [[2], 0.25], [[-2], 0.25]]}}
    with pytest.raises(KernelError, match="kernel not irreducible"):
        build_kernel(spec, Geometry(1, 8))


def test_unknown_kernel_fields_rejected():
    with pytest.raises(KernelError):
        KernelSpec.from_dict({"type": "geometric", "rho": 0.5})
    with pytest.raises(KernelError):
        KernelSpec.from_dict({"type": "levy"})


@pytest.mark.parametrize("spec", [
    {"type": "geometric", "params": {"rho": 0.5}},
    {"type": "power-law", "params": {"gamma": 3.0}},
])
def test_wrapped_kernels_translation_invariant(spec):
    g = Geometry(2, 4)
    k = build_kernel(spec, g)
    A = k.matrix
    assert A[0, 0] == 0.5
    for i in range(g.n_sites):
        for j in range(g.n_sites):
            assert A[i, j] == pytest.approx(A[0, g.index(np.array(g.coord(j)) - g.coord(i))])
    assert k.c <= 1.0 + 1e-12
    assert k.c + k.mass_deficit == pytest.approx(1.0, abs=1e-9)


def test_pick_covers_every_offset():
    k = build_kernel({"type": "nearest-neighbor"}, Geometry(1, 5))
    u = np.array([0.0, 0.49, 0.5, 0.74, 0.75, 0.999, 1.0])
    assert k.pick(u).tolist() == [0, 0, 1, 1, 2, 2, 2]


def test_condition_geometric_converges():
    rep = check_duality_condition({"type": "constant", "params": {"N": 5, "M": 5}},
                                  {"type": "geometric", "params": {"rho": 0.5}}, 1, mode="a", delta=0.1)
    assert rep.verdict == "converging"
    assert rep.profile_verdict == "converging"


def test_condition_exploding_profile_diverges():
    rep = check_duality_condition({"type": "exponential", "params": {"base": 2, "M": 1}},
                                  {"type": "geometric", "params": {"rho": 0.75}}, 1, mode="a", delta=0.1)
    assert rep.verdict == "diverging"


def test_condition_mode_b_exponent():
    kern = {"type": "power-law", "params": {"gamma": 6.0}}
    rep = check_duality_condition({"type": "constant", "params": {"N": 2, "M": 2}}, kern, 1, mode="b",
                                  delta=0.5, gamma=2.0)
    assert rep.exponent_condition is True
    assert rep.verdict == "converging"
    low = check_duality_condition({"type": "constant", "params": {"N": 2, "M": 2}}, kern, 1, mode="b",
                                  delta=0.5, gamma=1.0)
    assert low.exponent_condition is False and low.verdict != "converging"
    with pytest.raises(ValueError):
        check_duality_condition({"type": "constant", "params": {"N": 2, "M": 2}}, kern, 1, mode="b", delta=0.5)


def test_saturation_verdicts():
    radii = 2 ** np.arange(8)
    geo = 1 - 0.5**radii
    assert saturation_verdict(geo) == "converging"
    assert saturation_verdict(np.arange(1, 9) ** 2) == "diverging"
    assert saturation_verdict([1, 2]) == "inconclusive"


def test_condition_explicit_profile_needs_period():
    prof = {"type": "explicit", "params": {"N": [1, 4], "M": [1, 1]}}
    with pytest.raises(ValueError, match="period"):
        check_duality_condition(prof, {"type": "nearest-neighbor"}, 1)
    rep = check_duality_condition(prof, {"type": "nearest-neighbor"}, 1, period=2)
    assert rep.profile_verdict == "converging"
