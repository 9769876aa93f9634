"""Genetic variability and the first/second moment identities behind clustering.

Every statistical check compares two independent estimators: forward
replicates of the population on one side, dual replicates (one particle or a
pair) on the other. Each returns an ``IdentityCheck`` with per-time z-scores.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .dual import TwoParticleState, run_dual, run_pairs
from .duality import DualityTable, duality_D
from .forward import run_forward
from .geometry import ColonyProfile
from .model import Configuration, System, delta
from .stats import Z_THRESHOLD, Estimate, z_score


def _ratio(a, b, exact: bool):
    return Fraction(int(a), int(b)) if exact else a / b


def heterozygosity(profile: ColonyProfile, state: Configuration, i: int, j: int, kind: str = "AA", exact: bool = False):
    """Probability that two individuals drawn from the given pools differ in type.

    ``AA`` draws two distinct active individuals from colonies i and j;
    ``AD`` draws an active one from i and a dormant one from j.
    """
    N, M = profile.N, profile.M
    X, Y = state.X, state.Y
    if kind == "AA":
        if i != j:
            return _ratio(X[i] * (N[j] - X[j]), N[i] * N[j], exact) + _ratio(X[j] * (N[i] - X[i]), N[j] * N[i], exact)
        if N[i] == 1:
            return Fraction(0) if exact else 0.0
        return _ratio(2 * X[i] * (N[i] - X[i]), N[i] * (N[i] - 1), exact)
    if kind == "AD":
        return _ratio(X[i] * (M[j] - Y[j]), N[i] * M[j], exact) + _ratio((N[i] - X[i]) * Y[j], N[i] * M[j], exact)
    raise ValueError("kind must be 'AA' or 'AD'")


def heterozygosity_batch(profile: ColonyProfile, X: np.ndarray, Y: np.ndarray, i: int, j: int, kind: str = "AA") -> np.ndarray:
    """Vectorised heterozygosity over the leading axes of (…, S) count arrays."""
    N, M = profile.N_arr, profile.M_arr
    Xi, Xj, Yj = X[..., i], X[..., j], Y[..., j]
    if kind == "AA":
        if i != j:
            return (Xi * (N[j] - Xj) + Xj * (N[i] - Xi)) / (N[i] * N[j])
        if N[i] == 1:
            return np.zeros(Xi.shape)
        return 2 * Xi * (N[i] - Xi) / (N[i] * (N[i] - 1))
    if kind == "AD":
        return (Xi * (M[j] - Yj) + (N[i] - Xi) * Yj) / (N[i] * M[j])
    raise ValueError("kind must be 'AA' or 'AD'")


def total_heterozygosity(profile, state, i, j, exact=False):
    """Active-active plus active-dormant variability between colonies i and j."""
    return heterozygosity(profile, state, i, j, "AA", exact) + heterozygosity(profile, state, i, j, "AD", exact)


def moment_identity_residuals(profile: ColonyProfile, state: Configuration, i: int, j: int) -> dict:
    """Exact residuals of the moment and duality-function forms of the variability.

    For a fixed state the expectations drop out, so each residual must be
    exactly zero. The i == j, N_i == 1 active-active case has no moment form
    and is skipped.
    """
    N, M = profile.N, profile.M
    X, Y = state.X, state.Y
    S = profile.n_sites
    x_i, x_j = Fraction(int(X[i]), N[i]), Fraction(int(X[j]), N[j])
    y_j = Fraction(int(Y[j]), M[j])
    out = {}
    aa = heterozygosity(profile, state, i, j, "AA", exact=True)
    ad = heterozygosity(profile, state, i, j, "AD", exact=True)

    def D(*units):
        xi = Configuration(sum(u.X for u in units), sum(u.Y for u in units))
        return duality_D(profile, state, xi).exact

    dA_i, dA_j, dD_j = delta(S, i, "A"), delta(S, j, "A"), delta(S, j, "D")
    if i != j:
        out["AA-moments"] = aa - (x_i + x_j - 2 * x_i * x_j)
        out["AA-duality"] = aa - (D(dA_i) + D(dA_j) - 2 * D(dA_i, dA_j))
    elif N[i] != 1:
        pair = Fraction(int(X[i]) * (int(X[i]) - 1), N[i] * (N[i] - 1))
        out["AA-moments"] = aa - 2 * (x_i - pair)
        out["AA-duality"] = aa - (D(dA_i) + D(dA_j) - 2 * D(dA_i, dA_j))
    out["AD-moments"] = ad - (x_i + y_j - 2 * x_i * y_j)
    out["AD-duality"] = ad - (D(dA_i) + D(dD_j) - 2 * D(dA_i, dD_j))
    return out


# ---------------------------------------------------------------- MC checks


@dataclass
class IdentityCheck:
    name: str
    times: list
    lhs: list
    rhs: list
    sigma: list
    z: list
    replicates: int
    seed: int
    passed: bool
    detail: dict | None = None

    @property
    def max_abs_z(self) -> float:
        return max((abs(v) for v in self.z), default=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["max_abs_z"] = self.max_abs_z
        return d

    def rows(self):
        return list(zip(self.times, self.lhs, self.rhs, self.sigma, self.z))


def _compare(name, times, lhs_samples, rhs_samples, replicates, seed, threshold, one_sided=False, detail=None):
    lhs, rhs, sig, zs = [], [], [], []
    for a, b in zip(lhs_samples, rhs_samples):
        ea, eb = Estimate.of(a), Estimate.of(b)
        z, s = z_score(ea, eb)
        lhs.append(ea.mean)
        rhs.append(eb.mean)
        sig.append(s)
        zs.append(z)
    ok = all(z >= -threshold for z in zs) if one_sided else all(abs(z) <= threshold for z in zs)
    return IdentityCheck(name, [float(t) for t in times], lhs, rhs, sig, zs, replicates, seed, bool(ok), detail)


def _times(times) -> np.ndarray:
    return np.atleast_1d(np.asarray(times, dtype=float))


def first_moment_identity_check(
    system: System, site: int, eta: Configuration, times, replicates: int, seed: int, threshold: float = Z_THRESHOLD
) -> list[IdentityCheck]:
    """E[X_i(t)/N_i] and E[Y_i(t)/M_i] forward vs one-particle dual from (i, A), (i, D)."""
    times = _times(times)
    table = DualityTable(system.profile)
    fw = run_forward(system, eta, times, replicates, seed, "first-moment-forward")
    out = []
    for kind in ("A", "D"):
        unit = delta(system.n_sites, site, kind)
        lhs = [table(fw.X[:, k], fw.Y[:, k], unit.X, unit.Y) for k in range(len(times))]
        dw = run_dual(system, [(site, kind)], times, replicates, seed, f"first-moment-dual-{kind}")
        rhs = [table(eta.X, eta.Y, dw.n[:, k], dw.m[:, k]) for k in range(len(times))]
        out.append(_compare(f"first-moment-{site}{kind}", times, lhs, rhs, replicates, seed, threshold))
    return out


def pair_values(eta: Configuration, profile: ColonyProfile, b, k: int) -> np.ndarray:
    """D(eta; pair positions at snapshot k) for every replicate of a pair batch."""
    S = profile.n_sites
    R = b.s1.shape[0]
    n = np.zeros((R, S), dtype=np.int64)
    m = np.zeros((R, S), dtype=np.int64)
    rows = np.arange(R)
    np.add.at(n, (rows, b.s1[:, k]), b.a1[:, k])
    np.add.at(m, (rows, b.s1[:, k]), ~b.a1[:, k])
    two = ~b.coalesced[:, k]
    np.add.at(n, (rows[two], b.s2[two, k]), b.a2[two, k])
    np.add.at(m, (rows[two], b.s2[two, k]), ~b.a2[two, k])
    return DualityTable(profile)(eta.X, eta.Y, n, m)


def second_moment_identity_check(
    system: System, pair, eta: Configuration, times, replicates: int, seed: int, threshold: float = Z_THRESHOLD
) -> IdentityCheck:
    """E[M_pair(t)] forward vs the pair decomposition (Q term + coalesced terms)."""
    times = _times(times)
    init = pair if isinstance(pair, TwoParticleState) else TwoParticleState.of(*pair)
    init.validate(system)
    table = DualityTable(system.profile)
    S = system.n_sites
    units = [delta(S, init.s1, "A" if init.a1 else "D"), delta(S, init.s2, "A" if init.a2 else "D")]
    xn, xm = units[0].X + units[1].X, units[0].Y + units[1].Y
    fw = run_forward(system, eta, times, replicates, seed, "second-moment-forward")
    lhs = [table(fw.X[:, k], fw.Y[:, k], xn, xm) for k in range(len(times))]
    pb = run_pairs(system, init, times, replicates, seed, "second-moment-pair")
    rhs = [pair_values(eta, system.profile, pb, k) for k in range(len(times))]
    return _compare("second-moment", times, lhs, rhs, replicates, seed, threshold)


def correlation_inequality_check(
    system: System, pair, target, times, replicates: int, seed: int, threshold: float = Z_THRESHOLD
) -> IdentityCheck:
    """P(xi(t) = target) from the first particle's start vs P(xi_1(t) = target, tau < t).

    One-sided: fails only if the right side exceeds the left by more than
    ``threshold`` pooled standard errors.
    """
    times = _times(times)
    init = pair if isinstance(pair, TwoParticleState) else TwoParticleState.of(*pair)
    init.validate(system)
    k_site, k_kind = int(target[0]), target[1] in ("A", True, 1)
    single = run_dual(system, [(init.s1, "A" if init.a1 else "D")], times, replicates, seed, "corr-single")
    pool = single.n if k_kind else single.m
    lhs = [(pool[:, k, k_site] == 1).astype(float) for k in range(len(times))]
    pb = run_pairs(system, init, times, replicates, seed, "corr-pair")
    rhs = [
        ((pb.s1[:, k] == k_site) & (pb.a1[:, k] == k_kind) & (pb.tau < times[k])).astype(float)
        for k in range(len(times))
    ]
    return _compare("correlation-inequality", times, lhs, rhs, replicates, seed, threshold, one_sided=True)


def correlation_inequality_exact(system: System, pair, times, tol: float = 1e-12) -> dict:
    """Exact margins P^{(i,a)}(xi(t)=(k,g)) - P^{pair}(xi_1(t)=(k,g), tau<t) for every target."""
    from .oracle import build_pair_generator, build_single_generator, transient_distribution

    init = pair if isinstance(pair, TwoParticleState) else TwoParticleState.of(*pair)
    single = build_single_generator(system)
    pch = build_pair_generator(system, init)
    start = single.index[(init.s1, "A" if init.a1 else "D")]
    margins = {}
    for t in _times(times):
        ps = transient_distribution(single, start, float(t), tol)
        pp = transient_distribution(pch, 0, float(t), tol)
        for (site, kind), k in single.index.items():
            a = kind == "A"
            hit = sum(p for p, st in zip(pp, pch.labels) if st.coalesced and st.s1 == site and st.a1 == a)
            margins[(float(t), site, kind)] = float(ps[k] - hit)
    return {"margins": margins, "min_margin": min(margins.values()), "pass": min(margins.values()) >= -tol * 10}


def clustering_identity_check(
    system: System, site: int, theta: float, times, replicates: int, seed: int, threshold: float = Z_THRESHOLD
) -> IdentityCheck:
    """E_{nu_theta}[X_i(M_i - Y_i)/(N_i M_i)](t) vs theta(1-theta) P^{((i,A),(i,D))}(tau >= t)."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    times = _times(times)
    N, M = system.N[site], system.M[site]
    fw = run_forward(system, {"type": "binomial", "theta": theta}, times, replicates, seed, "clustering-forward")
    lhs = [fw.X[:, k, site] * (M - fw.Y[:, k, site]) / (N * M) for k in range(len(times))]
    init = TwoParticleState.of((site, "A"), (site, "D"))
    pb = run_pairs(system, init, times, replicates, seed, "clustering-pair")
    w = theta * (1 - theta)
    rhs = [w * (pb.tau >= t) for t in times]
    return _compare("clustering-identity", times, lhs, rhs, replicates, seed, threshold, detail={"site": site, "theta": theta})


def density_conservation_check(
    system: System, theta: float, times, replicates: int, seed: int, threshold: float = Z_THRESHOLD
) -> IdentityCheck:
    """Per-site means of X_i(t)/N_i and Y_i(t)/M_i under nu_theta against theta."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    times = _times(times)
    fw = run_forward(system, {"type": "binomial", "theta": theta}, times, replicates, seed, "density")
    zs, means, sig, labels = [], [], [], []
    for k, t in enumerate(times):
        for arr, size, tag in ((fw.X, system.N, "A"), (fw.Y, system.M, "D")):
            for i in range(system.n_sites):
                e = Estimate.of(arr[:, k, i] / size[i])
                z = 0.0 if e.se == 0 and abs(e.mean - theta) < 1e-15 else (e.mean - theta) / e.se if e.se else math.inf
                zs.append(float(z))
                means.append(e.mean)
                sig.append(e.se)
                labels.append([float(t), i, tag])
    ok = all(abs(z) <= threshold for z in zs)
    return IdentityCheck(
        "density-conservation", [l[0] for l in labels], means, [theta] * len(means), sig, zs,
        replicates, seed, bool(ok), {"cells": labels},
    )


@dataclass
class VariabilityReport:
    pair: tuple
    times: list
    forward: list
    forward_ci: list
    dual: list
    dual_ci: list

    def to_dict(self):
        return asdict(self)


def variability_report(system: System, pair, eta: Configuration, times, replicates: int, seed: int, z: float = 1.96):
    """E[Delta] for a pool pair, forward directly and dual through D-moments."""
    times = _times(times)
    (i, a), (j, b) = pair
    if a != "A":
        raise ValueError("variability pairs start from an active pool")
    kind = "AA" if b == "A" else "AD"
    fw = run_forward(system, eta, times, replicates, seed, "variability-forward")
    table = DualityTable(system.profile)
    f_mean, f_ci, d_mean, d_ci = [], [], [], []
    singles = {}
    for p in ((i, "A"), (j, b)):
        dw = run_dual(system, [p], times, replicates, seed, f"variability-{p[0]}{p[1]}")
        singles[p] = dw
    init = TwoParticleState.of((i, "A"), (j, b))
    if i == j and b == "A" and system.N[i] == 1:
        pb = None
    else:
        init.validate(system)
        pb = run_pairs(system, init, times, replicates, seed, "variability-pair")
    for k in range(len(times)):
        h = heterozygosity_batch(system.profile, fw.X[:, k], fw.Y[:, k], i, j, kind)
        e = Estimate.of(h)
        f_mean.append(e.mean)
        f_ci.append([e.mean - z * e.se, e.mean + z * e.se])
        if pb is None:
            d_mean.append(0.0)
            d_ci.append([0.0, 0.0])
            continue
        s1 = singles[(i, "A")]
        s2 = singles[(j, b)]
        v1 = table(eta.X, eta.Y, s1.n[:, k], s1.m[:, k])
        v2 = table(eta.X, eta.Y, s2.n[:, k], s2.m[:, k])
        v12 = pair_values(eta, system.profile, pb, k)
        mean = v1.mean() + v2.mean() - 2 * v12.mean()
        se = math.sqrt((v1.var(ddof=1) + v2.var(ddof=1) + 4 * v12.var(ddof=1)) / replicates)
        d_mean.append(float(mean))
        d_ci.append([float(mean - z * se), float(mean + z * se)])
    return VariabilityReport(((i, "A"), (j, b)), times.tolist(), f_mean, f_ci, d_mean, d_ci)
