"""Factorial-moment duality function, Stirling machinery and Monte Carlo harness."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .geometry import ColonyProfile
from .model import Configuration, System
from .stats import Z_THRESHOLD, Estimate, z_score


@dataclass(frozen=True)
class DualityValue:
    value: float
    exact: Fraction
    excluded: bool  # some indicator n_i <= X_i, m_i <= Y_i failed


def duality_D(profile: ColonyProfile, eta: Configuration, xi: Configuration) -> DualityValue:
    """prod_i C(X_i, n_i)/C(N_i, n_i) * C(Y_i, m_i)/C(M_i, m_i), exactly.

    ``xi`` holds the dual counts (n_i, m_i); only sites carrying dual mass
    contribute a factor.
    """
    if np.any(xi.X > profile.N_arr) or np.any(xi.Y > profile.M_arr) or np.any(xi.X < 0) or np.any(xi.Y < 0):
        raise ValueError("dual configuration outside n_i <= N_i, m_i <= M_i")
    value = Fraction(1)
    excluded = False
    for i in np.flatnonzero(xi.X + xi.Y):
        n, m = int(xi.X[i]), int(xi.Y[i])
        X, Y = int(eta.X[i]), int(eta.Y[i])
        if n > X or m > Y:
            excluded = True
            value = Fraction(0)
            break
        value *= Fraction(math.comb(X, n), math.comb(profile.N[i], n))
        value *= Fraction(math.comb(Y, m), math.comb(profile.M[i], m))
    return DualityValue(float(value), value, excluded)


class DualityTable:
    """Per-site lookup tables for vectorised evaluation of D.

    ``A[i, x, n] = C(x, n) / C(N_i, n)`` and ``B[i, y, m] = C(y, m) / C(M_i, m)``
    (zero where n > x), each converted once from an exact rational.
    """

    def __init__(self, profile: ColonyProfile):
        self.profile = profile
        S = profile.n_sites
        nmax, mmax = int(max(profile.N)), int(max(profile.M))
        self.A = np.zeros((S, nmax + 1, nmax + 1))
        self.B = np.zeros((S, mmax + 1, mmax + 1))
        for i in range(S):
            Ni, Mi = profile.N[i], profile.M[i]
            for x in range(Ni + 1):
                for n in range(x + 1):
                    self.A[i, x, n] = float(Fraction(math.comb(x, n), math.comb(Ni, n)))
            for y in range(Mi + 1):
                for m in range(y + 1):
                    self.B[i, y, m] = float(Fraction(math.comb(y, m), math.comb(Mi, m)))

    def __call__(self, X, Y, n, m) -> np.ndarray:
        """D for broadcastable (..., S) arrays of forward and dual counts."""
        X, Y, n, m = (np.asarray(a, dtype=np.int64) for a in (X, Y, n, m))
        sites = np.arange(self.profile.n_sites)
        return np.prod(self.A[sites, X, n] * self.B[sites, Y, m], axis=-1)


def falling_factorial(x: int, r: int) -> int:
    """x (x-1) ... (x-r+1), with (x)_0 = 1."""
    if r < 0:
        raise ValueError("r must be non-negative")
    out = 1
    for k in range(r):
        out *= x - k
    return out


class StirlingTable:
    """Stirling numbers of the second kind c[n][j] for n <= cap, exact ints."""

    def __init__(self, cap: int = 20):
        if cap < 0:
            raise ValueError("cap must be non-negative")
        self.cap = cap
        rows = [[1]]
        for n in range(cap):
            prev = rows[-1] + [0]
            rows.append([0] + [j * prev[j] + prev[j - 1] for j in range(1, n + 2)])
        self.rows = rows

    def __call__(self, n: int, j: int) -> int:
        if n > self.cap:
            raise ValueError(f"n={n} beyond table cap {self.cap}")
        return self.rows[n][j] if 0 <= j <= n else 0

    def bell(self, n: int) -> int:
        return sum(self.rows[n])

    def check_recurrence(self) -> bool:
        return all(
            self(n + 1, j) == j * self(n, j) + self(n, j - 1)
            for n in range(self.cap)
            for j in range(1, n + 2)
        )

    def power(self, x: int, n: int) -> int:
        """x^n via sum_j c[n][j] (x)_j."""
        return sum(self(n, j) * falling_factorial(x, j) for j in range(n + 1))


def _default_split(N: int, M: int, i: int, j: int) -> dict:
    # the one-particle dual settles in (1,0) w.p. N/(N+M), in (0,1) w.p. M/(N+M)
    return {(1, 0): Fraction(N, N + M), (0, 1): Fraction(M, N + M)}


def raw_moments_from_dual(
    N: int, M: int, X: int, Y: int, n: int, m: int, stirling: StirlingTable | None = None, law=None
) -> Fraction:
    """Long-time limit of E[X(t)^n Y(t)^m] in a single colony via the dual.

    E[X^n Y^m] = sum_{i,j} c[n][i] c[m][j] (N)_i (M)_j E[D(Z_t; (i, j))], and
    as t -> infinity the dual expectation becomes the average of D((X, Y); .)
    over the dual's terminal law ``law(N, M, i, j)`` (a dict from dual
    states to probabilities; defaults to the one-particle split).
    """
    if (n, m) == (0, 0):
        raise ValueError("(n, m) = (0, 0) is excluded")
    stirling = stirling or StirlingTable(max(n, m, 1))
    law = law or _default_split
    total = Fraction(0)
    for i in range(min(n, N) + 1):
        for j in range(min(m, M) + 1):
            coef = stirling(n, i) * stirling(m, j) * falling_factorial(N, i) * falling_factorial(M, j)
            if coef == 0:
                continue
            if (i, j) == (0, 0):
                limit = Fraction(1)
            else:
                limit = sum(
                    (Fraction(p) * Fraction(math.comb(X, a) * math.comb(Y, b), math.comb(N, a) * math.comb(M, b))
                     for (a, b), p in law(N, M, i, j).items()),
                    Fraction(0),
                )
            total += coef * limit
    return total


def _axis_solve(V: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    shape = moved.shape
    sol = np.linalg.solve(V, moved.reshape(shape[0], -1)).reshape(shape)
    return np.moveaxis(sol, 0, axis)


def _axis_apply(V: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(V, arr, axes=([1], [axis])), 0, axis)


def _vandermonde(b: int) -> np.ndarray:
    v = np.arange(b + 1, dtype=float)
    return v[None, :] ** np.arange(b + 1, dtype=float)[:, None]  # 0**0 == 1


def moments_from_distribution(p: np.ndarray, box) -> np.ndarray:
    """e[k] = E[prod_a z_a^{k_a}] for a law p on prod_a {0..box[a]}."""
    p = np.asarray(p, dtype=float)
    for axis, b in enumerate(box):
        p = _axis_apply(_vandermonde(int(b)), p, axis)
    return p


def distribution_from_moments(e: np.ndarray, box, tol: float = 1e-8) -> np.ndarray:
    """Invert the Kronecker-product Vandermonde system A p = e.

    ``box`` lists the per-coordinate maxima, little-endian over sites with
    X before Y: (N_0, M_0, N_1, M_1, ...). The solve runs one axis at a time.
    """
    box = [int(b) for b in box]
    if max(box) > 12:
        warnings.warn("Vandermonde moment inversion is badly conditioned for sizes above 12", stacklevel=2)
    p = np.asarray(e, dtype=float)
    if p.shape != tuple(b + 1 for b in box):
        raise ValueError("moment array shape does not match the box")
    for axis, b in enumerate(box):
        p = _axis_solve(_vandermonde(b), p, axis)
    if p.min() < -tol or p.max() > 1 + tol:
        raise ValueError("moment vector is not consistent with a probability law")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class DualityCheck:
    lhs: float
    rhs: float
    sigma: float
    z: float
    replicates: int
    seed: int
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def mc_duality_check(
    system: System,
    eta: Configuration,
    xi: Configuration,
    t: float,
    replicates: int,
    seed: int,
    threshold: float = Z_THRESHOLD,
) -> DualityCheck:
    """Forward estimate of E_eta[D(Z(t); xi)] against dual estimate of E^xi[D(eta; Z*(t))]."""
    from .dual import particles_of, run_dual
    from .forward import run_forward

    eta.validate(system.profile)
    D0 = duality_D(system.profile, eta, xi).value
    if t == 0 or xi.mass == 0:
        return DualityCheck(D0, D0, 0.0, 0.0, replicates, seed, True)
    table = DualityTable(system.profile)
    fw = run_forward(system, eta, [t], replicates, seed, "duality-forward")
    lhs = table(fw.X[:, 0], fw.Y[:, 0], xi.X, xi.Y)
    dw = run_dual(system, particles_of(xi.X, xi.Y), [t], replicates, seed, "duality-dual")
    rhs = table(eta.X, eta.Y, dw.n[:, 0], dw.m[:, 0])
    a, b = Estimate.of(lhs), Estimate.of(rhs)
    z, sigma = z_score(a, b)
    return DualityCheck(a.mean, b.mean, sigma, z, replicates, seed, bool(abs(z) <= threshold))


@dataclass
class GeneratingCurve:
    theta: float
    times: list
    mean: list
    se: list
    monotone: bool


def equilibrium_generating_check(
    system: System, particles, theta: float, times, replicates: int, seed: int, threshold: float = Z_THRESHOLD
) -> GeneratingCurve:
    """Monte Carlo curve of E[theta^{|Z*(t)|}] and its monotonicity in t."""
    from .dual import run_dual

    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    b = run_dual(system, particles, times, replicates, seed, "generating")
    vals = float(theta) ** b.live
    est = [Estimate.of(vals[:, k]) for k in range(vals.shape[1])]
    monotone = all(
        est[k + 1].mean - est[k].mean >= -threshold * math.hypot(est[k].se, est[k + 1].se)
        for k in range(len(est) - 1)
    )
    return GeneratingCurve(theta, list(map(float, times)), [e.mean for e in est], [e.se for e in est], monotone)

