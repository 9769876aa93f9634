"""Brute-force generators, transient laws and stationary laws on small state spaces.

State enumeration is mixed-radix little-endian over sites with the active
digit before the dormant one: the first coordinate of the first site runs
fastest. Dual chains list every (n_i, m_i) inside the exclusion box with at
most ``max_particles`` particles, in that same order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve
from scipy.stats import poisson

from .duality import DualityTable
from .model import System

FORWARD_CAP = 200_000
DUAL_PARTICLE_CAP = 4
DENSE_LIMIT = 2000


@dataclass
class ExplicitChain:
    kind: str
    states: np.ndarray  # (n, 2S), columns [X_0, Y_0, X_1, Y_1, ...]
    Q: sp.csr_matrix
    index: dict = field(repr=False)
    labels: list | None = None

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def X(self) -> np.ndarray:
        return self.states[:, 0::2]

    @property
    def Y(self) -> np.ndarray:
        return self.states[:, 1::2]

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.Q.diagonal()

    @property
    def Lambda(self) -> float:
        top = float(self.exit_rates.max()) if self.size else 0.0
        return top if top > 0 else 1.0

    @property
    def mass(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def row_sum_error(self) -> float:
        return float(np.abs(np.asarray(self.Q.sum(axis=1))).max())

    def lookup(self, state) -> int:
        return self.index[tuple(int(v) for v in state)]

    def dense(self) -> np.ndarray:
        return self.Q.toarray()


def _interleave(X, Y) -> np.ndarray:
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    out = np.empty((X.shape[0], 2 * X.shape[1]), dtype=np.int64)
    out[:, 0::2], out[:, 1::2] = X, Y
    return out


def _radix(system: System) -> list[int]:
    return [int(v) for pair in zip(system.N + 1, system.M + 1) for v in pair]


def _assemble(kind, states, rows, cols, vals, labels=None) -> ExplicitChain:
    n = states.shape[0]
    rows, cols, vals = (np.concatenate(a) if a else np.zeros(0) for a in (rows, cols, vals))
    keep = (vals > 0) & (rows != cols)
    Q = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    Q.sum_duplicates()
    Q = (Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())).tocsr()
    index = {tuple(int(v) for v in s): k for k, s in enumerate(states)}
    return ExplicitChain(kind, states, Q, index, labels)


def build_forward_generator(system: System, cap: int = FORWARD_CAP) -> ExplicitChain:
    """Exact rate matrix of the forward chain on the full box."""
    radix = _radix(system)
    n = int(np.prod(radix, dtype=object))
    if n > cap:
        raise ValueError(f"forward state space has {n} states, above the cap {cap}")
    digits = np.stack(np.unravel_index(np.arange(n), radix, order="F"), axis=1).astype(np.int64)
    X, Y = digits[:, 0::2], digits[:, 1::2]
    stride = np.cumprod([1] + radix[:-1])
    sX, sY = stride[0::2], stride[1::2]
    N, M = system.N, system.M
    lam = system.lam
    k = system.kernel
    idx = np.arange(n)
    rows, cols, vals = [], [], []
    for i in range(system.n_sites):
        for j, a in zip(k.targets[i], k.rates_arr):
            down = a * X[:, i] * (N[j] - X[:, j]) / N[j]
            up = a * (N[i] - X[:, i]) * X[:, j] / N[j]
            rows += [idx, idx]
            cols += [idx - sX[i], idx + sX[i]]
            vals += [down, up]
        to_d = lam * X[:, i] * (M[i] - Y[:, i]) / M[i]
        to_a = lam * (N[i] - X[:, i]) * Y[:, i] / M[i]
        rows += [idx, idx]
        cols += [idx - sX[i] + sY[i], idx + sX[i] - sY[i]]
        vals += [to_d, to_a]
    return _assemble("forward", digits, rows, cols, vals)


def enumerate_dual_states(system: System, max_particles: int) -> np.ndarray:
    radix = _radix(system)
    out = []
    # reversed product so the first coordinate varies fastest
    for rev in itertools.product(*[range(r) for r in reversed(radix)]):
        if sum(rev) <= max_particles:
            out.append(rev[::-1])
    return np.array(out, dtype=np.int64).reshape(-1, len(radix))


def build_dual_generator(
    system: System, max_particles: int, fault: float = 0.0, particle_cap: int = DUAL_PARTICLE_CAP
) -> ExplicitChain:
    """Exact rate matrix of the dual counts with at most ``max_particles``.

    Requests above ``particle_cap`` are refused; raise the cap explicitly for
    a small geography whose whole dual box is wanted.

    ``fault`` adds that amount to the coalescence rate from the state with
    exactly two active particles at site 0 (and nothing else); it exists only
    to show that the exact checks detect a wrong rate.
    """
    if not 0 <= max_particles <= particle_cap:
        raise ValueError(f"dual particle count must lie in [0, {particle_cap}]")
    states = enumerate_dual_states(system, max_particles)
    index = {tuple(s): k for k, s in enumerate(states)}
    S = system.n_sites
    N, M = system.N, system.M
    lam = system.lam
    A = system.kernel.matrix
    rows, cols, vals = [], [], []

    def add(k, s, rate):
        if rate > 0:
            rows.append(np.array([k]))
            cols.append(np.array([index[tuple(s)]]))
            vals.append(np.array([float(rate)]))

    for k, st in enumerate(states):
        n, m = st[0::2], st[1::2]
        for i in range(S):
            if n[i] == 0 and m[i] == 0:
                continue
            base = st.copy()
            if n[i] > 0:
                lose = base.copy()
                lose[2 * i] -= 1
                add(k, lose, n[i] * (n[i] - 1) / 2 / N[i])
                for j in range(S):
                    if j == i or A[i, j] == 0:
                        continue
                    add(k, lose, n[i] * A[i, j] * n[j] / N[j])
                    mv = lose.copy()
                    mv[2 * j] += 1
                    if mv[2 * j] <= N[j]:
                        add(k, mv, n[i] * A[i, j] * (N[j] - n[j]) / N[j])
                sl = lose.copy()
                sl[2 * i + 1] += 1
                if sl[2 * i + 1] <= M[i]:
                    add(k, sl, lam * n[i] * (M[i] - m[i]) / M[i])
            if m[i] > 0:
                wk = base.copy()
                wk[2 * i + 1] -= 1
                wk[2 * i] += 1
                if wk[2 * i] <= N[i]:
                    add(k, wk, lam * (N[i] - n[i]) * m[i] / M[i])
    if fault:
        pair = np.zeros(2 * S, dtype=np.int64)
        pair[0] = 2
        if tuple(pair) not in index:
            raise ValueError("fault injection needs N_0 >= 2 and a particle cap >= 2")
        one = pair.copy()
        one[0] = 1
        add(index[tuple(pair)], one, fault)
    return _assemble("dual", states, rows, cols, vals)


def _bfs_chain(kind, start, moves_of, encode) -> ExplicitChain:
    seen = {start: 0}
    order = [start]
    rows, cols, vals = [], [], []
    k = 0
    while k < len(order):
        s = order[k]
        for rate, t in moves_of(s):
            if t not in seen:
                seen[t] = len(order)
                order.append(t)
            rows.append(np.array([k]))
            cols.append(np.array([seen[t]]))
            vals.append(np.array([float(rate)]))
        k += 1
    states = np.array([encode(s) for s in order], dtype=np.int64)
    chain = _assemble(kind, states, rows, cols, vals, labels=order)
    chain.index = {s: i for i, s in enumerate(order)}
    return chain


def build_pair_generator(system: System, init) -> ExplicitChain:
    """Pair chain ((site, activity) x 2, coalesced flag) reachable from ``init``."""
    from .dual import pair_transitions

    init = init.validate(system)
    return _bfs_chain(
        "pair",
        init,
        lambda s: pair_transitions(system, s),
        lambda s: (s.s1, int(s.a1), s.s2, int(s.a2), int(s.coalesced)),
    )


def build_single_generator(system: System) -> ExplicitChain:
    """One dual particle: migration a(i, j), A->D at lambda, D->A at lambda K_i."""
    S = system.n_sites
    lam = system.lam
    A = system.kernel.matrix
    labels = [(i, a) for i in range(S) for a in ("A", "D")]
    index = {s: k for k, s in enumerate(labels)}
    rows, cols, vals = [], [], []
    for i in range(S):
        for j in range(S):
            if j != i and A[i, j] > 0:
                rows.append(np.array([index[(i, "A")]]))
                cols.append(np.array([index[(j, "A")]]))
                vals.append(np.array([A[i, j]]))
        rows += [np.array([index[(i, "A")]]), np.array([index[(i, "D")]])]
        cols += [np.array([index[(i, "D")]]), np.array([index[(i, "A")]])]
        vals += [np.array([lam]), np.array([lam * system.K[i]])]
    states = np.array([(i, int(a == "A")) for i, a in labels], dtype=np.int64)
    chain = _assemble("single", states, rows, cols, vals, labels=labels)
    chain.index = index
    return chain


# ---------------------------------------------------------------- transient laws


def poisson_terms(rate_t: float, tol: float) -> np.ndarray:
    """Poisson(rate_t) weights truncated once the remaining tail is below tol."""
    if rate_t == 0:
        return np.ones(1)
    K = int(poisson.isf(tol, rate_t)) + 2
    while poisson.sf(K, rate_t) > tol:
        K *= 2
    return poisson.pmf(np.arange(K + 1), rate_t)


def expm_apply(chain: ExplicitChain, F, t: float, tol: float = 1e-12, Lambda: float | None = None) -> np.ndarray:
    """e^{tQ} F by uniformization: sum_k Poisson(Lambda t)_k P^k F with P = I + Q/Lambda."""
    if t < 0:
        raise ValueError("t must be non-negative")
    L = Lambda or chain.Lambda
    if L < chain.Lambda:
        raise ValueError("uniformization rate below the largest exit rate")
    P = sp.identity(chain.size, format="csr") + chain.Q / L
    if chain.size <= DENSE_LIMIT:
        P = P.toarray()
    F = np.asarray(F, dtype=float)
    w = poisson_terms(L * t, tol)
    out = w[0] * F
    cur = F
    for wk in w[1:]:
        cur = P @ cur
        out = out + wk * cur
    return out


def transient_distribution(chain: ExplicitChain, initial, t: float, tol: float = 1e-12, Lambda=None) -> np.ndarray:
    """Law at time t from a state index (or an initial probability vector)."""
    if not 0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    if np.ndim(initial) == 0:
        p0 = np.zeros(chain.size)
        p0[int(initial)] = 1.0
    else:
        p0 = np.asarray(initial, dtype=float)
    L = Lambda or chain.Lambda
    PT = (sp.identity(chain.size, format="csr") + chain.Q / L).T.tocsr()
    w = poisson_terms(L * t, tol)
    out = w[0] * p0
    cur = p0
    for wk in w[1:]:
        cur = PT @ cur
        out = out + wk * cur
    return out


# ---------------------------------------------------------------- stationary laws


@dataclass
class StationaryResult:
    classes: list  # closed communicating classes, index arrays
    pis: list  # stationary law on each class
    absorption: np.ndarray  # (n, n_classes) hitting probabilities
    traps: list  # closed classes that are not the expected absorbing states
    residual: float

    def limit(self) -> np.ndarray:
        """(n, n) matrix of long-run laws from every start."""
        n = self.absorption.shape[0]
        out = np.zeros((n, n))
        for c, (cls, pi) in enumerate(zip(self.classes, self.pis)):
            out[:, cls] += self.absorption[:, [c]] * pi[None, :]
        return out


def stationary_distribution(chain: ExplicitChain) -> StationaryResult:
    Q = chain.Q.tocsr()
    n = chain.size
    off = Q - sp.diags(Q.diagonal())
    off.eliminate_zeros()
    n_comp, comp = connected_components(off, directed=True, connection="strong")
    coo = off.tocoo()
    leaves = np.zeros(n_comp, dtype=bool)
    leaves[comp[coo.row][comp[coo.row] != comp[coo.col]]] = True
    closed = [np.flatnonzero(comp == c) for c in range(n_comp) if not leaves[c]]
    closed.sort(key=lambda a: a[0])
    pis, residual = [], 0.0
    for cls in closed:
        Qc = Q[cls][:, cls].toarray()
        if len(cls) == 1:
            pi = np.ones(1)
        else:
            A = np.vstack([Qc.T, np.ones(len(cls))])
            b = np.zeros(len(cls) + 1)
            b[-1] = 1.0
            pi = np.linalg.lstsq(A, b, rcond=None)[0]
        residual = max(residual, float(np.abs(pi @ Qc).max()))
        pis.append(pi)
    in_closed = np.zeros(n, dtype=bool)
    for cls in closed:
        in_closed[cls] = True
    trans = np.flatnonzero(~in_closed)
    H = np.zeros((n, len(closed)))
    for c, cls in enumerate(closed):
        H[cls, c] = 1.0
    if trans.size:
        Qtt = Q[trans][:, trans].tocsc()
        for c, cls in enumerate(closed):
            rhs = -np.asarray(Q[trans][:, cls].sum(axis=1)).ravel()
            H[trans, c] = np.atleast_1d(spsolve(Qtt, rhs)) if trans.size > 1 else rhs / Qtt.toarray()[0, 0]
    traps = []
    if chain.kind == "forward":
        traps = [len(cls) > 1 for cls in closed]
    elif chain.kind == "dual":
        traps = [bool(chain.mass[cls].min() >= 2) for cls in closed]
    elif chain.kind == "pair":
        traps = [not bool(chain.states[cls, 4].any()) for cls in closed]
    return StationaryResult(closed, pis, H, traps, residual)


# ---------------------------------------------------------------- duality checks


def duality_matrix(system: System, forward: ExplicitChain, dual: ExplicitChain) -> np.ndarray:
    """D[eta, xi] for every forward state eta and dual state xi."""
    table = DualityTable(system.profile)
    return table(forward.X[:, None, :], forward.Y[:, None, :], dual.X[None, :, :], dual.Y[None, :, :])


def generator_criterion_residual(forward: ExplicitChain, dual: ExplicitChain, D: np.ndarray) -> float:
    """max |(L D(., xi))(eta) - (L_dual D(eta, .))(xi)| over all pairs."""
    if D.shape != (forward.size, dual.size):
        raise ValueError("D has the wrong shape for these chains")
    lhs = forward.Q @ D
    rhs = (dual.Q @ D.T).T
    return float(np.abs(lhs - rhs).max())


def exact_duality_check(
    forward: ExplicitChain, dual: ExplicitChain, D: np.ndarray, t: float, tol: float = 1e-10
) -> float:
    """max |E_eta D(Z_t, xi) - E^xi D(eta, Z*_t)| over all pairs."""
    if D.shape != (forward.size, dual.size):
        raise ValueError("D has the wrong shape for these chains")
    if t == 0:
        return 0.0
    lhs = expm_apply(forward, D, t, tol)
    rhs = expm_apply(dual, D.T, t, tol).T
    return float(np.abs(lhs - rhs).max())


def dump_triplets(M, path) -> None:
    """Write a matrix as 'row col value' lines (nonzeros only)."""
    coo = sp.coo_matrix(M)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
