"""Interacting coalescing random walks with activity switching (the dual system).

Three engines:

* a labelled scalar engine (``dual_step`` / ``dual_simulate``) with per-particle
  exponential clocks and slot picks, tracking lineage labels and Gamma;
* a vectorised count engine (``simulate_dual_batch``) for Monte Carlo, which
  thins per-particle clocks at a common bound;
* a two-particle engine using the explicit pair rates, which records the
  coalescence time tau.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .model import System
from .rng import concat, map_chunks
from .stats import wilson_interval

ACTIVE, DORMANT = "A", "D"


def _kind(a) -> bool:
    if a in (ACTIVE, True, 1):
        return True
    if a in (DORMANT, False, 0):
        return False
    raise ValueError(f"activity must be 'A' or 'D', got {a!r}")


def counts_of(system: System, particles) -> tuple[np.ndarray, np.ndarray]:
    """Per-site active/dormant counts for an iterable of (site, 'A'|'D')."""
    n = np.zeros(system.n_sites, dtype=np.int64)
    m = np.zeros(system.n_sites, dtype=np.int64)
    for site, a in particles:
        if _kind(a):
            n[site] += 1
        else:
            m[site] += 1
    return n, m


def particles_of(n, m) -> list[tuple[int, str]]:
    """Inverse of ``counts_of`` in a canonical order."""
    out = []
    for i, k in enumerate(n):
        out += [(i, ACTIVE)] * int(k)
    for i, k in enumerate(m):
        out += [(i, DORMANT)] * int(k)
    return out


def check_exclusion(system: System, n, m) -> None:
    n, m = np.asarray(n), np.asarray(m)
    if np.any(n > system.N) or np.any(m > system.M) or np.any(n < 0) or np.any(m < 0):
        raise ValueError("dual configuration violates n_i <= N_i, m_i <= M_i")


# ---------------------------------------------------------------- labelled engine


@dataclass
class Particle:
    labels: frozenset
    site: int
    active: bool


@dataclass
class CoalescenceEvent:
    time: float
    site: int
    merged: frozenset
    into: frozenset


@dataclass
class DualState:
    particles: list[Particle]
    n: np.ndarray
    m: np.ndarray
    t: float = 0.0
    gamma: int = 0
    log: list[CoalescenceEvent] = field(default_factory=list)

    @classmethod
    def start(cls, system: System, particles, t: float = 0.0) -> DualState:
        """``particles`` is a sequence of (site, 'A'|'D'); labels are 0..k-1."""
        parts = [Particle(frozenset([k]), int(s), _kind(a)) for k, (s, a) in enumerate(particles)]
        n, m = counts_of(system, [(p.site, p.active) for p in parts])
        check_exclusion(system, n, m)
        norms = system.geometry.site_norms
        gamma = max((int(norms[p.site]) for p in parts), default=0)
        return cls(parts, n, m, t, gamma)

    @property
    def size(self) -> int:
        return len(self.particles)

    def partition(self) -> list[tuple[list[int], int, str]]:
        """Blocks of coalesced labels, each marked with (site, activity)."""
        blocks = [(sorted(p.labels), p.site, ACTIVE if p.active else DORMANT) for p in self.particles]
        return sorted(blocks)

    def total_rate(self, system: System) -> float:
        K = system.K
        return float(
            sum(system.c + system.lam if p.active else system.lam * K[p.site] for p in self.particles)
        )


def dual_step(system: System, state: DualState, rng: np.random.Generator):
    """One clock ring of the labelled dual; returns (state, event kind).

    Active particle at i: at rate a(i, j) it picks a uniform slot among the
    N_j active slots at j (own slot: nothing; occupied: coalesce into the
    occupant; empty: move there); at rate lambda it picks one of the M_i
    dormant slots and falls dormant if the slot is empty. A dormant particle
    rings at rate lambda K_i and wakes up if its pick among N_i active slots
    is empty.
    """
    if not state.particles:
        raise ValueError("dual state has no particles")
    rates = np.array(
        [system.c + system.lam if p.active else system.lam * system.K[p.site] for p in state.particles]
    )
    total = rates.sum()
    state.t += rng.exponential(1.0 / total)
    k = min(int(np.searchsorted(np.cumsum(rates) / total, rng.random(), side="right")), len(rates) - 1)
    p = state.particles[k]
    i = p.site
    N, M = system.N, system.M
    if p.active:
        u = rng.random() * (system.c + system.lam)
        if u < system.c:
            j = int(system.kernel.targets[i, system.kernel.pick(u)])
            slot = int(rng.integers(N[j]))
            if j == i:
                slot -= 1  # slot 0 is the particle's own
                if slot < 0:
                    return state, "own-slot"
            others = [q for q in state.particles if q is not p and q.active and q.site == j]
            if slot < len(others):
                q = others[slot]
                merged = q.labels | p.labels
                state.log.append(CoalescenceEvent(state.t, j, p.labels, q.labels))
                q.labels = merged
                state.particles.remove(p)
                state.n[i] -= 1
                return state, "coalescence"
            if j == i:
                return state, "own-site"
            p.site = j
            state.n[i] -= 1
            state.n[j] += 1
            assert state.n[j] <= N[j], "exclusion violated"
            state.gamma = max(state.gamma, int(system.geometry.site_norms[j]))
            return state, "migration"
        if int(rng.integers(M[i])) < state.m[i]:
            return state, "blocked-AtoD"
        p.active = False
        state.n[i] -= 1
        state.m[i] += 1
        assert state.m[i] <= M[i], "exclusion violated"
        return state, "AtoD"
    if int(rng.integers(N[i])) < state.n[i]:
        return state, "blocked-DtoA"
    p.active = True
    state.m[i] -= 1
    state.n[i] += 1
    assert state.n[i] <= N[i], "exclusion violated"
    return state, "DtoA"


@dataclass
class DualTrajectory:
    times: np.ndarray
    n: np.ndarray  # (T, S)
    m: np.ndarray
    live: np.ndarray  # (T,)
    gamma: np.ndarray
    gamma_capped: np.ndarray
    partitions: list
    final: DualState
    events: int = 0


def dual_simulate(
    system: System,
    initial,
    times,
    rng: np.random.Generator,
    max_events: int = 10_000_000,
) -> DualTrajectory:
    """Labelled dual run with snapshots at ``times`` (``inf`` allowed).

    An infinite snapshot time runs until a single particle is left; more than
    ``max_events`` clock rings raise RuntimeError (e.g. a trapped pair).
    """
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("snapshot times must be non-negative and sorted")
    state = initial if isinstance(initial, DualState) else DualState.start(system, initial)
    check_exclusion(system, state.n, state.m)
    S, T = system.n_sites, len(times)
    cap = system.geometry.max_norm
    n_out = np.empty((T, S), dtype=np.int64)
    m_out = np.empty((T, S), dtype=np.int64)
    live = np.empty(T, dtype=np.int64)
    gamma = np.empty(T, dtype=np.int64)
    parts = [None] * T
    events = 0
    k = 0

    def record(k):
        n_out[k], m_out[k] = state.n, state.m
        live[k] = state.size
        gamma[k] = state.gamma
        parts[k] = state.partition()

    while k < T:
        if math.isinf(times[k]) and state.size <= 1:
            record(k)
            k += 1
            continue
        snap = (state.n.copy(), state.m.copy(), state.size, state.gamma, state.partition())
        before = state.size
        dual_step(system, state, rng)
        events += 1
        assert state.size <= before, "particle count increased"
        if events > max_events:
            raise RuntimeError("dual run exceeded max_events without finishing")
        while k < T and times[k] < state.t:
            n_out[k], m_out[k], live[k], gamma[k], parts[k] = snap
            k += 1
    return DualTrajectory(times, n_out, m_out, live, gamma, gamma >= cap, parts, state, events)


# ---------------------------------------------------------------- count engine


@dataclass
class DualBatch:
    times: np.ndarray
    n: np.ndarray  # (R, T, S)
    m: np.ndarray
    live: np.ndarray  # (R, T)
    gamma: np.ndarray  # (R, T)
    gamma_cap: int
    violations: int = 0
    increases: int = 0

    @property
    def gamma_capped(self) -> np.ndarray:
        return self.gamma >= self.gamma_cap


def _site_counts(site, mask, S):
    R = site.shape[0]
    flat = (np.arange(R)[:, None] * S + site)[mask]
    return np.bincount(flat, minlength=R * S).reshape(R, S)


def simulate_dual_batch(
    system: System,
    sites,
    active,
    times,
    rng: np.random.Generator,
    check: bool = False,
) -> DualBatch:
    """Vectorised dual replicates sharing one initial particle layout.

    ``sites`` and ``active`` are (P,) or (R, P) arrays. Each pass proposes one
    clock ring per replicate: a uniform particle slot and a uniform mark in
    [0, E) with E = max(c + lambda, lambda max K_i); dead particles and marks
    above the particle's true rate are rejected.
    """
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0) or not np.isfinite(times[-1]):
        raise ValueError("snapshot times must be finite, non-negative and sorted")
    site = np.array(sites, dtype=np.int64)
    act = np.array(active, dtype=bool)
    if site.ndim == 1:
        site = np.tile(site, (1, 1))
        act = np.tile(act, (1, 1))
    R, P = site.shape
    S, T = system.n_sites, len(times)
    N, M, K = system.N, system.M, system.K
    c, lam = system.c, system.lam
    kern = system.kernel
    norms = system.geometry.site_norms
    E = system.particle_envelope
    rate = P * E
    alive = np.ones((R, P), dtype=bool)
    n0 = _site_counts(site, act, S)
    m0 = _site_counts(site, ~act, S)
    if np.any(n0 > N) or np.any(m0 > M):
        raise ValueError("dual configuration violates n_i <= N_i, m_i <= M_i")
    gamma = norms[site].max(axis=1).astype(np.int64)

    out_n = np.empty((R, T, S), dtype=np.int64)
    out_m = np.empty((R, T, S), dtype=np.int64)
    out_live = np.empty((R, T), dtype=np.int64)
    out_g = np.empty((R, T), dtype=np.int64)
    t = np.zeros(R)
    nxt = np.zeros(R, dtype=np.int64)
    live = np.arange(R)
    violations = increases = 0
    horizon = times[-1]

    while live.size:
        tn = t[live] + rng.exponential(1.0 / rate, live.size)
        for k in range(T):
            sel = (nxt[live] == k) & (tn > times[k])
            if sel.any():
                rows = live[sel]
                out_n[rows, k] = _site_counts(site[rows], alive[rows] & act[rows], S)
                out_m[rows, k] = _site_counts(site[rows], alive[rows] & ~act[rows], S)
                out_live[rows, k] = alive[rows].sum(axis=1)
                out_g[rows, k] = gamma[rows]
                nxt[rows] += 1
        go = tn <= horizon
        r = live[go]
        t[r] = tn[go]
        live = r
        n = r.size
        if n == 0:
            break
        before = alive[r].sum(axis=1) if check else None
        p = rng.integers(0, P, n)
        u = rng.random(n) * E
        slot_u = rng.random(n)
        i = site[r, p]
        a = act[r, p]
        ok = alive[r, p]
        mig = ok & a & (u < c)
        exc = ok & a & (u >= c) & (u < c + lam)
        wake = ok & ~a & (u < lam * K[i])

        # occupancy seen from each proposal
        j = np.where(mig, kern.targets[i, kern.pick(u)], i)
        occ_A = np.sum(alive[r] & act[r] & (site[r] == j[:, None]), axis=1)
        occ_D = np.sum(alive[r] & ~act[r] & (site[r] == i[:, None]), axis=1)

        # active particle picks one of N_j slots; slot 0 is its own when j == i
        s = np.floor(slot_u * N[j]).astype(np.int64) - (j == i)
        others = occ_A - (j == i)
        coal = mig & (s >= 0) & (s < others)
        move = mig & (s >= others) & (j != i)
        rr, pp = r[coal], p[coal]
        alive[rr, pp] = False
        rr, pp = r[move], p[move]
        site[rr, pp] = j[move]
        gamma[rr] = np.maximum(gamma[rr], norms[j[move]])

        # exchange: an empty dormant slot (A->D) or an empty active slot (D->A)
        dsl = np.floor(slot_u * M[i]).astype(np.int64)
        to_d = exc & (dsl >= occ_D)
        asl = np.floor(slot_u * N[i]).astype(np.int64)
        occ_Ai = np.where(wake, np.sum(alive[r] & act[r] & (site[r] == i[:, None]), axis=1), 0)
        to_a = wake & (asl >= occ_Ai)
        act[r[to_d], p[to_d]] = False
        act[r[to_a], p[to_a]] = True

        if check:
            changed = move | to_d | to_a
            rc = r[changed]
            if rc.size:
                nn = _site_counts(site[rc], alive[rc] & act[rc], S)
                mm = _site_counts(site[rc], alive[rc] & ~act[rc], S)
                violations += int(np.sum(nn > N) + np.sum(mm > M))
            increases += int(np.sum(alive[r].sum(axis=1) > before))
    return DualBatch(times, out_n, out_m, out_live, out_g, system.geometry.max_norm, violations, increases)


def _dual_chunk(rng, size, system, sites, active, times, check):
    b = simulate_dual_batch(
        system, np.tile(sites, (size, 1)), np.tile(active, (size, 1)), times, rng, check=check
    )
    return b.n, b.m, b.live, b.gamma, np.array([b.violations]), np.array([b.increases])


def run_dual(
    system: System,
    particles,
    times,
    replicates: int,
    seed: int,
    experiment: str = "dual",
    check: bool = False,
) -> DualBatch:
    """Chunked, reproducible dual replicates from a list of (site, 'A'|'D')."""
    particles = list(particles)
    if not particles:
        raise ValueError("dual initial state needs at least one particle")
    sites = np.array([s for s, _ in particles], dtype=np.int64)
    active = np.array([_kind(a) for _, a in particles], dtype=bool)
    parts = map_chunks(
        _dual_chunk, replicates, seed, experiment,
        system=system, sites=sites, active=active, times=np.asarray(times, dtype=float), check=check,
    )
    n, m, live, gamma, v, inc = concat(parts)
    return DualBatch(
        np.asarray(times, dtype=float), n, m, live, gamma, system.geometry.max_norm, int(v.sum()), int(inc.sum())
    )


# ---------------------------------------------------------------- two particles


@dataclass(frozen=True)
class TwoParticleState:
    s1: int
    a1: bool
    s2: int
    a2: bool
    coalesced: bool = False

    @classmethod
    def of(cls, p1, p2) -> TwoParticleState:
        return cls(int(p1[0]), _kind(p1[1]), int(p2[0]), _kind(p2[1]))

    def validate(self, system: System) -> TwoParticleState:
        if self.coalesced:
            if (self.s1, self.a1) != (self.s2, self.a2):
                raise ValueError("coalesced pair must occupy a single position")
            return self
        if self.s1 == self.s2 and self.a1 == self.a2:
            cap = system.N[self.s1] if self.a1 else system.M[self.s1]
            if cap < 2:
                raise ValueError("invalid pair: both particles in a single-slot pool")
        return self

    def key(self):
        return (self.s1, self.a1, self.s2, self.a2, self.coalesced)


def pair_transitions(system: System, st: TwoParticleState) -> list[tuple[float, TwoParticleState]]:
    """All positive-rate moves out of a two-particle state, listed by rule."""
    N, M, K = system.N, system.M, system.K
    lam = system.lam
    kern = system.kernel
    out = []
    if st.coalesced:
        i = st.s1
        if st.a1:
            for j, a in zip(kern.targets[i], kern.rates_arr):
                if j != i:
                    out.append((a, TwoParticleState(int(j), True, int(j), True, True)))
            out.append((lam, TwoParticleState(i, False, i, False, True)))
        else:
            out.append((lam * K[i], TwoParticleState(i, True, i, True, True)))
        return out
    me = [(st.s1, st.a1), (st.s2, st.a2)]
    for w in (0, 1):
        (i, act), (k, pact) = me[w], me[1 - w]

        def put(pos):
            return TwoParticleState(*pos, *me[1 - w]) if w == 0 else TwoParticleState(*me[0], *pos)

        if act:
            for j, a in zip(kern.targets[i], kern.rates_arr):
                j = int(j)
                partner_here = pact and k == j
                if partner_here:
                    out.append((a / N[j], TwoParticleState(j, True, j, True, True)))
                if j != i:
                    out.append((a * (1 - 1 / N[j]) if partner_here else a, put((j, True))))
            blocked = (not pact) and k == i
            rate = lam * (1 - 1 / M[i]) if blocked else lam
            if rate > 0:
                out.append((rate, put((i, False))))
        else:
            blocked = pact and k == i
            rate = lam * (K[i] - 1 / M[i]) if blocked else lam * K[i]
            if rate > 0:
                out.append((rate, put((i, True))))
    return out


@dataclass
class TwoParticleRun:
    path: list[tuple[float, TwoParticleState]]
    tau: float | None  # None when censored at the horizon
    horizon: float


def two_particle_simulate(
    system: System, init: TwoParticleState, horizon: float, rng: np.random.Generator
) -> TwoParticleRun:
    """Exact Gillespie run of the pair chain up to ``horizon``."""
    state = init.validate(system)
    t = 0.0
    path = [(0.0, state)]
    tau = 0.0 if state.coalesced else None
    while True:
        moves = pair_transitions(system, state)
        rates = np.array([r for r, _ in moves])
        total = rates.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        k = min(int(np.searchsorted(np.cumsum(rates) / total, rng.random(), side="right")), len(moves) - 1)
        state = moves[k][1]
        path.append((t, state))
        if state.coalesced and tau is None:
            tau = t
    return TwoParticleRun(path, tau, horizon)


@dataclass
class PairBatch:
    times: np.ndarray
    s1: np.ndarray  # (R, T)
    a1: np.ndarray
    s2: np.ndarray
    a2: np.ndarray
    coalesced: np.ndarray
    tau: np.ndarray  # (R,), inf when censored


def simulate_pair_batch(system: System, init: TwoParticleState, times, rng: np.random.Generator, size: int) -> PairBatch:
    """Vectorised pair chain by thinning each particle's clock at E."""
    init.validate(system)
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0) or not np.isfinite(times[-1]):
        raise ValueError("snapshot times must be finite, non-negative and sorted")
    R, T = size, len(times)
    N, M, K = system.N, system.M, system.K
    c, lam = system.c, system.lam
    kern = system.kernel
    E = system.particle_envelope
    s = np.tile(np.array([init.s1, init.s2], dtype=np.int64), (R, 1))
    a = np.tile(np.array([init.a1, init.a2], dtype=bool), (R, 1))
    coal = np.full(R, init.coalesced)
    tau = np.where(coal, 0.0, np.inf)
    o = {k: np.empty((R, T), dtype=np.int64) for k in ("s1", "s2")}
    oa = {k: np.empty((R, T), dtype=bool) for k in ("a1", "a2", "c")}
    t = np.zeros(R)
    nxt = np.zeros(R, dtype=np.int64)
    live = np.arange(R)
    horizon = times[-1]
    while live.size:
        tn = t[live] + rng.exponential(1.0 / (2 * E), live.size)
        for k in range(T):
            sel = (nxt[live] == k) & (tn > times[k])
            if sel.any():
                rows = live[sel]
                o["s1"][rows, k], o["s2"][rows, k] = s[rows, 0], s[rows, 1]
                oa["a1"][rows, k], oa["a2"][rows, k] = a[rows, 0], a[rows, 1]
                oa["c"][rows, k] = coal[rows]
                nxt[rows] += 1
        go = tn <= horizon
        r = live[go]
        t[r] = tn[go]
        live = r
        n = r.size
        if n == 0:
            break
        w = rng.integers(0, 2, n)
        u = rng.random(n) * E
        v = rng.random(n)
        ok = ~(coal[r] & (w == 1))
        i, act = s[r, w], a[r, w]
        k_, pact = s[r, 1 - w], a[r, 1 - w]
        free = coal[r]  # partner no longer interacts
        mig = ok & act & (u < c)
        exc = ok & act & (u >= c) & (u < c + lam)
        wake = ok & ~act & (u < lam * K[i])
        j = np.where(mig, kern.targets[i, kern.pick(u)], i)
        partner_at_j = ~free & pact & (k_ == j)
        merge = mig & partner_at_j & (v < 1.0 / N[j])
        move = mig & (j != i) & ~merge
        # accepted exchanges: blocked by a partner sitting in the target pool
        d_block = ~free & ~pact & (k_ == i)
        to_d = exc & ~(d_block & (v < 1.0 / M[i]))
        a_block = ~free & pact & (k_ == i)
        to_a = wake & ~(a_block & (v < 1.0 / N[i]))

        rows = r[move]
        s[rows, w[move]] = j[move]
        rows = r[to_d]
        a[rows, w[to_d]] = False
        rows = r[to_a]
        a[rows, w[to_a]] = True
        rows = r[merge]
        s[rows] = j[merge][:, None]
        a[rows] = True
        coal[rows] = True
        tau[rows] = t[rows]
        # after coalescence particle 2 shadows particle 1
        cr = r[coal[r]]
        s[cr, 1] = s[cr, 0]
        a[cr, 1] = a[cr, 0]
        if np.any(coal[r] & (w == 1) & (move | to_d | to_a)):
            raise AssertionError("shadow particle moved after coalescence")
    return PairBatch(times, o["s1"], oa["a1"], o["s2"], oa["a2"], oa["c"], tau)


def _pair_chunk(rng, size, system, init, times):
    b = simulate_pair_batch(system, init, times, rng, size)
    return b.s1, b.a1, b.s2, b.a2, b.coalesced, b.tau


def run_pairs(system: System, init: TwoParticleState, times, replicates: int, seed: int, experiment: str = "pair") -> PairBatch:
    parts = map_chunks(_pair_chunk, replicates, seed, experiment, system=system, init=init, times=np.asarray(times, float))
    s1, a1, s2, a2, c, tau = concat(parts)
    return PairBatch(np.asarray(times, float), s1, a1, s2, a2, c, tau)


@dataclass
class SurvivalCurve:
    times: np.ndarray
    survivors: np.ndarray
    replicates: int
    ci_lo: np.ndarray
    ci_hi: np.ndarray

    @property
    def estimate(self) -> np.ndarray:
        return self.survivors / self.replicates

    def rows(self):
        return [
            (float(t), int(s), self.replicates, float(lo), float(hi))
            for t, s, lo, hi in zip(self.times, self.survivors, self.ci_lo, self.ci_hi)
        ]


def coalescence_probability(
    system: System, init: TwoParticleState, times, replicates: int, seed: int, z: float = 1.959963984540054
) -> SurvivalCurve:
    """Monte Carlo P(tau >= t) on a time grid with Wilson intervals."""
    times = np.asarray(times, dtype=float)
    if np.all(times == 0):
        ones = np.ones(len(times))
        return SurvivalCurve(times, np.full(len(times), replicates), replicates, ones, ones)
    b = run_pairs(system, init, times, replicates, seed, "coalescence")
    survivors = np.array([(b.tau >= t).sum() for t in times])
    lo, hi = wilson_interval(survivors, replicates, z)
    return SurvivalCurve(times, survivors, replicates, lo, hi)


def gamma_tail_diagnostic(system: System, particles, T: float, replicates: int, seed: int) -> dict:
    """Empirical tail of Gamma(T) with the profile-weighted partial sums.

    ``weighted[k]`` is the partial sum over shells r <= k of
    (sum of N_i over |i| = r) * P(Gamma(T) >= r).
    """
    if not T > 0:
        raise ValueError("T must be positive")
    b = run_dual(system, particles, [T], replicates, seed, "gamma-tail")
    g = b.gamma[:, 0]
    cap = system.geometry.max_norm
    ks = np.arange(cap + 1)
    tail = np.array([(g >= k).mean() for k in ks])
    norms = system.geometry.site_norms
    shell = np.array([system.N[norms == k].sum() for k in ks], dtype=float)
    weighted = np.cumsum(shell * tail)
    g0 = max(int(norms[s]) for s, _ in particles)
    poisson_tail = poisson.sf(ks - 1, system.c * T)  # P(Poisson(cT) >= k)
    return {
        "T": T,
        "k": ks.tolist(),
        "tail": tail.tolist(),
        "gamma0": g0,
        "excess_tail": [float((g >= g0 + k).mean()) for k in ks],
        "poisson_tail": poisson_tail.tolist(),
        "shell_N": shell.tolist(),
        "weighted": weighted.tolist(),
        "capped_fraction": float((g >= cap).mean()),
        "cap": cap,
    }
