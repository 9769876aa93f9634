"""Exact simulation of the multi-colony Moran model with seed-banks.

Both engines use thinning at the constant envelope rate sum_i (c + lambda) N_i:
a proposal picks an active individual uniformly, then either a migration
target j (weight a(i, j)) and a uniform active individual there, or a uniform
dormant individual in its own colony (weight lambda). The proposal changes the
state only when the two individuals carry different types, which realises the
transition rates exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Configuration, System, sample_initial
from .rng import concat, map_chunks

MAX_PASSES = 10_000_000
KINDS = ("resample-down", "resample-up", "exchange-AtoD", "exchange-DtoA", "rejected-proposal")


@dataclass
class ForwardEvent:
    kind: str
    site: int
    source: int
    time: float


@dataclass
class ForwardState:
    X: np.ndarray
    Y: np.ndarray
    t: float = 0.0
    events: int = 0
    fractions: np.ndarray = field(default=None, repr=False)

    @classmethod
    def start(cls, system: System, config: Configuration, t: float = 0.0) -> ForwardState:
        config.validate(system.profile)
        X = config.X.copy()
        return cls(X, config.Y.copy(), t, 0, X / system.N)

    @property
    def configuration(self) -> Configuration:
        return Configuration(self.X, self.Y)


def forward_total_rate(system: System, X, Y) -> float:
    """Sum of every transition rate out of (X, Y), by direct summation."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    N, M = system.N, system.M
    x = X / N
    A = system.kernel.matrix
    down = X[:, None] * (1 - x[None, :])
    up = (N - X)[:, None] * x[None, :]
    migration = float(np.sum(A * (down + up)))
    exchange = float(np.sum(system.lam * (X * (M - Y) + (N - X) * Y) / M))
    return migration + exchange


def forward_acceptance_probability(system: System, X, Y) -> float:
    """Probability that one thinning proposal changes the state."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    N, M = system.N, system.M
    x, y = X / N, Y / M
    c, lam = system.c, system.lam
    k = system.kernel
    xt = x[k.targets]
    mig = np.sum(k.rates_arr[None, :] / c * (x[:, None] * (1 - xt) + (1 - x[:, None]) * xt), axis=1)
    exc = x * (1 - y) + (1 - x) * y
    site_p = N / N.sum()
    return float(np.sum(site_p * (c / (c + lam) * mig + lam / (c + lam) * exc)))


def forward_step(system: System, state: ForwardState, rng: np.random.Generator):
    """Advance ``state`` in place by one thinning proposal."""
    N, M = system.N, system.M
    c = system.c
    state.t += rng.exponential(1.0 / system.envelope)
    i = min(int(np.searchsorted(system.site_cdf, rng.random(), side="right")), system.n_sites - 1)
    u = rng.random() * (c + system.lam)
    focal = rng.integers(N[i]) < state.X[i]
    if u < c:
        j = int(system.kernel.targets[i, system.kernel.pick(u)])
        other = rng.integers(N[j]) < state.X[j]
        if focal and not other:
            kind = "resample-down"
            state.X[i] -= 1
        elif other and not focal:
            kind = "resample-up"
            state.X[i] += 1
        else:
            kind = "rejected-proposal"
    else:
        j = i
        other = rng.integers(M[i]) < state.Y[i]
        if focal and not other:
            kind = "exchange-AtoD"
            state.X[i] -= 1
            state.Y[i] += 1
        elif other and not focal:
            kind = "exchange-DtoA"
            state.X[i] += 1
            state.Y[i] -= 1
        else:
            kind = "rejected-proposal"
    if kind != "rejected-proposal":
        assert 0 <= state.X[i] <= N[i] and 0 <= state.Y[i] <= M[i], "forward state left the box"
        state.fractions[i] = state.X[i] / N[i]
    state.events += 1
    return state, ForwardEvent(kind, i, j, state.t)


@dataclass
class ForwardTrajectory:
    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    events: list[ForwardEvent] | None = None


def _snapshot_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("snapshot times must be non-negative and sorted")
    return times


def forward_simulate(
    system: System,
    initial: Configuration,
    times,
    rng: np.random.Generator,
    record_events: bool = False,
) -> ForwardTrajectory:
    """Single trajectory; the state at each snapshot time is right-continuous."""
    times = _snapshot_times(times)
    if math.isinf(times[-1]):
        raise ValueError("single trajectories need finite snapshot times")
    state = ForwardState.start(system, initial)
    S, T = system.n_sites, len(times)
    X = np.empty((T, S), dtype=np.int64)
    Y = np.empty((T, S), dtype=np.int64)
    events = [] if record_events else None
    k = 0
    while k < T:
        before_X, before_Y = state.X.copy(), state.Y.copy()
        _, ev = forward_step(system, state, rng)
        while k < T and times[k] < state.t:
            X[k], Y[k] = before_X, before_Y
            k += 1
        if record_events and ev.time <= times[-1]:
            events.append(ev)
    return ForwardTrajectory(times, X, Y, events)


@dataclass
class ForwardBatch:
    times: np.ndarray
    X: np.ndarray  # (R, T, S)
    Y: np.ndarray
    violations: int = 0


def simulate_forward_batch(
    system: System,
    X0: np.ndarray,
    Y0: np.ndarray,
    times,
    rng: np.random.Generator,
    check: bool = False,
    stop_when_absorbed: bool = False,
    max_passes: int = MAX_PASSES,
) -> ForwardBatch:
    """Simulate many independent replicates in lock-step.

    Each replicate keeps its own clock; every pass draws one proposal for each
    replicate that has not yet passed the horizon. With ``stop_when_absorbed``
    a replicate that reaches all-0 or all-top is frozen there. An infinite
    last snapshot needs ``stop_when_absorbed``; more than ``max_passes``
    passes raise RuntimeError.
    """
    times = _snapshot_times(times)
    if math.isinf(times[-1]):
        _check_fixes(system, stop_when_absorbed)
    X = np.array(X0, dtype=np.int64)
    Y = np.array(Y0, dtype=np.int64)
    R, S = X.shape
    T = len(times)
    horizon = times[-1]
    N, M = system.N, system.M
    c, lam = system.c, system.lam
    kern = system.kernel
    out_X = np.empty((R, T, S), dtype=np.int64)
    out_Y = np.empty((R, T, S), dtype=np.int64)
    t = np.zeros(R)
    nxt = np.zeros(R, dtype=np.int64)
    live = np.arange(R)
    violations = 0
    total_N, total_M = int(N.sum()), int(M.sum())
    if check:
        violations += int(np.sum((X < 0) | (X > N) | (Y < 0) | (Y > M)))

    passes = 0
    while live.size:
        passes += 1
        if passes > max_passes:
            raise RuntimeError(f"{live.size} replicates still running after {max_passes} passes")
        n = live.size
        tn = t[live] + rng.exponential(1.0 / system.envelope, n)
        for k in range(T):
            m = (nxt[live] == k) & (tn > times[k])
            if m.any():
                rows = live[m]
                out_X[rows, k] = X[rows]
                out_Y[rows, k] = Y[rows]
                nxt[rows] += 1
        go = tn <= horizon
        r = live[go]
        t[r] = tn[go]
        n = r.size
        i = np.minimum(np.searchsorted(system.site_cdf, rng.random(n), side="right"), S - 1)
        u = rng.random(n) * (c + lam)
        mig = u < c
        j = np.where(mig, kern.targets[i, kern.pick(u)], i)
        focal = rng.integers(0, N[i]) < X[r, i]
        high = np.where(mig, N[j], M[i])
        src = np.where(mig, X[r, j], Y[r, i])
        other = rng.integers(0, high) < src
        step = (~focal & other).astype(np.int64) - (focal & ~other)
        X[r, i] += step
        Y[r, i] -= np.where(mig, 0, step)
        if check:
            violations += int(np.sum((X[r, i] < 0) | (X[r, i] > N[i]) | (Y[r, i] < 0) | (Y[r, i] > M[i])))
        keep = np.ones(n, dtype=bool)
        if stop_when_absorbed:
            mass = X[r].sum(axis=1) + Y[r].sum(axis=1)
            done = (mass == 0) | ((mass == total_N + total_M) & np.all(X[r] == N, axis=1))
            if done.any():
                rows = r[done]
                for k in range(T):
                    m = nxt[rows] <= k
                    out_X[rows[m], k] = X[rows[m]]
                    out_Y[rows[m], k] = Y[rows[m]]
                nxt[rows] = T
                keep = ~done
        live = r[keep]
    return ForwardBatch(times, out_X, out_Y, violations)


def _check_fixes(system: System, stop_when_absorbed: bool) -> None:
    if not stop_when_absorbed:
        raise ValueError("an infinite snapshot time needs stop_when_absorbed=True")
    if system.n_sites == 1 and system.N[0] == 1:
        # resampling is a no-op, so exchange shuttles (1,0) <-> (0,1) forever
        raise ValueError("a single colony with N=1 never fixes from a mixed state")


def _forward_chunk(rng, size, system, initial, times, check, stop_when_absorbed):
    X0, Y0 = sample_initial(system.profile, initial, rng, size=size)
    b = simulate_forward_batch(system, X0, Y0, times, rng, check=check, stop_when_absorbed=stop_when_absorbed)
    return b.X, b.Y, np.array([b.violations])


def run_forward(
    system: System,
    initial: dict | Configuration,
    times,
    replicates: int,
    seed: int,
    experiment: str = "forward",
    check: bool = False,
    stop_when_absorbed: bool = False,
) -> ForwardBatch:
    """Chunked, reproducible batch of forward replicates.

    ``initial`` is a Configuration or an initial-law spec; binomial initials
    are redrawn for every replicate.
    """
    if math.isinf(_snapshot_times(times)[-1]):
        _check_fixes(system, stop_when_absorbed)
    if isinstance(initial, Configuration):
        initial = {"type": "deterministic", "matrix": np.stack([initial.X, initial.Y], 1).tolist()}
    parts = map_chunks(
        _forward_chunk,
        replicates,
        seed,
        experiment,
        system=system,
        initial=initial,
        times=_snapshot_times(times),
        check=check,
        stop_when_absorbed=stop_when_absorbed,
    )
    X, Y, v = concat(parts)
    return ForwardBatch(_snapshot_times(times), X, Y, int(v.sum()))
