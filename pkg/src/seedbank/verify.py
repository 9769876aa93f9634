"""Verification suites over small reference systems.

``quick`` runs the deterministic exact checks; ``full`` adds the Monte Carlo
checks. Reports hold no timings so identical seeds give identical bytes.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from itertools import product

import numpy as np

from . import analysis, duality, oracle
from .dual import TwoParticleState, run_dual
from .forward import forward_acceptance_probability, forward_total_rate, run_forward
from .kernel import KernelError, build_kernel
from .geometry import Geometry
from .model import Configuration, System
from .rng import stream
from .stats import Z_THRESHOLD, Estimate, z_against

FAULT_EPS = 1e-3
TIMES = (0.25, 1.0, 4.0)


def reference_systems() -> dict[str, System]:
    return {
        "single": System.build(1, 1, 3, 2, 1.0),
        "two-site": System.build(1, 2, 2, 1, 1.0),
        "hetero": System.build(1, 4, (2, 3, 2, 1), (1, 2, 2, 1), 1.0),
        "ring5": System.build(1, 5, 2, 2, 1.0),
        "small": System.build(1, 1, 2, 1, 1.0),
        "ring3": System.build(1, 3, 2, 1, 1.0),
    }


def _entry(name, kind, metric, value, threshold, passed, **extra):
    out = {"name": name, "kind": kind, "metric": metric, "value": value, "threshold": threshold, "pass": bool(passed)}
    out.update(extra)
    return out


def _dual_cap(system: System) -> int:
    # whole dual box for one colony, pairs otherwise
    return int(system.N.sum() + system.M.sum()) if system.n_sites == 1 else 2


# ---------------------------------------------------------------- exact checks


def check_kernels() -> list[dict]:
    g = Geometry(1, 8)
    k = build_kernel({"type": "nearest-neighbor"}, g)
    table = {tuple(int(v) for v in o): r for o, r in zip(k.offsets, k.exact)}
    want = {(0,): Fraction(1, 2), (1,): Fraction(1, 4), (7,): Fraction(1, 4)}
    ok = table == want and k.c_exact == 1
    out = [_entry("kernel-nearest-neighbor", "exact", "table-match", float(ok), 1.0, ok)]
    for name, spec, msg in (
        ("kernel-rejects-centre", {"type": "explicit", "params": {"table": [[[0], 0.4], [[1], 0.3], [[-1], 0.3]]}},
         "center rate must be 1/2"),
        ("kernel-rejects-reducible", {"type": "explicit", "params": {"table": [[[0], 0.5], [[2], 0.25], [[-2], 0.25]]}},
         "kernel not irreducible"),
    ):
        try:
            build_kernel(spec, g)
            ok = False
        except KernelError as exc:
            ok = msg in str(exc)
        out.append(_entry(name, "exact", "rejected", float(ok), 1.0, ok))
    return out


def check_generators(systems, fault: bool) -> list[dict]:
    out = []
    eps = FAULT_EPS if fault else 0.0
    for key in ("single", "two-site"):
        s = systems[key]
        fw = oracle.build_forward_generator(s)
        cap = _dual_cap(s)
        dl = oracle.build_dual_generator(s, cap, fault=eps, particle_cap=max(cap, oracle.DUAL_PARTICLE_CAP))
        D = oracle.duality_matrix(s, fw, dl)
        r = oracle.generator_criterion_residual(fw, dl, D)
        out.append(_entry(f"generator-criterion-{key}", "exact", "max-residual", r, 1e-12, r < 1e-12))
        for t in TIMES:
            gap = oracle.exact_duality_check(fw, dl, D, t, tol=1e-12)
            out.append(_entry(f"exact-duality-{key}-t{t}", "exact", "max-gap", gap, 1e-8, gap < 1e-8))
        rs = max(fw.row_sum_error(), dl.row_sum_error())
        out.append(_entry(f"row-sums-{key}", "exact", "max-row-sum", rs, 1e-12, rs < 1e-12))
    return out


def check_single_colony(systems) -> list[dict]:
    s = systems["single"]
    N, M = int(s.N[0]), int(s.M[0])
    fw = oracle.build_forward_generator(s)
    st = oracle.stationary_distribution(fw)
    tops = [tuple(fw.states[c[0]]) for c in st.classes]
    ok_classes = tops == [(0, 0), (N, M)]
    out = [_entry("absorbing-states-single", "exact", "classes", float(ok_classes), 1.0, ok_classes)]
    want = (fw.X[:, 0] + fw.Y[:, 0]) / (N + M)
    err = float(np.abs(st.absorption[:, 1] - want).max())
    out.append(_entry("absorption-single", "exact", "max-error", err, 1e-10, err < 1e-10))
    limit = st.limit()
    worst = worst_dual = 0.0
    stir = duality.StirlingTable(8)
    for n, m in product(range(4), range(3)):
        if (n, m) == (0, 0):
            continue
        moment = limit @ (fw.X[:, 0].astype(float) ** n * fw.Y[:, 0].astype(float) ** m)
        target = N**n * M**m * want
        worst = max(worst, float(np.abs(moment - target).max()))
        for k, (x, y) in enumerate(zip(fw.X[:, 0], fw.Y[:, 0])):
            via = duality.raw_moments_from_dual(N, M, int(x), int(y), n, m, stir)
            worst_dual = max(worst_dual, abs(float(via) - target[k]))
    out.append(_entry("moments-single", "exact", "max-error", worst, 1e-8, worst < 1e-8))
    out.append(_entry("moments-via-dual-single", "exact", "max-error", worst_dual, 1e-12, worst_dual < 1e-12))
    dl = oracle.build_dual_generator(s, N + M, particle_cap=N + M)
    dst = oracle.stationary_distribution(dl)
    one = [c for c, cls in enumerate(dst.classes) if dl.mass[cls].max() == 1]
    split_err = 0.0
    ok = len(one) == 1
    if ok:
        c = one[0]
        cls = dst.classes[c]
        lim = dst.limit()
        a = cls[dl.X[cls, 0] == 1][0]
        d = cls[dl.Y[cls, 0] == 1][0]
        for k in np.flatnonzero(dl.mass == 2):
            split_err = max(split_err, abs(lim[k, a] - N / (N + M)), abs(lim[k, d] - M / (N + M)))
    out.append(_entry("dual-split-single", "exact", "max-error", split_err, 1e-10, ok and split_err < 1e-10))
    res = max(st.residual, dst.residual)
    out.append(_entry("stationary-residual", "exact", "max-residual", res, 1e-12, res < 1e-12))
    return out


def check_rates(systems) -> list[dict]:
    s = systems["hetero"]
    fw = oracle.build_forward_generator(s)
    err_rate = err_acc = 0.0
    bound = 0.0
    for k in range(fw.size):
        X, Y = fw.X[k], fw.Y[k]
        r = forward_total_rate(s, X, Y)
        err_rate = max(err_rate, abs(r - fw.exit_rates[k]))
        err_acc = max(err_acc, abs(forward_acceptance_probability(s, X, Y) * s.envelope - r))
        bound = max(bound, r - s.envelope)
    return [
        _entry("forward-rate-vs-generator", "exact", "max-error", err_rate, 1e-12, err_rate < 1e-12),
        _entry("thinning-acceptance-identity", "exact", "max-error", err_acc, 1e-12, err_acc < 1e-12),
        _entry("envelope-bound", "exact", "max-excess", bound, 0.0, bound <= 0.0),
    ]


def _pair_counts(chain: oracle.ExplicitChain, S: int) -> np.ndarray:
    out = np.zeros((chain.size, 2 * S), dtype=np.int64)
    for k, st in enumerate(chain.labels):
        out[k, 2 * st.s1 + (0 if st.a1 else 1)] += 1
        if not st.coalesced:
            out[k, 2 * st.s2 + (0 if st.a2 else 1)] += 1
    return out


def check_dual_consistency(systems) -> list[dict]:
    """The pair chain and the one-particle chain are lumpings of the count dual."""
    out = []
    s = systems["two-site"]
    dl = oracle.build_dual_generator(s, 2)
    worst = 0.0
    for init in (((0, "A"), (1, "A")), ((0, "A"), (0, "D")), ((0, "A"), (0, "A")), ((1, "D"), (0, "A"))):
        pc = oracle.build_pair_generator(s, TwoParticleState.of(*init))
        counts = _pair_counts(pc, s.n_sites)
        start = dl.lookup(counts[0])
        for t in (0.5, 2.0):
            pp = oracle.transient_distribution(pc, 0, t)
            pd = oracle.transient_distribution(dl, start, t)
            lumped = np.zeros(dl.size)
            np.add.at(lumped, [dl.lookup(c) for c in counts], pp)
            worst = max(worst, float(np.abs(lumped - pd).max()))
    out.append(_entry("pair-chain-lumps-to-dual", "exact", "max-tv", worst, 1e-10, worst < 1e-10))
    one = oracle.build_single_generator(s)
    d1 = oracle.build_dual_generator(s, 1)
    idx = [d1.lookup(np.eye(2 * s.n_sites, dtype=np.int64)[2 * i + (0 if a == "A" else 1)]) for i, a in one.labels]
    diff = float(np.abs(one.dense() - d1.dense()[np.ix_(idx, idx)]).max())
    out.append(_entry("single-chain-matches-dual", "exact", "max-error", diff, 1e-14, diff < 1e-14))
    return out


def check_correlation_exact(systems) -> list[dict]:
    s = systems["small"]
    res = analysis.correlation_inequality_exact(s, ((0, "A"), (0, "D")), [0.5, 1.0])
    m = res["min_margin"]
    return [_entry("correlation-inequality-exact", "exact", "min-margin", m, 0.0, m >= 0.0)]


def check_stirling() -> list[dict]:
    st = duality.StirlingTable(20)
    ok = st.check_recurrence() and all(st(n, 0) == 0 for n in range(1, 21)) and all(st(n, n) == 1 for n in range(21))
    ok = ok and all(st.power(x, n) == x**n for x in range(21) for n in range(21))
    bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140]
    ok = ok and [st.bell(n) for n in range(9)] == bell
    return [_entry("stirling-table", "exact", "identities", float(ok), 1.0, ok)]


def check_variability_identities(systems, seed: int, n_states: int = 10_000) -> list[dict]:
    s = systems["hetero"]
    rng = stream(seed, "variability-states")
    bad = 0
    range_bad = 0
    S = s.n_sites
    for _ in range(n_states):
        X = rng.integers(0, s.N + 1)
        Y = rng.integers(0, s.M + 1)
        state = Configuration(X, Y)
        i, j = (int(v) for v in rng.integers(0, S, 2))
        res = analysis.moment_identity_residuals(s.profile, state, i, j)
        bad += sum(v != 0 for v in res.values())
        for kind in ("AA", "AD"):
            h = analysis.heterozygosity(s.profile, state, i, j, kind, exact=True)
            range_bad += not (0 <= h <= 1)
    return [
        _entry("variability-moment-identities", "exact", "violations", bad, 0, bad == 0, states=n_states),
        _entry("variability-range", "property", "violations", range_bad, 0, range_bad == 0, states=n_states),
    ]


def quick_checks(seed: int, fault: bool = False) -> list[dict]:
    systems = reference_systems()
    out = []
    out += check_kernels()
    out += check_generators(systems, fault)
    out += check_single_colony(systems)
    out += check_rates(systems)
    out += check_dual_consistency(systems)
    out += check_correlation_exact(systems)
    out += check_stirling()
    out += check_variability_identities(systems, seed)
    return out


# ---------------------------------------------------------------- statistical checks


def _z_entry(name, z, **extra):
    return _entry(name, "statistical", "z", z, Z_THRESHOLD, abs(z) <= Z_THRESHOLD, **extra)


def statistical_checks(seed: int, replicates: int = 100_000, trajectories: int = 10_000) -> list[dict]:
    systems = reference_systems()
    out = []
    sc = systems["single"]

    # fixation from (2, 1) against (X + Y)/(N + M)
    b = run_forward(sc, Configuration([2], [1]), [1e9], replicates, seed, "fixation", stop_when_absorbed=True)
    fixed = (b.X[:, 0, 0] == sc.N[0]).astype(float)
    z = z_against(Estimate.of(fixed), 3 / 5)
    out.append(_z_entry("fixation-mc-single", z, estimate=float(fixed.mean()), target=0.6))

    # two-particle dual starts settle on (1,0) vs (0,1) with weights N/(N+M), M/(N+M)
    N, M = int(sc.N[0]), int(sc.M[0])
    T = 100.0
    for start in ([(0, "A"), (0, "A")], [(0, "A"), (0, "D")], [(0, "D"), (0, "D")]):
        db = run_dual(sc, start, [T], replicates, seed, "split-" + "".join(a for _, a in start))
        single = db.live[:, 0] == 1
        act = (db.n[:, 0, 0] == 1) & single
        z = z_against(Estimate.of(act.astype(float)), N / (N + M))
        tag = "".join(a for _, a in start)
        out.append(_z_entry(f"dual-split-mc-{tag}", z, estimate=float(act.mean()),
                            unsettled=int((~single).sum())))

    # Monte Carlo duality on the heterogeneous ring
    het = systems["hetero"]
    eta = Configuration([2, 1, 0, 1], [1, 2, 1, 0])
    xi = Configuration([1, 1, 0, 0], [0, 1, 1, 0])
    fw = oracle.build_forward_generator(het)
    dl = oracle.build_dual_generator(het, xi.mass)
    D = oracle.duality_matrix(het, fw, dl)
    for t in (0.5, 2.0):
        r = duality.mc_duality_check(het, eta, xi, t, replicates, seed)
        exact = float(oracle.expm_apply(fw, D[:, [dl.lookup(_inter(xi))]], t)[fw.lookup(_inter(eta)), 0])
        out.append(_z_entry(f"mc-duality-hetero-t{t}", r.z, lhs=r.lhs, rhs=r.rhs, exact=exact))

    # clustering identity on a ring of five
    r5 = systems["ring5"]
    c = analysis.clustering_identity_check(r5, 0, 0.5, [0.5, 1.0, 2.0, 4.0], replicates, seed)
    for t, zz in zip(c.times, c.z):
        out.append(_z_entry(f"clustering-identity-t{t}", zz))

    # density conservation under nu_theta
    d = analysis.density_conservation_check(het, 0.3, [0.5, 1.0, 2.0], replicates, seed)
    out.append(_entry("density-conservation", "statistical", "max|z|", d.max_abs_z, Z_THRESHOLD, d.passed))

    # first and second moment identities
    r3 = systems["ring3"]
    eta3 = Configuration([2, 0, 1], [1, 0, 0])
    for chk in analysis.first_moment_identity_check(r3, 0, eta3, [1.0], replicates, seed):
        out.append(_z_entry(chk.name, chk.z[0]))
    chk = analysis.second_moment_identity_check(r3, ((0, "A"), (1, "A")), eta3, [1.0], replicates, seed)
    out.append(_z_entry("second-moment-pair-0A-1A", chk.z[0]))

    # correlation inequality, Monte Carlo (one-sided)
    sm = systems["small"]
    worst = math.inf
    for tgt in ((0, "A"), (0, "D")):
        chk = analysis.correlation_inequality_check(sm, ((0, "A"), (0, "D")), tgt, [0.5, 1.0], replicates, seed)
        worst = min(worst, min(chk.z))
    out.append(_entry("correlation-inequality-mc", "statistical", "min-z", worst, -Z_THRESHOLD, worst >= -Z_THRESHOLD))

    # generating function of the particle count is non-decreasing in t
    g = duality.equilibrium_generating_check(het, [(0, "A"), (1, "A"), (1, "D"), (2, "D")], 0.5,
                                             [0.5, 1.0, 2.0, 4.0], replicates, seed)
    out.append(_entry("generating-monotone", "statistical", "monotone", float(g.monotone), 1.0, g.monotone))

    out += property_checks(seed, trajectories)
    return out


def _inter(cfg: Configuration) -> np.ndarray:
    out = np.empty(2 * len(cfg.X), dtype=np.int64)
    out[0::2], out[1::2] = cfg.X, cfg.Y
    return out


def property_checks(seed: int, trajectories: int = 10_000) -> list[dict]:
    systems = reference_systems()
    het = systems["hetero"]
    times = [0.25, 0.5, 1.0, 2.0, 4.0]
    fb = run_forward(het, {"type": "binomial", "theta": 0.5}, times, trajectories, seed, "prop-forward", check=True)
    box = int(np.sum((fb.X < 0) | (fb.X > het.N) | (fb.Y < 0) | (fb.Y > het.M))) + fb.violations
    out = [_entry("forward-box-invariance", "property", "violations", box, 0, box == 0, trajectories=trajectories)]
    hz = 0
    S = het.n_sites
    for i in range(S):
        for j in range(S):
            for kind in ("AA", "AD"):
                h = analysis.heterozygosity_batch(het.profile, fb.X, fb.Y, i, j, kind)
                hz += int(np.sum((h < 0) | (h > 1)))
    out.append(_entry("heterozygosity-range", "property", "violations", hz, 0, hz == 0, trajectories=trajectories))
    start = [(0, "A"), (0, "A"), (1, "A"), (1, "D"), (2, "D"), (2, "A"), (3, "D")]
    db = run_dual(het, start, times, trajectories, seed, "prop-dual", check=True)
    excl = int(np.sum(db.n > het.N) + np.sum(db.m > het.M)) + db.violations
    out.append(_entry("dual-exclusion", "property", "violations", excl, 0, excl == 0, trajectories=trajectories))
    inc = int(np.sum(np.diff(db.live, axis=1) > 0)) + db.increases + int(np.sum(db.live[:, 0] > len(start)))
    out.append(_entry("dual-count-non-increasing", "property", "violations", inc, 0, inc == 0, trajectories=trajectories))
    return out


def run_suite(suite: str = "quick", seed: int = 0, fault: bool = False, replicates: int = 100_000,
              trajectories: int = 10_000) -> dict:
    if suite not in ("quick", "full"):
        raise ValueError("suite must be 'quick' or 'full'")
    checks = quick_checks(seed, fault)
    if suite == "full":
        checks += statistical_checks(seed, replicates, trajectories)
    failed = [c["name"] for c in checks if not c["pass"]]
    return {
        "suite": suite,
        "seed": seed,
        "fault_injection": fault,
        "replicates": replicates if suite == "full" else 0,
        "checks": checks,
        "n_checks": len(checks),
        "failed": failed,
        "pass": not failed,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o)}")
