"""Command-line entry point: run, verify, oracle, kernel-check."""
from __future__ import annotations

import argparse
import gzip
import hashlib
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, rng
from .config import ConfigError, load
from .conditions import check_duality_condition

log = logging.getLogger("seedbank")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _write(path: Path, text: str, compress: bool = False) -> Path:
    data = text.encode("utf-8")
    if compress:
        path = path.with_name(path.name + ".gz")
        buf = io.BytesIO()
        # mtime=0 keeps the archive bytes reproducible
        with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as gz:
            gz.write(data)
        data = buf.getvalue()
    path.write_bytes(data)
    return path


def _csv(header: str, times, A, B) -> str:
    """Rows (replicate, t, site, a, b) from (R, T, S) arrays."""
    R, T, S = A.shape
    rep = np.repeat(np.arange(R), T * S)
    tk = np.tile(np.repeat(np.arange(T), S), R)
    site = np.tile(np.arange(S), R * T)
    tstr = np.array([repr(float(t)) for t in times])[tk]
    cols = [rep.astype(str), tstr, site.astype(str), A.ravel().astype(str), B.ravel().astype(str)]
    lines = [",".join(row) for row in zip(*cols)]
    return header + "\n" + "\n".join(lines) + "\n"


def _moments(arr: np.ndarray) -> tuple[list, list]:
    mean = arr.mean(axis=0)
    var = arr.var(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros_like(mean)
    return mean.tolist(), var.tolist()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_run(args) -> int:
    from .dual import run_dual
    from .forward import run_forward

    try:
        overrides = list(args.override or [])
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.out is not None:
            overrides.append(f"out_dir={json.dumps(args.out)}")
        cfg = load(args.config, overrides)
        system = cfg.system()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.raw["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    compress = cfg.raw["compress"]
    times = np.asarray(cfg.snapshots, dtype=float)
    outputs, checks, timings = [], {}, {}
    try:
        if cfg.experiment in ("forward", "both"):
            t0 = time.perf_counter()
            b = run_forward(system, cfg.initial, times, cfg.replicates, cfg.seed, "forward", check=True)
            timings["forward"] = time.perf_counter() - t0
            box = int(np.sum((b.X < 0) | (b.X > system.N) | (b.Y < 0) | (b.Y > system.M))) + b.violations
            checks["forward-box-invariance"] = box == 0
            x, y = b.X / system.N, b.Y / system.M
            xm, xv = _moments(x)
            ym, yv = _moments(y)
            mass = b.X.sum(axis=2) + b.Y.sum(axis=2)
            mm, mv = _moments(mass.astype(float))
            summary = {
                "times": times.tolist(),
                "replicates": cfg.replicates,
                "active_fraction_mean": xm, "active_fraction_var": xv,
                "dormant_fraction_mean": ym, "dormant_fraction_var": yv,
                "mass_mean": mm, "mass_var": mv,
                "violations": box,
            }
            outputs.append(_write(out / "forward_snapshots.csv", _csv("replicate,t,site,X,Y", times, b.X, b.Y), compress))
            outputs.append(_write(out / "forward_summary.json", _dumps(summary)))
            if box:
                raise AssertionError(f"{box} forward box violations")
        if cfg.experiment in ("dual", "both"):
            t0 = time.perf_counter()
            d = run_dual(system, cfg.dual_initial, times, cfg.replicates, cfg.seed, "dual", check=True)
            timings["dual"] = time.perf_counter() - t0
            excl = int(np.sum(d.n > system.N) + np.sum(d.m > system.M)) + d.violations
            inc = int(np.sum(np.diff(d.live, axis=1) > 0)) + d.increases
            checks["dual-exclusion"] = excl == 0
            checks["dual-count-non-increasing"] = inc == 0
            lm, lv = _moments(d.live.astype(float))
            gm, gv = _moments(d.gamma.astype(float))
            summary = {
                "times": times.tolist(),
                "replicates": cfg.replicates,
                "live_mean": lm, "live_var": lv,
                "single_fraction": (d.live == 1).mean(axis=0).tolist(),
                "gamma_mean": gm, "gamma_var": gv,
                "gamma_cap": d.gamma_cap,
                "gamma_capped_fraction": d.gamma_capped.mean(axis=0).tolist(),
                "violations": excl + inc,
            }
            outputs.append(_write(out / "dual_snapshots.csv", _csv("replicate,t,site,n,m", times, d.n, d.m), compress))
            outputs.append(_write(out / "dual_summary.json", _dumps(summary)))
            if excl or inc:
                raise AssertionError(f"{excl} exclusion and {inc} particle-count violations")
    except AssertionError as exc:
        print(f"runtime assertion: {exc}", file=sys.stderr)
        _manifest(out, cfg, checks, timings, outputs)
        print("run: FAILED (runtime assertion)")
        return EXIT_RUNTIME
    _manifest(out, cfg, checks, timings, outputs)
    print(f"run: ok ({cfg.experiment}, {cfg.replicates} replicates, {len(times)} snapshots) -> {out}")
    return EXIT_OK


def _manifest(out: Path, cfg, checks, timings, outputs) -> None:
    manifest = {
        "config": cfg.raw,
        "seed": cfg.seed,
        "version": __version__,
        "checks": checks,
        "timings_seconds": timings,
        "outputs": {p.name: _sha(p) for p in outputs},
    }
    (out / "manifest.json").write_text(_dumps(manifest))


def cmd_verify(args) -> int:
    from .verify import report_json, run_suite

    report = run_suite(args.suite, seed=args.seed or 0, fault=args.fault_injection,
                       replicates=args.replicates, trajectories=args.trajectories)
    text = report_json(report)
    if args.out:
        path = Path(args.out)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"verify_{args.suite}.json").write_text(text)
    else:
        sys.stderr.write(text)
    for c in report["checks"]:
        if not c["pass"]:
            print(f"FAILED {c['name']}: {c['metric']}={c['value']} (threshold {c['threshold']})", file=sys.stderr)
    n, bad = report["n_checks"], len(report["failed"])
    print(f"verify {args.suite}: {'PASS' if report['pass'] else 'FAIL'} ({n - bad}/{n} checks)")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_oracle(args) -> int:
    from . import oracle

    try:
        cfg = load(args.config, args.override or [])
        system = cfg.system()
        fw = oracle.build_forward_generator(system, cap=args.cap)
        dl = oracle.build_dual_generator(system, args.max_particles)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.raw["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    D = oracle.duality_matrix(system, fw, dl)
    oracle.dump_triplets(fw.Q, out / "forward_Q.txt")
    oracle.dump_triplets(dl.Q, out / "dual_Q.txt")
    oracle.dump_triplets(D, out / "duality_D.txt")
    np.savetxt(out / "forward_states.txt", fw.states, fmt="%d")
    np.savetxt(out / "dual_states.txt", dl.states, fmt="%d")
    r = oracle.generator_criterion_residual(fw, dl, D)
    info = {"forward_states": fw.size, "dual_states": dl.size, "generator_residual": r}
    (out / "oracle.json").write_text(_dumps(info))
    print(f"oracle: {fw.size} forward states, {dl.size} dual states, generator residual {r:.3e}")
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    try:
        cfg = load(args.config, args.override or [])
        rep = check_duality_condition(
            cfg.raw["profile"], cfg.raw["kernel"], cfg.d, mode=args.mode, delta=args.delta,
            gamma=args.gamma, radii=args.radii, period=cfg.L,
        )
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = _dumps(rep.to_dict())
    if args.out:
        path = Path(args.out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "kernel_check.json").write_text(text)
    else:
        sys.stderr.write(text)
    print(f"kernel-check (mode {args.mode}): {rep.verdict}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seedbank", description="Moran model with seed-banks: simulation and checks")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: SEEDBANK_THREADS or CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    # --threads is also accepted after the subcommand
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment JSON")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE", help="dotted-path override, repeatable")
        sp.add_argument("--out", default=None, help="output directory")

    r = sub.add_parser("run", parents=[shared], help="run forward and/or dual experiments")
    common(r)
    r.add_argument("--seed", type=int, default=None)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", parents=[shared], help="run the verification suite")
    v.add_argument("--suite", choices=("quick", "full"), default="quick")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=None, help="directory for the JSON report (default: stderr)")
    v.add_argument("--replicates", type=int, default=100_000)
    v.add_argument("--trajectories", type=int, default=10_000)
    v.add_argument("--fault-injection", action="store_true", help="perturb one dual rate; the suite must fail")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle", parents=[shared], help="dump exact generators and the duality matrix")
    common(o)
    o.add_argument("--max-particles", type=int, default=2)
    o.add_argument("--cap", type=int, default=200_000)
    o.set_defaults(func=cmd_oracle)

    k = sub.add_parser("kernel-check", parents=[shared], help="partial-sum diagnostics for the duality conditions")
    common(k)
    k.add_argument("--mode", choices=("a", "b"), default="a")
    k.add_argument("--delta", type=float, default=0.1)
    k.add_argument("--gamma", type=float, default=None)
    k.add_argument("--radii", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32, 64, 128])
    k.set_defaults(func=cmd_kernel_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        rng.set_workers(args.threads)
    try:
        return args.func(args)
    finally:
        rng.set_workers(None)


if __name__ == "__main__":
    sys.exit(main())
