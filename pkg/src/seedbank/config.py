"""Experiment configuration: JSON ingestion, validation and dotted overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .geometry import Geometry, ProfileSpec
from .kernel import KernelSpec
from .model import System

TOP_FIELDS = {
    "geometry", "kernel", "profile", "lambda", "initial", "horizon", "snapshots",
    "replicates", "seed", "out_dir", "experiment", "dual_initial", "compress",
}
EXPERIMENTS = ("forward", "dual", "both")


class ConfigError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _only(d: dict, allowed: set, where: str):
    _require(isinstance(d, dict), f"{where} must be an object")
    extra = set(d) - allowed
    _require(not extra, f"unknown field(s) in {where}: {sorted(extra)}")


@dataclass
class ExperimentConfig:
    raw: dict

    @property
    def d(self) -> int:
        return self.raw["geometry"]["d"]

    @property
    def L(self) -> int:
        return self.raw["geometry"]["L"]

    @property
    def lam(self) -> float:
        return float(self.raw["lambda"])

    @property
    def horizon(self) -> float:
        return float(self.raw["horizon"])

    @property
    def snapshots(self) -> list[float]:
        return self.raw["snapshots"]

    @property
    def replicates(self) -> int:
        return self.raw["replicates"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def initial(self) -> dict:
        return self.raw["initial"]

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def dual_initial(self) -> list:
        return [(int(s), str(a)) for s, a in self.raw["dual_initial"]]

    def system(self) -> System:
        return System.from_specs(self.d, self.L, self.raw["profile"], self.raw["kernel"], self.lam)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


def validate(raw: dict) -> ExperimentConfig:
    """Check a config dict, fill defaults, and build the system once to validate it."""
    raw = copy.deepcopy(raw)
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]  # a run manifest can be fed back as a config
    _only(raw, TOP_FIELDS, "config")
    for key in ("geometry", "kernel", "profile", "lambda", "initial", "horizon"):
        _require(key in raw, f"missing field {key!r}")
    _only(raw["geometry"], {"d", "L"}, "geometry")
    g = raw["geometry"]
    _require(isinstance(g.get("d"), int) and isinstance(g.get("L"), int), "geometry needs integer d and L")
    try:
        Geometry(g["d"], g["L"])
        KernelSpec.from_dict(raw["kernel"])
        ProfileSpec.from_dict(raw["profile"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    lam = raw["lambda"]
    _require(isinstance(lam, (int, float)) and lam > 0, "lambda must be positive")
    init = raw["initial"]
    _only(init, {"type", "theta", "matrix"}, "initial")
    if init.get("type") == "binomial":
        th = init.get("theta")
        _require(isinstance(th, (int, float)) and 0 <= th <= 1, "theta must lie in [0, 1]")
    elif init.get("type") == "deterministic":
        _require(isinstance(init.get("matrix"), list), "deterministic initial needs a matrix")
    else:
        raise ConfigError(f"unknown initial type {init.get('type')!r}")
    h = raw["horizon"]
    _require(isinstance(h, (int, float)) and h >= 0, "horizon must be >= 0")
    snaps = raw.setdefault("snapshots", [h])
    _require(isinstance(snaps, list) and snaps, "snapshots must be a non-empty list")
    _require(all(isinstance(t, (int, float)) and 0 <= t <= h for t in snaps), "snapshots must lie in [0, horizon]")
    _require(all(a <= b for a, b in zip(snaps, snaps[1:])), "snapshots must be sorted")
    reps = raw.setdefault("replicates", 1)
    _require(isinstance(reps, int) and reps >= 1, "replicates must be >= 1")
    seed = raw.setdefault("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be an unsigned 64-bit integer")
    raw.setdefault("out_dir", "out")
    exp = raw.setdefault("experiment", "forward")
    _require(exp in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}")
    raw.setdefault("compress", False)
    _require(isinstance(raw["compress"], bool), "compress must be true or false")
    if exp in ("dual", "both"):
        di = raw.get("dual_initial")
        _require(isinstance(di, list) and di, "dual experiments need a non-empty dual_initial list")
        _require(all(isinstance(p, list) and len(p) == 2 and p[1] in ("A", "D") for p in di),
                 "dual_initial entries are [site, 'A'|'D']")
    cfg = ExperimentConfig(raw)
    try:
        system = cfg.system()
        if init["type"] == "deterministic":
            from .model import Configuration

            Configuration.from_pairs(init["matrix"]).validate(system.profile)
        if exp in ("dual", "both"):
            from .dual import counts_of, check_exclusion

            _require(all(0 <= s < system.n_sites for s, _ in cfg.dual_initial), "dual_initial site out of range")
            check_exclusion(system, *counts_of(system, cfg.dual_initial))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        parts = key.split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {p!r} in override {item!r}")
        node[parts[-1]] = parse_value(value)
    return raw


def load(path, overrides: list[str] | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if isinstance(raw, dict) and isinstance(raw.get("config"), dict):
        raw = raw["config"]  # a run manifest can be fed back as a config
    return validate(apply_overrides(raw, overrides or []))
