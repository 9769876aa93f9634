"""Model parameters bundled for the simulators, plus configuration arithmetic."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .geometry import ColonyProfile, Geometry, ProfileSpec, build_profile
from .kernel import KernelSpec, MigrationKernel, build_kernel


@dataclass(frozen=True)
class System:
    """Geography, colony sizes, migration kernel and exchange rate."""

    geometry: Geometry
    profile: ColonyProfile
    kernel: MigrationKernel
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"exchange rate must be positive, got {self.lam!r}")
        if self.profile.n_sites != self.geometry.n_sites:
            raise ValueError("profile size does not match the geometry")
        if self.kernel.geometry != self.geometry:
            raise ValueError("kernel was built for a different geometry")

    @classmethod
    def build(
        cls,
        d: int,
        L: int,
        N: Sequence[int] | int,
        M: Sequence[int] | int,
        lam: float = 1.0,
        kernel: KernelSpec | dict | None = None,
    ) -> System:
        g = Geometry(d, L)
        S = g.n_sites
        N = (N,) * S if isinstance(N, int) else tuple(N)
        M = (M,) * S if isinstance(M, int) else tuple(M)
        k = build_kernel(kernel or {"type": "nearest-neighbor"}, g)
        return cls(g, ColonyProfile(N, M), k, float(lam))

    @classmethod
    def from_specs(cls, d, L, profile: ProfileSpec | dict, kernel: KernelSpec | dict, lam) -> System:
        g = Geometry(d, L)
        return cls(g, build_profile(profile, g), build_kernel(kernel, g), float(lam))

    @property
    def n_sites(self) -> int:
        return self.geometry.n_sites

    @property
    def N(self) -> np.ndarray:
        return self.profile.N_arr

    @property
    def M(self) -> np.ndarray:
        return self.profile.M_arr

    @property
    def K(self) -> np.ndarray:
        return self.profile.K_arr

    @property
    def c(self) -> float:
        return self.kernel.c

    @cached_property
    def envelope(self) -> float:
        """Upper bound sum_i (c + lambda) N_i on the forward exit rate."""
        return float((self.c + self.lam) * self.N.sum())

    @cached_property
    def site_cdf(self) -> np.ndarray:
        return np.cumsum(self.N) / self.N.sum()

    @cached_property
    def particle_envelope(self) -> float:
        """Per-particle rate bound for the dual: max(c + lambda, lambda max K_i)."""
        return float(max(self.c + self.lam, self.lam * self.K.max()))

    def top(self) -> Configuration:
        return Configuration(self.N.copy(), self.M.copy())

    def zero(self) -> Configuration:
        S = self.n_sites
        return Configuration(np.zeros(S, dtype=np.int64), np.zeros(S, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Configuration:
    """Per-site counts (X_i, Y_i) of active and dormant individuals of the tracked type."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.int64)
        Y = np.array(self.Y, dtype=np.int64)
        if X.shape != Y.shape or X.ndim != 1:
            raise ValueError("X and Y must be 1-d arrays of equal length")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return bool(np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y))

    def __hash__(self):
        return hash((self.X.tobytes(), self.Y.tobytes()))

    def __repr__(self):
        return f"Configuration(X={self.X.tolist()}, Y={self.Y.tolist()})"

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[int]]) -> Configuration:
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def in_box(self, profile: ColonyProfile) -> bool:
        return bool(
            np.all((self.X >= 0) & (self.X <= profile.N_arr) & (self.Y >= 0) & (self.Y <= profile.M_arr))
        )

    def validate(self, profile: ColonyProfile) -> Configuration:
        if len(self.X) != profile.n_sites:
            raise ValueError(f"configuration has {len(self.X)} sites, profile has {profile.n_sites}")
        if not self.in_box(profile):
            raise ValueError("configuration violates 0 <= X_i <= N_i, 0 <= Y_i <= M_i")
        return self

    @property
    def mass(self) -> int:
        return int(self.X.sum() + self.Y.sum())


def delta(n_sites: int, site: int, kind: str) -> Configuration:
    """Unit configuration with a single active ('A') or dormant ('D') unit at ``site``."""
    X = np.zeros(n_sites, dtype=np.int64)
    Y = np.zeros(n_sites, dtype=np.int64)
    if kind == "A":
        X[site] = 1
    elif kind == "D":
        Y[site] = 1
    else:
        raise ValueError(f"kind must be 'A' or 'D', got {kind!r}")
    return Configuration(X, Y)


def config_add_sub(profile: ColonyProfile, eta: Configuration, xi: Configuration, sign: int = 1) -> Configuration:
    """``eta + xi`` or ``eta - xi`` componentwise, clamped into the box.

    Values above N_i (M_i) become N_i (M_i); values below zero become zero.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    X = np.clip(eta.X + sign * xi.X, 0, profile.N_arr)
    Y = np.clip(eta.Y + sign * xi.Y, 0, profile.M_arr)
    return Configuration(X, Y)


def sample_initial(profile: ColonyProfile, spec: dict, rng: np.random.Generator, size: int | None = None):
    """Draw an initial configuration.

    ``spec`` is ``{"type": "deterministic", "matrix": [[X, Y], ...]}`` or
    ``{"type": "binomial", "theta": t}``. With ``size`` given, returns a pair of
    ``(size, S)`` arrays instead of a single Configuration.
    """
    kind = spec.get("type")
    if kind == "deterministic":
        cfg = Configuration.from_pairs(spec["matrix"]).validate(profile)
        if size is None:
            return cfg
        return np.tile(cfg.X, (size, 1)), np.tile(cfg.Y, (size, 1))
    if kind == "binomial":
        theta = float(spec["theta"])
        if not 0.0 <= theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {theta}")
        shape = (profile.n_sites,) if size is None else (size, profile.n_sites)
        X = rng.binomial(np.broadcast_to(profile.N_arr, shape), theta)
        Y = rng.binomial(np.broadcast_to(profile.M_arr, shape), theta)
        if size is None:
            return Configuration(X, Y)
        return X.astype(np.int64), Y.astype(np.int64)
    raise ValueError(f"unknown initial law {kind!r}")
