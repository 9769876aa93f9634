"""Finite tori and per-colony population sizes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Sequence

import numpy as np


@dataclass(frozen=True)
class Geometry:
    """A d-dimensional torus of side L.

    Sites are indexed ``0 .. L**d - 1`` in little-endian mixed radix, so the
    first coordinate varies fastest.
    """

    d: int
    L: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"side length must be a positive integer, got {self.L!r}")

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @cached_property
    def coords(self) -> np.ndarray:
        idx = np.arange(self.n_sites)
        out = np.empty((self.n_sites, self.d), dtype=np.int64)
        for k in range(self.d):
            out[:, k] = (idx // self.L**k) % self.L
        out.flags.writeable = False
        return out

    @cached_property
    def _strides(self) -> np.ndarray:
        return self.L ** np.arange(self.d, dtype=np.int64)

    def index(self, coord: Sequence[int] | int) -> int:
        c = np.atleast_1d(np.asarray(coord, dtype=np.int64)) % self.L
        if c.shape != (self.d,):
            raise ValueError(f"coordinate {coord!r} does not have {self.d} components")
        return int(c @ self._strides)

    def indices(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised ``index`` for an ``(n, d)`` array of lattice points."""
        return (np.asarray(coords, dtype=np.int64) % self.L) @ self._strides

    def coord(self, i: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.coords[i])

    def displacement(self, i: int, j: int) -> tuple[int, ...]:
        """Wrapped displacement ``j - i`` with components in ``[0, L)``."""
        return tuple(int(v) for v in (self.coords[j] - self.coords[i]) % self.L)

    def norm(self, v: Sequence[int]) -> int:
        """Max-norm of a displacement measured around the torus."""
        w = np.atleast_1d(np.asarray(v, dtype=np.int64)) % self.L
        return int(np.max(np.minimum(w, self.L - w))) if w.size else 0

    @cached_property
    def site_norms(self) -> np.ndarray:
        """Torus max-norm of every site, measured from site 0."""
        w = self.coords
        out = np.max(np.minimum(w, self.L - w), axis=1)
        out.flags.writeable = False
        return out

    @property
    def max_norm(self) -> int:
        return self.L // 2

    def shift(self, i: int, v: Sequence[int]) -> int:
        return self.index(self.coords[i] + np.asarray(v, dtype=np.int64))


@dataclass(frozen=True)
class ColonyProfile:
    """Active sizes N_i and dormant sizes M_i, one pair per site."""

    N: tuple[int, ...]
    M: tuple[int, ...]

    def __post_init__(self):
        if len(self.N) != len(self.M):
            raise ValueError("N and M must have the same length")
        for name, seq in (("N", self.N), ("M", self.M)):
            for v in seq:
                if int(v) != v or v < 1:
                    raise ValueError(f"{name}_i must be integers >= 1, got {v!r}")
        object.__setattr__(self, "N", tuple(int(v) for v in self.N))
        object.__setattr__(self, "M", tuple(int(v) for v in self.M))

    @property
    def n_sites(self) -> int:
        return len(self.N)

    @cached_property
    def K(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(n, m) for n, m in zip(self.N, self.M))

    @cached_property
    def N_arr(self) -> np.ndarray:
        a = np.array(self.N, dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def M_arr(self) -> np.ndarray:
        a = np.array(self.M, dtype=np.int64)
        a.flags.writeable = False
        return a

    @cached_property
    def K_arr(self) -> np.ndarray:
        a = self.N_arr / self.M_arr
        a.flags.writeable = False
        return a

    @classmethod
    def constant(cls, n_sites: int, N: int, M: int) -> ColonyProfile:
        return cls((N,) * n_sites, (M,) * n_sites)


@dataclass(frozen=True)
class ProfileSpec:
    """Recipe for a colony profile; extends to any lattice point.

    Types: ``constant`` {N, M}; ``periodic`` {N: [a, b], M: [c, d]} alternating
    on the parity of the coordinate sum; ``uniform`` {N: [lo, hi], M: [lo, hi]}
    drawn with ``seed``; ``power`` {delta, M} with N_i = ceil((1+|i|)^delta);
    ``exponential`` {base, M} with N_i = base^|i|; ``explicit`` {N: [...], M: [...]}.
    """

    type: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    TYPES = ("constant", "periodic", "uniform", "power", "exponential", "explicit")

    def __post_init__(self):
        if self.type not in self.TYPES:
            raise ValueError(f"unknown profile type {self.type!r}; expected one of {self.TYPES}")

    @classmethod
    def from_dict(cls, spec: dict[str, Any]) -> ProfileSpec:
        extra = set(spec) - {"type", "params", "seed"}
        if extra:
            raise ValueError(f"unknown profile fields: {sorted(extra)}")
        return cls(spec["type"], dict(spec.get("params", {})), spec.get("seed"))

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.type, "params": self.params, "seed": self.seed}

    def pattern(self, points: np.ndarray, norms: np.ndarray, periodic_L: int | None = None):
        """Sizes (N, M) at lattice points with the given max-norms.

        ``points`` is ``(n, d)``. ``periodic_L`` is only used by ``explicit``
        specs, which extend periodically.
        """
        p = self.params
        n = len(points)
        points = np.asarray(points, dtype=np.int64)
        norms = np.asarray(norms, dtype=np.int64)
        if self.type == "constant":
            return np.full(n, int(p["N"])), np.full(n, int(p["M"]))
        if self.type == "periodic":
            parity = points.sum(axis=1) % 2
            Na, Ma = np.asarray(p["N"], dtype=np.int64), np.asarray(p["M"], dtype=np.int64)
            return Na[parity], Ma[parity]
        if self.type == "uniform":
            rng = np.random.default_rng(self.seed)
            lo, hi = p["N"]
            N = rng.integers(int(lo), int(hi) + 1, size=n)
            lo, hi = p["M"]
            M = rng.integers(int(lo), int(hi) + 1, size=n)
            return N, M
        if self.type == "power":
            delta = float(p["delta"])
            N = np.array([math.ceil((1 + int(r)) ** delta) for r in norms], dtype=np.int64)
            return N, np.full(n, int(p.get("M", 1)))
        if self.type == "exponential":
            base = int(p["base"])
            N = np.array([base ** int(r) for r in norms], dtype=object)
            return N, np.full(n, int(p.get("M", 1)))
        # explicit
        N = np.asarray(p["N"], dtype=np.int64)
        M = np.asarray(p["M"], dtype=np.int64)
        if periodic_L is None:
            if n > len(N):
                raise ValueError("an explicit profile needs a period to extend beyond its listed sites")
            return N[:n], M[:n]
        d = points.shape[1] if points.ndim == 2 else 1
        idx = (points % periodic_L) @ (periodic_L ** np.arange(d))
        return N[idx], M[idx]


def build_profile(spec: ProfileSpec | dict, geometry: Geometry) -> ColonyProfile:
    if isinstance(spec, dict):
        spec = ProfileSpec.from_dict(spec)
    if spec.type == "explicit":
        if len(spec.params["N"]) != geometry.n_sites or len(spec.params["M"]) != geometry.n_sites:
            raise ValueError(
                f"explicit profile needs {geometry.n_sites} entries for N and M"
            )
    N, M = spec.pattern(geometry.coords, geometry.site_norms, periodic_L=geometry.L)
    return ColonyProfile(tuple(int(v) for v in N), tuple(int(v) for v in M))
