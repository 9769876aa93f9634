"""Translation-invariant migration kernels wrapped onto a torus."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any

import numpy as np
from scipy.special import comb, zeta

from .geometry import Geometry

log = logging.getLogger(__name__)

HALF = Fraction(1, 2)


class KernelError(ValueError):
    pass


def _as_fraction(x) -> Fraction | None:
    """Exact value of a rate given as int, Fraction, float or 'p/q' string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise KernelError(f"rate {x!r} is not a number")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise KernelError(f"rate {x!r} is not a number")


@dataclass(frozen=True)
class KernelSpec:
    """Recipe for a migration kernel on Z^d.

    Types: ``nearest-neighbor`` {mass}; ``geometric`` {rho, mass};
    ``power-law`` {gamma, mass}; ``explicit`` {table: [[displacement, rate], ...]}.
    ``mass`` is the total off-centre rate (default 1/2, so c = 1).
    """

    type: str
    params: dict[str, Any] = field(default_factory=dict)
    truncation_radius: int | None = None

    TYPES = ("nearest-neighbor", "geometric", "power-law", "explicit")

    def __post_init__(self):
        if self.type not in self.TYPES:
            raise KernelError(f"unknown kernel type {self.type!r}; expected one of {self.TYPES}")

    @classmethod
    def from_dict(cls, spec: dict[str, Any]) -> KernelSpec:
        extra = set(spec) - {"type", "params", "truncation_radius"}
        if extra:
            raise KernelError(f"unknown kernel fields: {sorted(extra)}")
        return cls(spec["type"], dict(spec.get("params", {})), spec.get("truncation_radius"))

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.type, "params": self.params, "truncation_radius": self.truncation_radius}

    @property
    def mass(self) -> Fraction:
        m = _as_fraction(self.params.get("mass", HALF))
        if m <= 0:
            raise KernelError("off-centre mass must be positive")
        return m


def _ball(d: int, radius: int) -> np.ndarray:
    side = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([side] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _shell_counts(d: int, r: np.ndarray) -> np.ndarray:
    return (2 * r + 1) ** d - (2 * r - 1) ** d


def _geometric_normaliser(d: int, rho: float) -> float:
    total, r = 0.0, 1
    while True:
        term = float(_shell_counts(d, np.array(r))) * rho**r
        total += term
        if term < 1e-18 * total:
            return total
        r += 1


def _power_normaliser(d: int, gamma: float) -> float:
    # shell(r) = sum over k with d-k odd of 2 C(d,k) 2^k r^k
    return float(
        sum(2 * comb(d, k, exact=True) * 2**k * zeta(gamma - k) for k in range(d) if (d - k) % 2 == 1)
    )


def lattice_kernel(spec: KernelSpec, d: int, radius: int):
    """Rates a(0, w) on Z^d for ``|w| <= radius``.

    Returns ``(points, rates, exact, total_off_centre_mass)`` where ``exact``
    holds Fractions when the rates are rational and None otherwise.
    """
    if spec.type == "explicit":
        pts, rates, exact = [], [], []
        for entry in spec.params["table"]:
            w, rate = entry
            w = [w] if isinstance(w, int) else list(w)
            if len(w) != d:
                raise KernelError(f"displacement {w!r} is not {d}-dimensional")
            fr = _as_fraction(rate)
            pts.append(w)
            rates.append(float(fr))
            exact.append(fr)
        pts = np.array(pts, dtype=np.int64).reshape(-1, d)
        rates = np.array(rates)
        if len({tuple(p) for p in pts}) != len(pts):
            raise KernelError("explicit kernel table repeats a displacement")
        if np.any(rates <= 0):
            raise KernelError("kernel rates must be positive")
        centre = np.all(pts == 0, axis=1)
        if not centre.any() or exact[int(np.argmax(centre))] != HALF:
            raise KernelError("center rate must be 1/2")
        mass = sum(e for e, c in zip(exact, centre) if not c)
        keep = np.max(np.abs(pts), axis=1) <= radius
        return pts[keep], rates[keep], [e for e, k in zip(exact, keep) if k], mass

    mass = spec.mass
    if spec.type == "nearest-neighbor":
        pts = [np.zeros(d, dtype=np.int64)]
        exact = [HALF]
        for k in range(d):
            for s in (1, -1):
                e = np.zeros(d, dtype=np.int64)
                e[k] = s
                pts.append(e)
                exact.append(mass / (2 * d))
        pts = np.array(pts)
        keep = np.max(np.abs(pts), axis=1) <= radius
        rates = np.array([float(e) for e in exact])
        return pts[keep], rates[keep], [e for e, k in zip(exact, keep) if k], mass

    pts = _ball(d, radius)
    r = np.max(np.abs(pts), axis=1)
    off = r > 0
    rates = np.zeros(len(pts))
    if spec.type == "geometric":
        rho = float(spec.params["rho"])
        if not 0 < rho < 1:
            raise KernelError("geometric kernel needs 0 < rho < 1")
        rates[off] = float(mass) * rho ** r[off] / _geometric_normaliser(d, rho)
    else:
        gamma = float(spec.params["gamma"])
        if gamma <= d:
            raise KernelError(f"power-law kernel needs exponent > d = {d}")
        rates[off] = float(mass) * r[off].astype(float) ** (-gamma) / _power_normaliser(d, gamma)
    rates[~off] = 0.5
    return pts, rates, [None] * len(pts), mass


@dataclass(frozen=True)
class MigrationKernel:
    """Rates a(0, v) for torus displacements v; a(i, j) = a(0, j - i)."""

    geometry: Geometry
    offsets: tuple[tuple[int, ...], ...]
    rates: tuple[float, ...]
    exact: tuple[Fraction | None, ...]
    mass_deficit: float = 0.0
    truncation_radius: int = 0
    spec: KernelSpec | None = None

    @cached_property
    def offsets_arr(self) -> np.ndarray:
        return np.array(self.offsets, dtype=np.int64).reshape(-1, self.geometry.d)

    @cached_property
    def rates_arr(self) -> np.ndarray:
        return np.array(self.rates)

    @property
    def c(self) -> float:
        return float(np.sum(self.rates_arr))

    @property
    def c_exact(self) -> Fraction | None:
        if any(e is None for e in self.exact):
            return None
        return sum(self.exact, Fraction(0))

    @cached_property
    def targets(self) -> np.ndarray:
        """``targets[i, k]`` is the site reached from i by offset k."""
        g = self.geometry
        t = g.indices(g.coords[:, None, :] + self.offsets_arr[None, :, :])
        t.flags.writeable = False
        return t

    @cached_property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.rates_arr)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense a(i, j) over all site pairs."""
        S = self.geometry.n_sites
        A = np.zeros((S, S))
        for k, rate in enumerate(self.rates):
            A[np.arange(S), self.targets[:, k]] += rate
        return A

    def rate(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def pick(self, u: np.ndarray | float):
        """Offset index for uniforms ``u`` in [0, c)."""
        k = np.searchsorted(self.cumulative, u, side="right")
        return np.minimum(k, len(self.rates) - 1)


def _irreducible(geometry: Geometry, offsets: np.ndarray) -> bool:
    S = geometry.n_sites
    moves = [o for o in offsets if np.any(o % geometry.L)]
    seen = np.zeros(S, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for o in moves:
            j = geometry.index(geometry.coords[i] + o)
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def build_kernel(spec: KernelSpec | dict, geometry: Geometry) -> MigrationKernel:
    """Wrap a lattice kernel onto the torus.

    Displacements congruent mod L are summed within the truncation radius
    (default 8L). Nonzero displacements that wrap onto 0 are dropped so the
    centre rate stays exactly 1/2; both losses are logged as a mass deficit.
    """
    if isinstance(spec, dict):
        spec = KernelSpec.from_dict(spec)
    d, L = geometry.d, geometry.L
    radius = spec.truncation_radius if spec.truncation_radius is not None else 8 * L
    if radius < 1:
        raise KernelError("truncation radius must be >= 1")
    pts, rates, exact, mass = lattice_kernel(spec, d, radius)

    acc: dict[tuple[int, ...], list] = {}
    kept = Fraction(0) if all(e is not None for e in exact) else 0.0
    for w, rate, ex in zip(pts, rates, exact):
        v = tuple(int(x) for x in np.asarray(w) % L)
        is_centre = not np.any(w)
        if not is_centre and not any(v):
            continue
        if rate <= 0:
            continue
        slot = acc.setdefault(v, [0.0, Fraction(0)])
        slot[0] += float(rate)
        slot[1] = None if (slot[1] is None or ex is None) else slot[1] + ex
        if not is_centre:
            kept += ex if isinstance(kept, Fraction) else float(rate)
    deficit = float(mass) - float(kept)
    if deficit > 1e-15:
        log.info("kernel %s on L=%d: dropped off-centre mass %.3e", spec.type, L, deficit)

    zero = (0,) * d
    keys = sorted(acc, key=lambda v: (v != zero, geometry.index(v)))
    offsets = tuple(keys)
    rate_vals = tuple(acc[k][0] for k in keys)
    exact_vals = tuple(acc[k][1] for k in keys)
    if exact_vals[0] is not None and exact_vals[0] != HALF or rate_vals[0] != 0.5:
        raise KernelError("center rate must be 1/2")
    if not _irreducible(geometry, np.array(offsets, dtype=np.int64).reshape(-1, d)):
        raise KernelError("kernel not irreducible")
    return MigrationKernel(geometry, offsets, rate_vals, exact_vals, max(deficit, 0.0), radius, spec)
