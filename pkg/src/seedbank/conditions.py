"""Numeric partial-sum diagnostics for the summability conditions on N_i and a(0, .).

These are heuristics on truncated sums, never proofs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .geometry import ProfileSpec
from .kernel import KernelSpec, lattice_kernel

DEFAULT_RADII = (1, 2, 4, 8, 16, 32, 64, 128)


@dataclass
class DualityConditionReport:
    mode: str
    delta: float
    gamma: float | None
    radii: list[int]
    kernel_sums: list[float]
    profile_values: list[float]
    kernel_verdict: str
    profile_verdict: str
    verdict: str
    exponent_condition: bool | None = None

    def to_dict(self):
        return asdict(self)


def saturation_verdict(partial_sums, rel_tol: float = 1e-6) -> str:
    """Classify a non-decreasing sequence of partial sums on a doubling grid."""
    s = np.asarray(partial_sums, dtype=float)
    if len(s) < 3:
        return "inconclusive"
    inc = np.diff(s)
    if inc[-1] <= rel_tol * max(abs(s[-1]), 1e-300):
        return "converging"
    # on a doubling grid a tail decaying at least like |i|^-3 shrinks 4x per step
    if inc[-2] > 0 and inc[-1] <= 0.25 * inc[-2] and inc[-2] <= inc[-3]:
        return "converging"
    if inc[-1] >= inc[-2] > 0:
        return "diverging"
    return "inconclusive"


def _log(values) -> np.ndarray:
    return np.array([math.log(int(v)) for v in values])


def _profile_N(profile, points, norms, period=None) -> np.ndarray:
    if isinstance(profile, ProfileSpec):
        N, _ = profile.pattern(points, norms, periodic_L=period)
        return N
    if isinstance(profile, dict):
        return _profile_N(ProfileSpec.from_dict(profile), points, norms, period)
    return np.asarray(profile(points, norms))


def check_duality_condition(
    profile: ProfileSpec | dict | Callable,
    kernel: KernelSpec | dict,
    d: int,
    mode: str = "a",
    delta: float = 0.1,
    gamma: float | None = None,
    radii=DEFAULT_RADII,
    period: int | None = None,
) -> DualityConditionReport:
    """Partial sums of the kernel-tail and profile-growth conditions on Z^d.

    Mode ``a``: sum_{|i|<=R} e^{delta |i|} a(0,i) together with
    max_{|i|=R} log(N_i)/|i|, which should decay to 0.
    Mode ``b``: sum_{|i|<=R} |i|^gamma a(0,i) together with
    sup_{0<|i|<=R} N_i/|i|^delta, which should stay bounded; also reports
    whether gamma > d + delta. ``period`` extends an explicit profile
    periodically from a torus of that side.
    """
    if mode not in ("a", "b"):
        raise ValueError("mode must be 'a' or 'b'")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if mode == "b" and (gamma is None or not gamma > 0):
        raise ValueError("mode b needs a positive gamma")
    radii = sorted(int(r) for r in radii)
    if not radii or radii[0] < 1:
        raise ValueError("radii must be >= 1")
    if isinstance(kernel, dict):
        kernel = KernelSpec.from_dict(kernel)

    R = radii[-1]
    pts, rates, _, _ = lattice_kernel(kernel, d, R)
    knorm = np.max(np.abs(pts), axis=1)
    weight = np.exp(delta * knorm) if mode == "a" else knorm.astype(float) ** gamma
    kernel_sums = [float(np.sum((weight * rates)[knorm <= r])) for r in radii]

    side = np.arange(-R, R + 1)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([side] * d), indexing="ij")], axis=1)
    norms = np.max(np.abs(grid), axis=1)
    N = _profile_N(profile, grid, norms, period)
    if mode == "a":
        logN = _log(N)
        profile_values = [float(np.max(logN[norms == r]) / r) for r in radii]
    else:
        ratio = np.array([int(n) / float(r) ** delta if r > 0 else 0.0 for n, r in zip(N, norms)])
        profile_values = [float(np.max(ratio[(norms > 0) & (norms <= r)])) for r in radii]

    kernel_verdict = saturation_verdict(kernel_sums)
    profile_verdict = _profile_verdict(mode, radii, profile_values)
    verdicts = (kernel_verdict, profile_verdict)
    if "diverging" in verdicts:
        verdict = "diverging"
    elif all(v == "converging" for v in verdicts):
        verdict = "converging"
    else:
        verdict = "inconclusive"
    exponent = None
    if mode == "b":
        exponent = bool(gamma > d + delta)
        if not exponent and verdict == "converging":
            verdict = "inconclusive"
    return DualityConditionReport(
        mode, delta, gamma, radii, kernel_sums, profile_values, kernel_verdict, profile_verdict, verdict, exponent
    )


def _profile_verdict(mode: str, radii, values) -> str:
    if len(values) < 2:
        return "inconclusive"
    last, prev = values[-1], values[-2]
    if mode == "a":
        # log N_i / |i| must tend to 0
        if last == 0.0:
            return "converging"
        ratio = last / prev if prev > 0 else math.inf
        if ratio <= 0.75:
            return "converging"
        if ratio >= 0.95:
            return "diverging"
        return "inconclusive"
    # sup N_i / |i|^delta must stay finite
    ratio = last / prev if prev > 0 else 1.0
    if ratio <= 1.01:
        return "converging"
    if ratio >= 1.5:
        return "diverging"
    return "inconclusive"
