from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

Z_THRESHOLD = 4.0


@dataclass(frozen=True)
class Estimate:
    mean: float
    var: float
    n: int

    @property
    def se(self) -> float:
        return math.sqrt(self.var / self.n) if self.n > 0 else math.inf

    @classmethod
    def of(cls, samples) -> Estimate:
        x = np.asarray(samples, dtype=float)
        n = x.size
        var = float(x.var(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), var, n)


def z_score(a: Estimate, b: Estimate) -> tuple[float, float]:
    """Two-sample z statistic ``(a - b) / sigma`` and the pooled sigma."""
    sigma = math.sqrt(a.var / a.n + b.var / b.n)
    diff = a.mean - b.mean
    if sigma == 0.0:
        return (0.0 if diff == 0.0 else math.copysign(math.inf, diff)), 0.0
    return diff / sigma, sigma


def z_against(a: Estimate, value: float) -> float:
    se = a.se
    diff = a.mean - value
    if se == 0.0:
        return 0.0 if abs(diff) < 1e-15 else math.copysign(math.inf, diff)
    return diff / se


def wilson_interval(successes, n, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion (vectorised)."""
    successes = np.asarray(successes, dtype=float)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.where(successes == 0, 0.0, np.clip(centre - half, 0, 1))
    hi = np.where(successes == n, 1.0, np.clip(centre + half, 0, 1))
    return lo, hi


def two_sided_p(z: float) -> float:
    return float(2 * norm.sf(abs(z)))
