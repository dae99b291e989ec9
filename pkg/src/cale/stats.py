"""Correlation and significance machinery shared by the evaluation suites.

p-values use the Fisher-transform normal approximation throughout; adequate for
significance flags at conventional alpha levels on the sample sizes involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    n: int
    p_value: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        return {"coefficient": self.coefficient, "n": self.n, "p_value": self.p_value}


def _normal_sf_two_sided(z: float) -> float:
    """Two-sided tail probability of the standard normal."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def _fisher_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    return _normal_sf_two_sided(math.atanh(r) * math.sqrt(n - 3))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Product-moment correlation with a Fisher-transform p-value."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or xa.shape != ya.shape:
        raise ValueError(f"pearson requires equal-length 1-D sequences, got {xa.shape} and {ya.shape}")
    n = xa.size
    if n < 3:
        raise ValueError(f"pearson requires at least 3 samples, got {n}")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(np.dot(dx, dx))
    sy = float(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson is undefined for a constant sequence")
    r = float(np.dot(dx, dy)) / math.sqrt(sx * sy)
    r = min(1.0, max(-1.0, r))
    return CorrelationResult(coefficient=r, n=n, p_value=_fisher_p(r, n))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values receive the average of their rank positions."""
    xa = np.asarray(x, dtype=np.float64)
    order = np.argsort(xa, kind="stable")
    ranks = np.empty(xa.size, dtype=np.float64)
    sorted_x = xa[order]
    i = 0
    while i < xa.size:
        j = i
        while j + 1 < xa.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson correlation of average-ranked data."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or xa.shape != ya.shape:
        raise ValueError(f"spearman requires equal-length 1-D sequences, got {xa.shape} and {ya.shape}")
    if xa.size < 3:
        raise ValueError(f"spearman requires at least 3 samples, got {xa.size}")
    return pearson(average_ranks(xa), average_ranks(ya))


def fisher_z(r: float) -> float:
    """atanh(r); undefined at |r| >= 1."""
    if abs(r) >= 1.0:
        raise ValueError(f"fisher_z is undefined for |r| >= 1, got {r}")
    return math.atanh(r)


def steiger_z(r_jk: float, r_jh: float, r_kh: float, n: int) -> tuple[float, float]:
    """Compare two dependent correlations r_jk and r_jh that share variable j.

    Uses the shared-variable Z1* form with the pooled coefficient
    rbar = (r_jk + r_jh) / 2:

        s = [r_kh (1 - 2 rbar^2) - rbar^2 (1 - 2 rbar^2 - r_kh^2) / 2] / (1 - rbar^2)^2
        Z = (atanh(r_jk) - atanh(r_jh)) * sqrt((n - 3) / (2 - 2 s))

    Returns (Z, two-sided p from the standard normal).
    """
    if n < 4:
        raise ValueError(f"steiger_z requires n >= 4, got {n}")
    for name, r in (("r_jk", r_jk), ("r_jh", r_jh), ("r_kh", r_kh)):
        if abs(r) >= 1.0:
            raise ValueError(f"steiger_z requires |{name}| < 1, got {r}")
    if r_jk == r_jh:
        # Z = 0 regardless of the covariance factor.
        return 0.0, 1.0
    z1 = math.atanh(r_jk)
    z2 = math.atanh(r_jh)
    rbar = (r_jk + r_jh) / 2.0
    det = (1.0 - rbar * rbar) ** 2
    s = (r_kh * (1.0 - 2.0 * rbar * rbar) - 0.5 * rbar * rbar * (1.0 - 2.0 * rbar * rbar - r_kh * r_kh)) / det
    if 2.0 - 2.0 * s <= 0.0:
        raise ValueError(f"degenerate covariance term s={s}")
    z = (z1 - z2) * math.sqrt((n - 3) / (2.0 - 2.0 * s))
    return z, _normal_sf_two_sided(z)
