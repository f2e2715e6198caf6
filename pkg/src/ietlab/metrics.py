"""Empirical one-dimensional laws and exact distances between them.

Distributions are plain sorted sample vectors with cached moments.  Both
distances work directly on the step CDFs: the transport distance as an
exact integral over the merged grid, the Prokhorov distance by bisecting
the envelope inequality, which for step functions only needs checking at
sample points and their shifted images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, EmptySample

__all__ = [
    "EmpiricalDistribution",
    "empirical",
    "standardize",
    "d_kr",
    "d_lp",
]


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted samples with cached mean and population variance."""

    samples: np.ndarray
    mean: float
    variance: float

    @property
    def size(self) -> int:
        return int(self.samples.size)

    def cdf(self, x) -> np.ndarray:
        """Right-continuous CDF at x (scalar or array)."""
        return np.searchsorted(self.samples, x, side="right") / self.size

    def cdf_left(self, x) -> np.ndarray:
        """Left limit of the CDF at x."""
        return np.searchsorted(self.samples, x, side="left") / self.size

    def shift(self, eps: float) -> "EmpiricalDistribution":
        return empirical(self.samples + eps)

    def scale(self, factor: float) -> "EmpiricalDistribution":
        return empirical(self.samples * factor)

    def to_text(self) -> str:
        return "\n".join(repr(float(s)) for s in self.samples) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EmpiricalDistribution":
        vals = [float(line) for line in text.split() if line.strip()]
        return empirical(vals)

    def __repr__(self):
        return (f"EmpiricalDistribution(n={self.size}, mean={self.mean:.6g}, "
                f"var={self.variance:.6g})")


def empirical(samples) -> EmpiricalDistribution:
    """Sorted empirical law of the given samples (population variance)."""
    arr = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if arr.size == 0:
        raise EmptySample("need at least one sample")
    arr.flags.writeable = False
    m = float(arr.mean())
    v = float(((arr - m) ** 2).mean())
    return EmpiricalDistribution(samples=arr, mean=m, variance=v)


def standardize(P: EmpiricalDistribution) -> EmpiricalDistribution:
    """Center and rescale to mean 0, variance 1."""
    if P.variance <= 1e-24:
        raise DegenerateVariance(
            f"variance {P.variance:.3e} too small to standardize"
        )
    return empirical((P.samples - P.mean) / np.sqrt(P.variance))


def d_kr(P: EmpiricalDistribution, Q: EmpiricalDistribution) -> float:
    """Transport distance: the area between the two step CDFs."""
    grid = np.concatenate([P.samples, Q.samples])
    grid.sort(kind="mergesort")
    fp = P.cdf(grid[:-1])
    fq = Q.cdf(grid[:-1])
    return float(np.abs(fp - fq) @ np.diff(grid))


def _envelope_ok(P, Q, delta):
    # worst violations of F_P(x-d)-d <= F_Q(x) <= F_P(x+d)+d can only sit
    # right after a jump of one CDF or right before a jump of the other
    p = P.samples
    q = Q.samples
    if np.max(P.cdf(p) - Q.cdf(p + delta)) > delta:
        return False
    if np.max(P.cdf_left(q - delta) - Q.cdf_left(q)) > delta:
        return False
    if np.max(Q.cdf(q) - P.cdf(q + delta)) > delta:
        return False
    if np.max(Q.cdf_left(p - delta) - P.cdf_left(p)) > delta:
        return False
    return True


def d_lp(P: EmpiricalDistribution, Q: EmpiricalDistribution,
         tol: float = 1e-9) -> float:
    """Prokhorov distance by bisection on the envelope half-width.

    Always in [0, 1]; the returned value satisfies the envelope and is
    within tol of the smallest one that does.
    """
    if tol <= 0:
        raise ValueError(f"need tol > 0, got {tol}")
    if _envelope_ok(P, Q, 0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _envelope_ok(P, Q, mid):
            hi = mid
        else:
            lo = mid
    return hi
