"""Interval exchange transformations on the half-open unit interval.

An exchange is given by d subinterval lengths and a permutation telling in
which order the subintervals are reassembled.  All breakpoints belong to the
piece on their right: intervals are [left, left + length).  Lengths are
normalized to total length 1 at construction.

Permutations are written 1-based (a permutation of {1..d}) in constructors
and serialized form; interval indices returned by `Iet.index` are 0-based
like everything else in Python.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IncompatiblePartition,
    NonPositiveLength,
    OutOfDomain,
    ReduciblePermutation,
)

__all__ = [
    "Iet",
    "PiecewiseFunction",
    "make_iet",
    "birkhoff_sum",
    "mean_value",
    "sample_points",
]


def _check_perm(perm):
    """Validate a 1-based permutation; return it as a 0-based int array."""
    p = np.asarray(perm, dtype=np.int64)
    d = p.size
    if d < 2 or sorted(p.tolist()) != list(range(1, d + 1)):
        raise ReduciblePermutation(
            f"need a permutation of 1..d with d >= 2, got {list(perm)}"
        )
    # irreducible: no proper prefix 1..k mapped onto itself
    running = np.maximum.accumulate(p[:-1])
    if np.any(running == np.arange(1, d)):
        raise ReduciblePermutation(
            f"{list(perm)} maps a proper prefix 1..k onto itself"
        )
    return p - 1


class Iet:
    """A length-normalized interval exchange transformation.

    Instances are immutable after construction; every derived array is
    precomputed and marked read-only, so sharing one Iet across threads is
    safe.
    """

    __slots__ = ("lengths", "perm0", "lefts", "breaks", "offsets",
                 "image_lefts", "inv0")

    def __init__(self, lengths, perm):
        lam = np.asarray(lengths, dtype=np.float64)
        if lam.ndim != 1 or lam.size < 2:
            raise NonPositiveLength("need at least two lengths")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
            raise NonPositiveLength(f"lengths must be positive, got {lam}")
        perm0 = _check_perm(perm)
        if perm0.size != lam.size:
            raise DimensionMismatch(
                f"{lam.size} lengths but a permutation of {perm0.size} symbols"
            )
        lam = lam / lam.sum()

        d = lam.size
        lefts = np.concatenate(([0.0], np.cumsum(lam)[:-1]))
        inv0 = np.empty(d, dtype=np.int64)
        inv0[perm0] = np.arange(d)
        # image interval k (range order) has the length of source inv0[k]
        image_widths = lam[inv0]
        image_lefts_ordered = np.concatenate(
            ([0.0], np.cumsum(image_widths)[:-1])
        )
        image_lefts = image_lefts_ordered[perm0]  # image start per source
        offsets = image_lefts - lefts

        self.lengths = lam
        self.perm0 = perm0
        self.lefts = lefts
        self.breaks = lefts[1:].copy()  # interior breakpoints, size d-1
        self.offsets = offsets
        self.image_lefts = image_lefts_ordered
        self.inv0 = inv0
        for a in (self.lengths, self.perm0, self.lefts, self.breaks,
                  self.offsets, self.image_lefts, self.inv0):
            a.flags.writeable = False

    @property
    def d(self) -> int:
        return self.lengths.size

    @property
    def perm(self) -> tuple:
        """The permutation, 1-based, as used in serialized form."""
        return tuple(int(p) + 1 for p in self.perm0)

    def index(self, x):
        """0-based continuity-interval index of x; breakpoints go right."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 0.0) or np.any(x >= 1.0):
            raise OutOfDomain(f"point outside [0, 1): {x}")
        idx = np.searchsorted(self.breaks, x, side="right")
        return idx if idx.ndim else int(idx)

    def apply(self, x):
        """Forward image T(x); accepts scalars or arrays."""
        idx = self.index(x)
        y = np.asarray(x, dtype=np.float64) + self.offsets[idx]
        # guard the half-open range against rounding at the far edge
        y = np.where(y >= 1.0, np.nextafter(1.0, 0.0), np.maximum(y, 0.0))
        return y if y.ndim else float(y)

    def apply_inverse(self, x):
        """Preimage T^{-1}(x); accepts scalars or arrays."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 0.0) or np.any(x >= 1.0):
            raise OutOfDomain(f"point outside [0, 1): {x}")
        k = np.searchsorted(self.image_lefts[1:], x, side="right")
        src = self.inv0[k]
        y = x - self.offsets[src]
        y = np.where(y >= 1.0, np.nextafter(1.0, 0.0), np.maximum(y, 0.0))
        return y if y.ndim else float(y)

    def __call__(self, x):
        return self.apply(x)

    def inverse(self) -> "Iet":
        """The inverse exchange: image intervals in range order, inverse
        permutation."""
        return Iet(self.lengths[self.inv0], self.inv0 + 1)

    def to_dict(self) -> dict:
        return {"lengths": self.lengths.tolist(), "perm": list(self.perm)}

    @classmethod
    def from_dict(cls, data: dict) -> "Iet":
        return cls(data["lengths"], data["perm"])

    def __repr__(self):
        lens = ", ".join(f"{v:.6g}" for v in self.lengths)
        return f"Iet(({lens}), perm={self.perm})"


def make_iet(lengths, perm) -> Iet:
    """Build a normalized interval exchange from raw lengths and a 1-based
    permutation.  Raises NonPositiveLength / ReduciblePermutation on bad
    input."""
    return Iet(lengths, perm)


@dataclass(frozen=True)
class PiecewiseFunction:
    """An observable that is affine on each continuity interval:
    f(x) = slope[i] * x + intercept[i] on interval i, in absolute
    coordinates on [0, 1)."""

    slope: np.ndarray
    intercept: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.slope, dtype=np.float64)
        b = np.asarray(self.intercept, dtype=np.float64)
        if a.ndim != 1 or a.shape != b.shape:
            raise DimensionMismatch("slope and intercept must match in length")
        a = a.copy()
        b = b.copy()
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "slope", a)
        object.__setattr__(self, "intercept", b)

    @property
    def d(self) -> int:
        return self.slope.size

    def _check(self, T: Iet):
        if self.d != T.d:
            raise IncompatiblePartition(
                f"function has {self.d} pieces, exchange has {T.d}"
            )

    def value(self, T: Iet, x):
        self._check(T)
        idx = T.index(x)
        v = self.slope[idx] * np.asarray(x, dtype=np.float64) + self.intercept[idx]
        return v if v.ndim else float(v)

    def mean(self, T: Iet) -> float:
        """Integral over [0, 1); exact closed form per affine piece."""
        self._check(T)
        mids = T.lefts + 0.5 * T.lengths
        return float(np.sum((self.slope * mids + self.intercept) * T.lengths))

    def sup_abs(self, T: Iet) -> float:
        """sup |f|; attained at a piece endpoint since pieces are affine."""
        self._check(T)
        left_vals = self.slope * T.lefts + self.intercept
        right_vals = self.slope * (T.lefts + T.lengths) + self.intercept
        return float(np.max(np.maximum(np.abs(left_vals), np.abs(right_vals))))

    def lipschitz(self) -> float:
        """Uniform Lipschitz constant within pieces: max |slope|."""
        return float(np.max(np.abs(self.slope)))

    def to_dict(self) -> dict:
        return {"slope": self.slope.tolist(), "intercept": self.intercept.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseFunction":
        return cls(np.asarray(data["slope"]), np.asarray(data["intercept"]))


def mean_value(f: PiecewiseFunction, T: Iet) -> float:
    """Integral of f over the unit interval."""
    return f.mean(T)


def birkhoff_sum(T: Iet, f: PiecewiseFunction, x: float, n: int,
                 return_trace: bool = False):
    """Orbit sum f(x) + f(Tx) + ... + f(T^{n-1}x), compensated summation.

    With return_trace=True also returns the visited interval indices as an
    int array of length n.
    """
    f._check(T)
    if n < 0:
        raise ValueError(f"orbit length must be >= 0, got {n}")
    x = float(x)
    if not (0.0 <= x < 1.0):
        raise OutOfDomain(f"point outside [0, 1): {x}")
    # plain lists + bisect keep this pure-Python loop fast enough for
    # n ~ 1e4 reference checks; per-step numpy calls cost 10x more
    breaks = T.breaks.tolist()
    off = T.offsets.tolist()
    a = f.slope.tolist()
    b = f.intercept.tolist()
    top = math.nextafter(1.0, 0.0)
    locate = bisect.bisect_right
    trace = np.empty(n, dtype=np.int64) if return_trace else None
    s = 0.0
    c = 0.0  # Kahan compensation
    for k in range(n):
        i = locate(breaks, x)
        if return_trace:
            trace[k] = i
        term = a[i] * x + b[i] - c
        t = s + term
        c = (t - s) - term
        s = t
        x += off[i]
        if x >= 1.0:
            x = top
        elif x < 0.0:
            x = 0.0
    if return_trace:
        return s, trace
    return s


def sample_points(n: int, seed: int, strategy: str = "grid-jitter") -> np.ndarray:
    """Deterministic sample of n points in [0, 1).

    grid-jitter: point j uniform in [j/n, (j+1)/n); iid: independent
    uniforms.  Sample j depends only on (seed, j), never on how the work is
    later split across threads.
    """
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    u = rng.random(n)
    if strategy == "grid-jitter":
        pts = (np.arange(n) + u) / n
    elif strategy == "iid":
        pts = u
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    return np.minimum(pts, np.nextafter(1.0, 0.0))
