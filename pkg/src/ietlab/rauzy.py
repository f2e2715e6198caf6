"""Renormalization of interval exchanges and the associated matrix cocycle.

One step compares the rightmost subinterval of the domain with the
rightmost subinterval of the range and cuts the shorter one off the longer,
then rescales back to unit total length.  The accelerated step groups the
maximal run of same-type cuts.  Visit-count matrices are accumulated in
exact integer arithmetic (unimodularity is exactly testable) and only
converted to floating point inside the QR updates that estimate the
deviation exponents.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockOverflow,
    DimensionMismatch,
    KeaneDegenerate,
    NonZeroMean,
    NoSecondExponent,
)
from .iet import Iet, PiecewiseFunction, sample_points
from .towers import build_tower, walk_steps

__all__ = [
    "RauzyStep",
    "ZorichBlock",
    "OseledetsFrame",
    "DegeneracyReport",
    "rauzy_step",
    "zorich_block",
    "cocycle_orbit",
    "second_direction",
    "cocycle_function",
    "degeneracy_index",
]

_BLOCK_CAP = 1_000_000  # elementary cuts per accelerated block
_INT64_CAP = 1 << 62


@dataclass(frozen=True)
class RauzyStep:
    """One elementary renormalization step."""

    move: str               # "top" | "bottom"
    matrix: np.ndarray      # d x d visit counts, lengths_old = matrix @ lengths_new_prenorm
    successor: Iet
    log_scale: float        # log of the length contraction absorbed by rescaling


@dataclass(frozen=True)
class ZorichBlock:
    """A maximal run of same-type elementary steps, matrices composed."""

    move: str
    matrix: np.ndarray
    successor: Iet
    log_scale: float
    steps: int


@dataclass(frozen=True)
class OseledetsFrame:
    """QR-accumulated exponent data after a number of accelerated blocks.

    theta_hat is log_diagonal / total_log_scale sorted non-increasing, so
    the top entry sits at 1 by construction of the renormalization clock.
    """

    frame: np.ndarray
    log_diagonal: np.ndarray
    steps: int
    total_log_scale: float
    theta_hat: np.ndarray


@dataclass(frozen=True)
class DegeneracyReport:
    """Outcome of the orbit-growth classification of an observable."""

    i_hat: int | None       # 1-based index into theta_hat, None if degenerate
    beta: float             # fitted growth exponent of max |orbit sum|
    theta_hat: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.i_hat is None


def _winner(lengths, perm):
    """Return (move, jb) for the next cut; KeaneDegenerate on a tie."""
    d = len(lengths)
    jb = perm.index(d - 1)
    top = lengths[-1]
    bot = lengths[jb]
    if abs(top - bot) <= 1e-13 * (top + bot):
        raise KeaneDegenerate(f"length tie {top} vs {bot}")
    return ("top" if top > bot else "bottom"), jb


def _cut(lengths, perm, move, jb):
    """Apply one cut in place-ish; returns (lengths, perm) as new lists."""
    d = len(lengths)
    if move == "top":
        out = list(lengths)
        out[-1] = lengths[-1] - lengths[jb]
        pd = perm[-1]
        np_ = [p if p <= pd else p + 1 for p in perm]
        np_[jb] = pd + 1
        return out, np_
    out = lengths[:jb] + [lengths[jb] - lengths[-1], lengths[-1]] \
        + lengths[jb + 1:d - 1]
    np_ = perm[:jb + 1] + [perm[-1]] + perm[jb + 1:d - 1]
    return out, np_


def _compose(cols, move, jb):
    """Multiply the running visit-count matrix (list of integer columns) by
    the elementary matrix of this cut, on the right."""
    d = len(cols)
    if move == "top":
        cols[jb] = [a + b for a, b in zip(cols[jb], cols[d - 1])]
        return cols
    merged = [a + b for a, b in zip(cols[jb], cols[d - 1])]
    return cols[:jb + 1] + [merged] + cols[jb + 1:d - 1]


def _cols_to_matrix(cols):
    d = len(cols)
    flat = [cols[j][i] for i in range(d) for j in range(d)]
    if max(flat) >= _INT64_CAP:
        raise BlockOverflow("visit counts exceed 62 bits")
    return np.array(flat, dtype=np.int64).reshape(d, d)


def int_det(matrix) -> int:
    """Exact integer determinant (Bareiss elimination on Python ints)."""
    a = [[int(v) for v in row] for row in np.asarray(matrix)]
    d = len(a)
    sign = 1
    prev = 1
    for k in range(d - 1):
        if a[k][k] == 0:
            for r in range(k + 1, d):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, d):
            for j in range(k + 1, d):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[d - 1][d - 1]


def rauzy_step(T: Iet) -> RauzyStep:
    """One elementary renormalization step with its visit-count matrix."""
    lengths = [float(v) for v in T.lengths]
    perm = [int(p) for p in T.perm0]
    move, jb = _winner(lengths, perm)
    d = T.d
    cols = [[1 if i == j else 0 for i in range(d)] for j in range(d)]
    cols = _compose(cols, move, jb)
    lengths, perm = _cut(lengths, perm, move, jb)
    scale = sum(lengths)
    successor = Iet(lengths, [p + 1 for p in perm])
    return RauzyStep(move=move, matrix=_cols_to_matrix(cols),
                     successor=successor, log_scale=-math.log(scale))


def zorich_block(T: Iet) -> ZorichBlock:
    """Maximal run of same-type steps, matrices composed exactly."""
    lengths = [float(v) for v in T.lengths]
    perm = [int(p) for p in T.perm0]
    d = T.d
    move, jb = _winner(lengths, perm)
    cols = [[1 if i == j else 0 for i in range(d)] for j in range(d)]
    steps = 0
    while True:
        cols = _compose(cols, move, jb)
        lengths, perm = _cut(lengths, perm, move, jb)
        steps += 1
        if steps > _BLOCK_CAP:
            raise BlockOverflow(f"block exceeded {_BLOCK_CAP} elementary steps")
        nxt, jb_nxt = _winner(lengths, perm)
        if nxt != move:
            break
        jb = jb_nxt
    scale = sum(lengths)
    successor = Iet(lengths, [p + 1 for p in perm])
    return ZorichBlock(move=move, matrix=_cols_to_matrix(cols),
                       successor=successor, log_scale=-math.log(scale),
                       steps=steps)


def _seed_to_frame(seed_frame, d):
    if seed_frame is None:
        return np.eye(d)
    if isinstance(seed_frame, (int, np.integer)):
        rng = np.random.default_rng(int(seed_frame))
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        return q
    q, _ = np.linalg.qr(np.asarray(seed_frame, dtype=np.float64))
    if q.shape != (d, d):
        raise DimensionMismatch(f"seed frame must be {d}x{d}")
    return q


def _qr_positive(Z):
    q, r = np.linalg.qr(Z)
    s = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * s, r * s[:, None]


def _stream(T, k_blocks=None, min_log_scale=None, min_log_norm=None,
            seed_frame=None, store=False):
    """Run accelerated blocks, pushing an orthonormal frame through the
    transposed visit-count matrices, until every given target is met."""
    d = T.d
    Q = _seed_to_frame(seed_frame, d)
    logdiag = np.zeros(d)
    total = 0.0
    blocks = 0
    cur = T
    stored = [] if store else None
    while True:
        done = True
        if k_blocks is not None and blocks < k_blocks:
            done = False
        if min_log_scale is not None and total < min_log_scale:
            done = False
        if min_log_norm is not None and logdiag[0] < min_log_norm:
            done = False
        if done and blocks > 0:
            break
        blk = zorich_block(cur)
        M = blk.matrix.astype(np.float64)
        if store:
            stored.append(M)
        Q, R = _qr_positive(M.T @ Q)
        logdiag += np.log(np.diag(R))
        total += blk.log_scale
        cur = blk.successor
        blocks += 1
    theta = np.sort(logdiag / total)[::-1]
    frame = OseledetsFrame(frame=Q, log_diagonal=logdiag, steps=blocks,
                           total_log_scale=total, theta_hat=theta)
    if d >= 3 and theta[1] - theta[2] < 0.05:
        warnings.warn(
            "estimated gap between second and third exponents is below "
            "0.05; the second direction is unreliable here",
            RuntimeWarning, stacklevel=3)
    return frame, stored


def cocycle_orbit(T: Iet, k: int, seed_frame=None) -> OseledetsFrame:
    """Estimate deviation exponents over k accelerated blocks.

    After each block the transported frame is multiplied by the block
    matrix (transposed: it acts on observable vectors) and re-orthonormalized
    by QR; log |diag R| accumulates.  Exponents are reported per unit of the
    length-renormalization clock, so the top one sits at 1.
    """
    if k < 1:
        raise ValueError(f"need at least one block, got {k}")
    frame, _ = _stream(T, k_blocks=k, seed_frame=seed_frame)
    return frame


def _u_flag(matrices):
    """Orthonormal flag of the leading column spaces of the ordered product
    matrices[0] @ matrices[1] @ ..., without ever forming the product:
    one QR sweep from the far end keeps every scale in range."""
    d = matrices[0].shape[0]
    W = np.eye(d)
    for M in reversed(matrices):
        W, _ = _qr_positive(M @ W)
    return W


def second_direction(T: Iet, k: int) -> np.ndarray:
    """Second expanding direction of the accumulated visit-count product.

    Needs enough blocks for the renormalization clock to pass 30; raises
    NoSecondExponent when the estimated second exponent is below 0.05
    (always for 2-interval exchanges).  The returned unit vector has its
    frequency-vector component removed and its first sizable coordinate
    made positive.
    """
    v2, _ = _second_direction_impl(T, k)
    return v2


def _second_direction_impl(T, k, min_log_norm=None, min_log_scale=30.0):
    frame, mats = _stream(T, k_blocks=k, min_log_scale=min_log_scale,
                          min_log_norm=min_log_norm, store=True)
    if frame.theta_hat[1] <= 0.05:
        raise NoSecondExponent(
            f"second exponent estimate {frame.theta_hat[1]:.3f} <= 0.05"
        )
    W = _u_flag(mats)
    v2 = W[:, 1].copy()
    lam_hat = T.lengths / np.linalg.norm(T.lengths)
    v2 -= (v2 @ lam_hat) * lam_hat
    nrm = np.linalg.norm(v2)
    if nrm < 1e-12:
        raise NoSecondExponent("second direction collapsed onto the "
                               "frequency vector")
    v2 /= nrm
    for c in v2:
        if abs(c) > 1e-9:
            if c < 0:
                v2 = -v2
            break
    v2.flags.writeable = False
    return v2, frame


def cocycle_function(v, T: Iet) -> PiecewiseFunction:
    """Piecewise-constant observable taking value v[i] on interval i."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (T.d,):
        raise DimensionMismatch(
            f"need one value per interval ({T.d}), got shape {v.shape}"
        )
    if abs(np.linalg.norm(v) - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    return PiecewiseFunction(np.zeros(T.d), v)


def degeneracy_index(T: Iet, f: PiecewiseFunction, nmax: int,
                     sample_size: int = 256) -> DegeneracyReport:
    """Classify which deviation exponent governs max_x |orbit sum of f|.

    f must be mean-free.  Fits the growth exponent beta of the sampled sup
    of |S_n f| over log-spaced n up to nmax and matches it against the
    positive exponent estimates; beta <= 0.05 is reported as degenerate
    (bounded sums, e.g. a coboundary).
    """
    f._check(T)
    if nmax < 10_000:
        raise ValueError(f"need nmax >= 10000 for a stable fit, got {nmax}")
    scale = 1.0 + f.sup_abs(T)
    if abs(f.mean(T)) > 1e-9 * scale:
        raise NonZeroMean(
            f"observable mean {f.mean(T):.3e} is not zero; subtract it first"
        )
    frame, _ = _stream(T, min_log_scale=math.log(nmax) + 10.0)
    xs = sample_points(sample_size, seed=20210)
    ns = np.unique(np.geomspace(100, nmax, 8).astype(np.int64))
    tower = build_tower(T, [(f.slope, f.intercept)], int(ns[-1]))
    sums, _ = walk_steps(tower, xs, ns)
    tops = np.abs(sums[:, :, 0]).max(axis=0)
    if np.all(tops < 1e-12 * scale):
        return DegeneracyReport(i_hat=None, beta=0.0,
                                theta_hat=frame.theta_hat)
    beta = float(np.polyfit(np.log(ns), np.log(np.maximum(tops, 1e-300)), 1)[0])
    if beta <= 0.05:
        return DegeneracyReport(i_hat=None, beta=beta,
                                theta_hat=frame.theta_hat)
    positive = frame.theta_hat[frame.theta_hat > 0.05]
    i_hat = int(np.argmin(np.abs(positive - beta))) + 1
    return DegeneracyReport(i_hat=i_hat, beta=beta, theta_hat=frame.theta_hat)
