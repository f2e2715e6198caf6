"""Fast orbit sums and roof-function transport via renormalization towers.

The induction that powers everything here: repeatedly cut the rightmost of
the two candidate subintervals (standard right induction, never
renormalized), producing a nested family of subintervals [0, L_k) sharing
the left endpoint.  For each level we keep

  * the first-return map's lengths/translations on its d subintervals,
  * H[k][j]   = number of base-map steps per level-k application (int64),
  * alpha/beta: the orbit sum of each tracked affine observable over those
    H[k][j] steps is exactly alpha*x + beta in absolute coordinates, because
    every branch of the base map is a translation.

A level is snapshotted only when max(H) has doubled since the last kept
level, so the kept ladder has O(log n) rungs even when the induction crawls
through a long run of same-type cuts.  Orbit segments are then evaluated by
a greedy walk over the ladder: applicability of a level at the current point
and budget is monotone in depth (a deeper level's first return starts with
the shallower one's), so the deepest usable rung is found by local
ascent/descent and each evaluation costs O(log n) jumps.

All kernels are compiled with numba when available; a pure-Python fallback
keeps results identical, only slower.  Parallel loops split by sample index
with no cross-thread reductions, so outputs are bit-identical for any
thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KeaneDegenerate, OutOfDomain

try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco

    prange = range

__all__ = ["Tower", "build_tower", "walk_steps", "walk_time", "HAVE_NUMBA"]

_STEP_CAP = 10_000_000  # elementary cuts before declaring the input degenerate
_H_CAP = 1 << 62


def _level_offsets(lengths, perm):
    """Translation of each branch for the exchange (lengths, perm), both
    plain lists, perm 0-based."""
    d = len(lengths)
    lefts = [0.0] * d
    acc = 0.0
    for i in range(d):
        lefts[i] = acc
        acc += lengths[i]
    order = sorted(range(d), key=lambda i: perm[i])
    img = [0.0] * d
    acc = 0.0
    for k in range(d):
        i = order[k]
        img[i] = acc
        acc += lengths[i]
    return [img[i] - lefts[i] for i in range(d)]


@dataclass
class Tower:
    """Snapshotted ladder of induction levels plus per-level observable data.

    alpha/beta have shape (n_obs, levels, d); the first observable is the
    one time-budget walks use as their cost."""

    ltot: np.ndarray      # (K,)   total length of level domain
    lefts: np.ndarray     # (K, d) absolute left endpoints
    widths: np.ndarray    # (K, d) interval lengths
    delta: np.ndarray     # (K, d) translations of the level map
    H: np.ndarray         # (K, d) base steps per level application
    alpha: np.ndarray     # (P, K, d)
    beta: np.ndarray      # (P, K, d)

    @property
    def levels(self) -> int:
        return self.ltot.size

    @property
    def n_obs(self) -> int:
        return self.alpha.shape[0]

    @property
    def depth(self) -> int:
        """Largest guaranteed single-jump step count."""
        return int(self.H[-1].min())


def build_tower(T, observables, n_max: int) -> Tower:
    """Run unrenormalized induction on T until every level-k step covers
    more than n_max base steps; track the given affine observables.

    observables: list of (slope, intercept) array pairs in absolute
    coordinates.  Raises KeaneDegenerate if a length tie (relative 1e-13)
    appears before the requested depth is reached.
    """
    d = T.d
    n_max = int(n_max)
    lengths = [float(v) for v in T.lengths]
    perm = [int(p) for p in T.perm0]
    H = [1] * d
    P = len(observables)
    alpha = [[float(v) for v in np.asarray(a, dtype=np.float64)]
             for a, _ in observables]
    beta = [[float(v) for v in np.asarray(b, dtype=np.float64)]
            for _, b in observables]
    for q in range(P):
        if len(alpha[q]) != d or len(beta[q]) != d:
            raise ValueError("observable data must have one entry per interval")

    snap_ltot, snap_lefts, snap_widths, snap_delta, snap_H = [], [], [], [], []
    snap_alpha = [[] for _ in range(P)]
    snap_beta = [[] for _ in range(P)]
    last_kept_mx = 0
    steps = 0

    while True:
        mx = max(H)
        finished = min(H) > n_max
        if not snap_ltot or finished or mx >= 2 * last_kept_mx:
            acc = 0.0
            lefts = []
            for v in lengths:
                lefts.append(acc)
                acc += v
            snap_ltot.append(acc)
            snap_lefts.append(list(lefts))
            snap_widths.append(list(lengths))
            snap_delta.append(_level_offsets(lengths, perm))
            snap_H.append(list(H))
            for q in range(P):
                snap_alpha[q].append(list(alpha[q]))
                snap_beta[q].append(list(beta[q]))
            last_kept_mx = mx
        if finished:
            break
        if steps >= _STEP_CAP:
            raise KeaneDegenerate(
                f"induction did not reach depth {n_max} within {_STEP_CAP} cuts"
            )

        jb = perm.index(d - 1)
        top = lengths[-1]
        bot = lengths[jb]
        if abs(top - bot) <= 1e-13 * (top + bot):
            raise KeaneDegenerate(
                f"length tie at cut {steps}: {top} vs {bot}"
            )
        if H[jb] + H[-1] > _H_CAP:
            raise KeaneDegenerate("return times overflow 62 bits")
        delta_now = _level_offsets(lengths, perm)
        if top > bot:
            # cut happens inside the last subinterval; indices keep their place
            for q in range(P):
                beta[q][jb] += beta[q][-1] + alpha[q][-1] * delta_now[jb]
                alpha[q][jb] += alpha[q][-1]
            H[jb] += H[-1]
            lengths[-1] = top - bot
            pd = perm[-1]
            perm = [p if p <= pd else p + 1 for p in perm]
            perm[jb] = pd + 1
        else:
            # the winner's subinterval splits; everything right of it shifts
            for q in range(P):
                a2 = alpha[q][jb] + alpha[q][-1]
                b2 = beta[q][jb] + beta[q][-1] + alpha[q][-1] * delta_now[jb]
                alpha[q] = alpha[q][:jb + 1] + [a2] + alpha[q][jb + 1:d - 1]
                beta[q] = beta[q][:jb + 1] + [b2] + beta[q][jb + 1:d - 1]
            H = H[:jb + 1] + [H[jb] + H[-1]] + H[jb + 1:d - 1]
            lengths = (lengths[:jb] + [bot - top, top] + lengths[jb + 1:d - 1])
            perm = perm[:jb + 1] + [perm[-1]] + perm[jb + 1:d - 1]
        steps += 1

    return Tower(
        ltot=np.asarray(snap_ltot, dtype=np.float64),
        lefts=np.asarray(snap_lefts, dtype=np.float64),
        widths=np.asarray(snap_widths, dtype=np.float64),
        delta=np.asarray(snap_delta, dtype=np.float64),
        H=np.asarray(snap_H, dtype=np.int64),
        alpha=np.asarray(snap_alpha, dtype=np.float64),
        beta=np.asarray(snap_beta, dtype=np.float64),
    )


@njit(cache=True)
def _piece(lefts, k, d, y):
    j = d - 1
    for jj in range(1, d):
        if y < lefts[k, jj]:
            j = jj - 1
            break
    return j


@njit(parallel=True, cache=True)
def _walk_steps_kernel(xs, ns, ltot, lefts, delta, H, alpha, beta, out, out_y):
    N = xs.shape[0]
    C = ns.shape[0]
    P = alpha.shape[0]
    K = ltot.shape[0]
    d = lefts.shape[1]
    for p in prange(N):
        y = xs[p]
        k = 0
        s = np.zeros(P)
        comp = np.zeros(P)
        done = np.int64(0)
        for ci in range(C):
            m = ns[ci] - done
            while m > 0:
                # descend until the level applies at (y, m); level 0 always does
                while True:
                    if y < ltot[k]:
                        j = _piece(lefts, k, d, y)
                        if H[k, j] <= m:
                            break
                    k -= 1
                # climb while the next level still applies
                while k + 1 < K and y < ltot[k + 1]:
                    j2 = _piece(lefts, k + 1, d, y)
                    if H[k + 1, j2] <= m:
                        k += 1
                        j = j2
                    else:
                        break
                for q in range(P):
                    term = alpha[q, k, j] * y + beta[q, k, j] - comp[q]
                    t = s[q] + term
                    comp[q] = (t - s[q]) - term
                    s[q] = t
                m -= H[k, j]
                y += delta[k, j]
            done = ns[ci]
            for q in range(P):
                out[p, ci, q] = s[q]
        out_y[p] = y


@njit(parallel=True, cache=True)
def _walk_time_kernel(xs, ts, ltot, lefts, delta, H, ca, cb, alpha, beta,
                      out_s, out_steps, out_rem, out_y):
    N = xs.shape[0]
    P = alpha.shape[0]
    K = ltot.shape[0]
    d = lefts.shape[1]
    for p in prange(N):
        y = xs[p]
        k = 0
        rem = ts[p]
        steps = np.int64(0)
        s = np.zeros(P)
        comp = np.zeros(P)
        while True:
            found = False
            j = 0
            cost = 0.0
            while True:
                if y < ltot[k]:
                    j = _piece(lefts, k, d, y)
                    cost = ca[k, j] * y + cb[k, j]
                    if cost <= rem:
                        found = True
                        break
                if k == 0:
                    break
                k -= 1
            if not found:
                break
            while k + 1 < K and y < ltot[k + 1]:
                j2 = _piece(lefts, k + 1, d, y)
                c2 = ca[k + 1, j2] * y + cb[k + 1, j2]
                if c2 <= rem:
                    k += 1
                    j = j2
                    cost = c2
                else:
                    break
            for q in range(P):
                term = alpha[q, k, j] * y + beta[q, k, j] - comp[q]
                t = s[q] + term
                comp[q] = (t - s[q]) - term
                s[q] = t
            rem -= cost
            steps += H[k, j]
            y += delta[k, j]
        if rem < 0.0:
            rem = 0.0
        for q in range(P):
            out_s[p, q] = s[q]
        out_steps[p] = steps
        out_rem[p] = rem
        out_y[p] = y


def _check_points(xs):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.size and (xs.min() < 0.0 or xs.max() >= 1.0):
        raise OutOfDomain("orbit start points must lie in [0, 1)")
    return xs


def walk_steps(tower: Tower, xs, ns):
    """Orbit sums of every tracked observable at the checkpoint step counts.

    ns must be non-decreasing non-negative ints.  Returns
    (sums with shape (N, len(ns), n_obs), end points T^{ns[-1]} x).
    """
    xs = _check_points(xs)
    ns = np.ascontiguousarray(ns, dtype=np.int64)
    if ns.size == 0 or np.any(ns < 0) or np.any(np.diff(ns) < 0):
        raise ValueError("checkpoints must be non-decreasing and >= 0")
    out = np.empty((xs.size, ns.size, tower.n_obs), dtype=np.float64)
    out_y = np.empty(xs.size, dtype=np.float64)
    _walk_steps_kernel(xs, ns, tower.ltot, tower.lefts, tower.delta, tower.H,
                       tower.alpha, tower.beta, out, out_y)
    return out, out_y


def walk_time(tower: Tower, xs, ts):
    """Advance each point until the accumulated first observable (the cost,
    e.g. a roof function) would exceed its budget ts[p].

    Returns (sums (N, n_obs), steps taken (N,), unspent budget (N,),
    end points (N,)).  The unspent budget is < the cost of one more base
    step at the end point.
    """
    xs = _check_points(xs)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    if ts.shape != xs.shape:
        raise ValueError("one time budget per start point required")
    if np.any(ts < 0.0):
        raise ValueError("time budgets must be >= 0")
    out_s = np.empty((xs.size, tower.n_obs), dtype=np.float64)
    out_steps = np.empty(xs.size, dtype=np.int64)
    out_rem = np.empty(xs.size, dtype=np.float64)
    out_y = np.empty(xs.size, dtype=np.float64)
    _walk_time_kernel(xs, ts, tower.ltot, tower.lefts, tower.delta, tower.H,
                      tower.alpha[0], tower.beta[0], tower.alpha, tower.beta,
                      out_s, out_steps, out_rem, out_y)
    return out_s, out_steps, out_rem, out_y
