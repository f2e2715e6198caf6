"""Special flows over interval exchanges realized as zippered rectangles.

A suspension places a rectangle of height h_i over each exchanged interval;
the flow moves points straight up at unit speed and re-enters through the
base map at each roof crossing.  Return times and ergodic integrals then
have closed forms built from orbit sums of the roof vector, which is what
every routine here uses: no time stepping anywhere.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import KeaneDegenerate, OutOfDomain
from .iet import Iet, PiecewiseFunction, birkhoff_sum
from .towers import build_tower, walk_time

__all__ = [
    "Suspension",
    "SurfacePoint",
    "SurfaceObservable",
    "canonical_suspension",
    "from_heights",
    "make_psi",
    "flow",
    "return_time",
    "ergodic_integral",
    "density_field",
    "weak_lip_bound",
]


@dataclass(frozen=True)
class SurfacePoint:
    """Point (x, y): base coordinate and height inside its rectangle."""

    x: float
    y: float


def _veech_check(perm, tau):
    d = len(perm)
    top = np.cumsum(tau)
    if np.any(top[:d - 1] <= 0):
        raise ValueError("suspension data must have positive leading "
                         "partial sums")
    rng_order = np.argsort(perm)          # interval hit k-th in the range
    bot = np.cumsum(tau[rng_order])
    if np.any(bot[:d - 1] >= 0):
        raise ValueError("suspension data must have negative partial sums "
                         "in range order")


@dataclass(frozen=True)
class Suspension:
    """Zippered-rectangle suspension: base exchange, slopes tau, roof heights."""

    base: Iet
    tau: np.ndarray
    heights: np.ndarray
    area: float

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.float64).copy()
        h = np.asarray(self.heights, dtype=np.float64).copy()
        d = self.base.d
        if tau.shape != (d,) or h.shape != (d,):
            raise ValueError(f"tau and heights must have length {d}")
        assert np.all(h > 0), "roof heights must be positive"
        _veech_check(self.base.perm, tau)
        area = float(self.base.lengths @ h)
        if abs(area - self.area) > 1e-9 * max(1.0, abs(area)):
            raise ValueError(f"area field {self.area} does not match "
                             f"lengths . heights = {area}")
        tau.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "area", area)

    @property
    def d(self) -> int:
        return self.base.d

    def height_at(self, x) -> np.ndarray | float:
        """Roof height over base point(s) x."""
        return self.heights[self.base.index(x)]

    def roof(self) -> PiecewiseFunction:
        """The roof as a piecewise-constant observable on the base."""
        return PiecewiseFunction(np.zeros(self.d), self.heights)

    def to_dict(self) -> dict:
        return {
            "lengths": [float(v) for v in self.base.lengths],
            "perm": [int(p) for p in self.base.perm],
            "tau": [float(v) for v in self.tau],
            "heights": [float(v) for v in self.heights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Suspension":
        base = Iet(data["lengths"], data["perm"])
        h = np.asarray(data["heights"], dtype=np.float64)
        return cls(base=base, tau=np.asarray(data["tau"], dtype=np.float64),
                   heights=h, area=float(base.lengths @ h))

    def __repr__(self):
        return (f"Suspension(d={self.d}, heights={np.round(self.heights, 6)}, "
                f"area={self.area:.6f})")


def canonical_suspension(T: Iet) -> Suspension:
    """Suspension with slope data tau_j = perm(j) - j and matching heights.

    Irreducibility makes this tau satisfy the positivity conditions, and
    the intersection pairing turns it into a positive roof vector, scaled
    here so the surface has unit area over the unit-length base.
    """
    d = T.d
    perm = np.asarray(T.perm, dtype=np.int64)
    tau = (perm - np.arange(1, d + 1)).astype(np.float64)
    omega = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            if i < j and perm[i] > perm[j]:
                omega[i, j] = 1.0
            elif i > j and perm[i] < perm[j]:
                omega[i, j] = -1.0
    h = -omega @ tau
    assert np.all(h > 0), "intersection pairing produced a non-positive height"
    h /= float(T.lengths @ h)
    return Suspension(base=T, tau=tau, heights=h, area=1.0)


def from_heights(T: Iet, heights, tau, normalize: bool = False) -> Suspension:
    """Suspension with explicit roof heights and slope data.

    normalize=True rescales the roof to unit area; the default keeps the
    given heights, so return times come out in their units.
    """
    h = np.asarray(heights, dtype=np.float64).copy()
    if normalize:
        h /= float(T.lengths @ h)
    return Suspension(base=T, tau=np.asarray(tau, dtype=np.float64),
                      heights=h, area=float(T.lengths @ h))


class SurfaceObservable:
    """f(x)/h(x): the surface function whose flow integral reproduces
    orbit sums of f at return times.  Constant in y."""

    def __init__(self, susp: Suspension, f: PiecewiseFunction):
        f._check(susp.base)
        self.susp = susp
        self.f = f

    def value(self, x, y=0.0):
        idx = self.susp.base.index(x)
        return (self.f.slope[idx] * np.asarray(x) + self.f.intercept[idx]) \
            / self.susp.heights[idx]

    def __call__(self, x, y=0.0):
        return self.value(x, y)

    def integral(self) -> float:
        """Integral over the surface: collapses to the base integral of f."""
        return self.f.mean(self.susp.base)

    def sup_abs(self) -> float:
        T = self.susp.base
        lo = np.asarray(T.lefts)
        hi = lo + np.asarray(T.lengths)
        vals = np.maximum(np.abs(self.f.slope * lo + self.f.intercept),
                          np.abs(self.f.slope * hi + self.f.intercept))
        return float(np.max(vals / self.susp.heights))


def make_psi(S: Suspension, f: PiecewiseFunction) -> SurfaceObservable:
    """Surface observable with value f(x)/h(x)."""
    return SurfaceObservable(S, f)


_BREAK_TOL = 1e-13


def _guard_breaks(T: Iet, x: float):
    # interior discontinuities only; 0 itself is a fine landing spot
    br = np.asarray(T.breaks)
    if br.size and np.min(np.abs(br - x)) <= _BREAK_TOL:
        raise KeaneDegenerate(f"flow crossing within {_BREAK_TOL} of a "
                              f"discontinuity at x={x}")


def flow(S: Suspension, p: SurfacePoint, t: float) -> SurfacePoint:
    """Flow the point vertically for signed time t, wrapping through the
    base exchange at roof crossings (forward) or its inverse at floor
    crossings (backward)."""
    T = S.base
    x = float(p.x)
    y = float(p.y)
    h = float(S.height_at(x))
    if not (0.0 <= y < h):
        raise OutOfDomain(f"y={y} outside [0, {h}) over x={x}")
    U = T.inverse()
    t = float(t)
    while True:
        if t >= 0.0:
            room = h - y
            if t < room:
                return SurfacePoint(x, y + t)
            _guard_breaks(T, x)
            t -= room
            x = float(T.apply(x))
            y = 0.0
            h = float(S.height_at(x))
        else:
            if -t <= y:
                return SurfacePoint(x, y + t)
            t += y
            _guard_breaks(U, x)
            x = float(U.apply(x))
            h = float(S.height_at(x))
            y = h
            # landing exactly on the roof means the floor of the next
            # rectangle up; the next loop pass consumes strictly positive
            # backward time, so y=h is transient here
            if t == 0.0:
                return SurfacePoint(float(T.apply(x)), 0.0)


def return_time(S: Suspension, x: float, n: int) -> float:
    """Time of the n-th return of (x, 0) to the base: the orbit sum of the
    roof over the first n base iterates."""
    if n < 0:
        raise ValueError(f"need n >= 0, got {n}")
    return float(birkhoff_sum(S.base, S.roof(), x, n))


def ergodic_integral(S: Suspension, f: PiecewiseFunction, x: float,
                     t: float) -> float:
    """Integral of f(x)/h(x) along the flow for time t from (x, 0).

    Splits at return times: full crossings contribute plain values of f,
    the leftover contributes its fraction of the current rectangle.
    """
    if t < 0:
        raise ValueError(f"need t >= 0, got {t}")
    T = S.base
    f._check(T)
    if not (0.0 <= float(x) < 1.0):
        raise OutOfDomain(f"point outside [0, 1): {x}")
    # list + bisect crossing loop; numpy per crossing is 10x slower
    breaks = T.breaks.tolist()
    off = T.offsets.tolist()
    hs = S.heights.tolist()
    a = f.slope.tolist()
    b = f.intercept.tolist()
    top = math.nextafter(1.0, 0.0)
    locate = bisect.bisect_right
    y = float(x)
    acc = 0.0
    comp = 0.0
    elapsed = 0.0
    while True:
        j = locate(breaks, y)
        dt = hs[j]
        if elapsed + dt > t:
            frac = (t - elapsed) / dt
            term = frac * (a[j] * y + b[j])
            return acc + comp + term
        term = a[j] * y + b[j]
        delta = term - comp
        s = acc + delta
        comp = (s - acc) - delta
        acc = s
        elapsed += dt
        y += off[j]
        if y >= 1.0:
            y = top
        elif y < 0.0:
            y = 0.0


def _backward_flow_bulk(S: Suspension, xs: np.ndarray, ts: np.ndarray):
    """Endpoints of backward flow from (xs, 0) for times ts >= 0.

    Walks the inverse exchange under the pulled-back roof; one tower build
    covers every sample.  Returns (px, py) arrays.
    """
    T = S.base
    U = T.inverse()
    g = S.heights[np.asarray(U.perm0)]     # roof seen from below each floor
    tmax = float(np.max(ts)) if ts.size else 0.0
    n_need = int(tmax / float(np.min(g))) + 2
    tower = build_tower(U, [(np.zeros(U.d), g)], max(n_need, 4))
    _, _, rem, y = walk_time(tower, xs, ts)
    up = rem > 0.0
    px = np.where(up, U.apply(y), y)
    py = np.zeros_like(px)
    if np.any(up):
        py[up] = S.heights[T.index(px[up])] - rem[up]
    return px, py


def density_field(S: Suspension, T_time: float, grid: tuple[int, int],
                  N: int, seed: int) -> np.ndarray:
    """Empirical density of backward-flowed samples on a per-rectangle grid.

    Draws x stratified over the base and a uniform fraction gamma, flows
    (x, 0) backward for gamma * T_time, and bins the endpoints.  Values are
    relative to the uniform area measure, so a perfectly equidistributed
    cloud reads 1.0 in every cell.  Returns an array of shape (d, nx, ny).
    """
    nx, ny = grid
    if nx < 4 or ny < 4:
        raise ValueError(f"grid must be at least 4x4 per rectangle, "
                         f"got {nx}x{ny}")
    if T_time <= 0:
        raise ValueError(f"need T_time > 0, got {T_time}")
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    T = S.base
    d = T.d
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    # latin-hypercube pairing: both marginals stratified, joint shuffled
    xs = (np.arange(N) + rng.random(N)) / N
    np.minimum(xs, np.nextafter(1.0, 0.0), out=xs)
    gammas = (rng.permutation(N) + rng.random(N)) / N
    px, py = _backward_flow_bulk(S, xs, gammas * float(T_time))
    ridx = T.index(px)
    lam = np.asarray(T.lengths)
    lefts = np.asarray(T.lefts)
    ix = np.floor((px - lefts[ridx]) / lam[ridx] * nx).astype(np.int64)
    iy = np.floor(py / S.heights[ridx] * ny).astype(np.int64)
    np.clip(ix, 0, nx - 1, out=ix)
    np.clip(iy, 0, ny - 1, out=iy)
    flat = (ridx * nx + ix) * ny + iy
    counts = np.bincount(flat, minlength=d * nx * ny).reshape(d, nx, ny)
    cell_area = (lam[:, None, None] / nx) * (S.heights[:, None, None] / ny)
    return counts / (N * cell_area / S.area)


def weak_lip_bound(S: Suspension, f: PiecewiseFunction) -> float:
    """Upper bound for the flow-box regularity norm of f(x)/h(x).

    Two admissible-rectangle orbits see the same crossing sequence; their
    integral gap is at most the slope of f times total width swept, and
    width times height never beats the area.  That gives
    sup |f/h| + Lip(f)/min h."""
    psi = make_psi(S, f)
    return psi.sup_abs() + f.lipschitz() / float(np.min(S.heights))
