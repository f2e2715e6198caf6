import json
import math

import numpy as np
import pytest

from conftest import (
    GOLDEN,
    random_affine,
    random_iet,
    random_irreducible_perm,
    zero_meaned,
)
from ietlab.errors import OutOfDomain
from ietlab.experiments import substream
from ietlab.iet import PiecewiseFunction, birkhoff_sum, make_iet
from ietlab.rauzy import cocycle_function, cocycle_orbit, second_direction
from ietlab.suspension import (
    Suspension,
    SurfacePoint,
    canonical_suspension,
    density_field,
    ergodic_integral,
    flow,
    from_heights,
    make_psi,
    return_time,
    weak_lip_bound,
)


class TestConstruction:
    def test_golden_style_hand_case(self):
        S = canonical_suspension(make_iet([0.3, 0.7], [2, 1]))
        np.testing.assert_allclose(S.tau, [1.0, -1.0])
        np.testing.assert_allclose(S.heights, [1.0, 1.0], atol=1e-14)
        assert S.area == pytest.approx(1.0, abs=1e-14)

    def test_area_normalized(self):
        rng = substream(4, 1)
        for d in (2, 3, 4, 5):
            T = random_iet(rng, d)
            S = canonical_suspension(T)
            assert float(T.lengths @ S.heights) == pytest.approx(
                1.0, abs=1e-12)

    def test_partial_sum_inequalities(self):
        # 2d-2 sign conditions on the slope data
        rng = substream(4, 2)
        for _ in range(20):
            d = int(rng.choice([2, 3, 4, 5]))
            T = random_iet(rng, d)
            S = canonical_suspension(T)
            top = np.cumsum(S.tau)
            assert np.all(top[:d - 1] > 0)
            rng_order = np.argsort(np.asarray(T.perm))
            bot = np.cumsum(S.tau[rng_order])
            assert np.all(bot[:d - 1] < 0)

    def test_reversal_height_profiles(self):
        S4 = canonical_suspension(
            make_iet(substream(4, 3).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        np.testing.assert_allclose(S4.heights / S4.heights[0],
                                   [1.0, 7.0 / 3.0, 7.0 / 3.0, 1.0],
                                   atol=1e-12)
        S5 = canonical_suspension(
            make_iet(substream(4, 4).dirichlet(np.ones(5)), [5, 4, 3, 2, 1]))
        np.testing.assert_allclose(S5.heights / S5.heights[0],
                                   [1.0, 2.5, 3.0, 2.5, 1.0], atol=1e-12)

    def test_bad_slope_data_rejected(self):
        T = make_iet([0.3, 0.7], [2, 1])
        with pytest.raises(ValueError):
            from_heights(T, [1.0, 1.0], [-1.0, 1.0])

    def test_area_field_validated(self):
        T = make_iet([0.3, 0.7], [2, 1])
        with pytest.raises(ValueError):
            Suspension(base=T, tau=np.array([1.0, -1.0]),
                       heights=np.array([1.0, 1.0]), area=0.5)

    def test_serialization_round_trip(self):
        S = canonical_suspension(
            make_iet(substream(4, 5).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        S2 = Suspension.from_dict(json.loads(json.dumps(S.to_dict())))
        np.testing.assert_allclose(S2.heights, S.heights, atol=1e-15)
        np.testing.assert_allclose(S2.tau, S.tau, atol=1e-15)
        assert S2.base.perm == S.base.perm


class TestSurfaceObservable:
    def test_roof_observable_is_one(self):
        S = canonical_suspension(
            make_iet(substream(4, 6).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        psi = make_psi(S, S.roof())
        for x in (0.05, 0.3, 0.62, 0.9):
            assert psi(x) == pytest.approx(1.0, abs=1e-12)

    def test_constant_one_gives_inverse_roof(self):
        S = canonical_suspension(
            make_iet(substream(4, 7).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        psi = make_psi(S, PiecewiseFunction(np.zeros(4), np.ones(4)))
        for x in (0.05, 0.3, 0.62, 0.9):
            assert psi(x) == pytest.approx(
                1.0 / float(S.height_at(x)), abs=1e-12)

    def test_surface_integral_equals_base_integral(self):
        # per-rectangle quadrature in x times the height against the
        # closed-form base mean
        rng = substream(4, 8)
        nodes, wts = np.polynomial.legendre.leggauss(8)
        for _ in range(10):
            T = random_iet(rng, 4)
            S = canonical_suspension(T)
            f = random_affine(rng, 4)
            psi = make_psi(S, f)
            total = 0.0
            for i in range(4):
                a = T.lefts[i]
                b = a + T.lengths[i]
                xs = 0.5 * (b - a) * nodes + 0.5 * (a + b)
                vals = (f.slope[i] * xs + f.intercept[i]) / S.heights[i]
                total += 0.5 * (b - a) * float(wts @ vals) * S.heights[i]
            assert abs(total - psi.integral()) <= 1e-10


class TestFlow:
    def test_zero_time_fixed(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        p = SurfacePoint(0.25, 0.4)
        q = flow(S, p, 0.0)
        assert (q.x, q.y) == (p.x, p.y)

    def test_one_roof_crossing(self):
        T = make_iet([1.0 - GOLDEN, GOLDEN], [2, 1])
        S = canonical_suspension(T)
        x = 0.25
        q = flow(S, SurfacePoint(x, 0.0), float(S.height_at(x)))
        assert q.x == pytest.approx(T.apply(x), abs=1e-12)
        assert q.y == pytest.approx(0.0, abs=1e-12)

    def test_group_law(self):
        S = canonical_suspension(
            make_iet(substream(4, 9).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        p = SurfacePoint(0.3721, 0.2)
        q = flow(S, flow(S, p, 1.7), -1.7)
        assert q.x == pytest.approx(p.x, abs=1e-10)
        assert q.y == pytest.approx(p.y, abs=1e-10)

    def test_split_forward_times(self):
        S = canonical_suspension(
            make_iet(substream(4, 10).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        p = SurfacePoint(0.111, 0.05)
        a = flow(S, p, 2.9)
        b = flow(S, flow(S, p, 1.3), 1.6)
        assert a.x == pytest.approx(b.x, abs=1e-10)
        assert a.y == pytest.approx(b.y, abs=1e-10)

    def test_invalid_height_rejected(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        with pytest.raises(OutOfDomain):
            flow(S, SurfacePoint(0.25, 5.0), 1.0)


class TestReturnTime:
    def test_constant_roof(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        np.testing.assert_allclose(S.heights, [1.0, 1.0], atol=1e-14)
        assert return_time(S, 0.2, 1000) == pytest.approx(1000.0, abs=1e-9)

    def test_hand_case_unnormalized_roof(self):
        T = make_iet([0.3, 0.7], [2, 1])
        S = from_heights(T, [2.0, 3.0], [1.0, -1.0])
        # orbit of 0.1: piece 1 then piece 2
        assert return_time(S, 0.1, 2) == pytest.approx(5.0, abs=1e-12)

    def test_consistency_with_flow(self):
        T = make_iet(substream(4, 11).dirichlet(np.ones(4)), [4, 3, 2, 1])
        S = canonical_suspension(T)
        x = 0.3571
        n = 7
        tn = return_time(S, x, n)
        q = flow(S, SurfacePoint(x, 0.0), tn)
        y = x
        for _ in range(n):
            y = T.apply(y)
        assert q.x == pytest.approx(y, abs=1e-9)
        assert q.y == pytest.approx(0.0, abs=1e-9)

    def test_increments_within_roof_range(self):
        S = canonical_suspension(
            make_iet(substream(4, 12).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        x = 0.123
        times = [return_time(S, x, n) for n in range(30)]
        diffs = np.diff(times)
        assert np.all(diffs >= S.heights.min() - 1e-12)
        assert np.all(diffs <= S.heights.max() + 1e-12)


class TestErgodicIntegral:
    def test_zero_time(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        f = PiecewiseFunction(np.zeros(2), np.ones(2))
        assert ergodic_integral(S, f, 0.3, 0.0) == 0.0

    def test_matches_orbit_sums_at_return_times(self):
        rng = substream(4, 13)
        for _ in range(25):
            d = int(rng.choice([2, 4, 5]))
            T = random_iet(rng, d)
            S = canonical_suspension(T)
            f = random_affine(rng, d)
            x = float(rng.random())
            n = int(rng.integers(1, 2000))
            lhs = birkhoff_sum(T, f, x, n)
            rhs = ergodic_integral(S, f, x, return_time(S, x, n))
            assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))

    def test_unit_observable_counts_returns(self):
        S = canonical_suspension(
            make_iet(substream(4, 14).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        one = PiecewiseFunction(np.zeros(4), np.ones(4))
        x = 0.4321
        t5 = return_time(S, x, 5)
        t6 = return_time(S, x, 6)
        t = 0.5 * (t5 + t6)
        val = ergodic_integral(S, one, x, t)
        assert 5.0 <= val < 6.0
        assert ergodic_integral(S, one, x, t5) == pytest.approx(
            5.0, abs=1e-9)

    def test_negative_time_rejected(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        f = PiecewiseFunction(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            ergodic_integral(S, f, 0.3, -1.0)


class TestDensityField:
    def test_torus_cells_near_uniform(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        rho = density_field(S, 1000.0, (4, 4), 1_000_000, seed=2)
        assert float(np.abs(rho - 1.0).max()) <= 0.05

    def test_total_mass_exact(self):
        S = canonical_suspension(
            make_iet(substream(4, 15).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        rho = density_field(S, 50.0, (4, 4), 20_000, seed=3)
        cell_area = (S.base.lengths[:, None, None]
                     * S.heights[:, None, None] / 16.0)
        mass = float((rho * cell_area).sum())
        assert mass == pytest.approx(1.0, abs=1e-12)

    def test_deviation_shrinks_with_time(self):
        # longer windows equidistribute better on a well-balanced exchange
        rng = substream(19, 900)
        while True:
            lam = rng.dirichlet(np.ones(4))
            if lam.min() >= 0.10:
                break
        S = canonical_suspension(make_iet(lam, [4, 3, 2, 1]))
        sup_lo = float(np.abs(
            density_field(S, 100.0, (4, 4), 200_000, seed=4) - 1.0).max())
        sup_hi = float(np.abs(
            density_field(S, 10_000.0, (4, 4), 200_000, seed=4) - 1.0).max())
        assert sup_hi < sup_lo

    def test_grid_validated(self):
        S = canonical_suspension(make_iet([1.0 - GOLDEN, GOLDEN], [2, 1]))
        with pytest.raises(ValueError):
            density_field(S, 10.0, (2, 2), 1000, seed=0)
        with pytest.raises(ValueError):
            density_field(S, -1.0, (4, 4), 1000, seed=0)


class TestWeakLipBound:
    def test_constant_observable(self):
        S = canonical_suspension(
            make_iet(substream(4, 16).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        f = PiecewiseFunction(np.zeros(4), np.full(4, -3.0))
        assert weak_lip_bound(S, f) == pytest.approx(
            3.0 / float(S.heights.min()), abs=1e-12)

    def test_homogeneity(self):
        S = canonical_suspension(
            make_iet(substream(4, 17).dirichlet(np.ones(4)), [4, 3, 2, 1]))
        f = random_affine(substream(4, 18), 4)
        f2 = PiecewiseFunction(2.0 * f.slope, 2.0 * f.intercept)
        assert weak_lip_bound(S, f2) == pytest.approx(
            2.0 * weak_lip_bound(S, f), rel=1e-12)

    def test_bounds_sampled_rectangle_defects(self):
        # defect between vertical integrals from two horizontally nearby
        # starts, kept inside a singularity-free rectangle
        rng = substream(4, 19)
        T = make_iet(rng.dirichlet(np.ones(4)), [4, 3, 2, 1])
        S = canonical_suspension(T)
        f = random_affine(rng, 4)
        bound = weak_lip_bound(S, f)
        lefts = T.lefts
        checked = 0
        for _ in range(1000):
            x = float(rng.random())
            t1 = float(rng.uniform(0.5, 50.0))
            n_cross = int(t1 / S.heights.min()) + 2
            y = x
            dmax = np.inf
            for _ in range(n_cross):
                i = T.index(y)
                dmax = min(dmax, y - lefts[i])
                y = T.apply(y)
            if dmax <= 1e-12:
                continue
            delta = 0.9 * float(rng.random()) * dmax
            defect = abs(ergodic_integral(S, f, x, t1)
                         - ergodic_integral(S, f, x - delta, t1))
            assert defect <= bound + 1e-9
            checked += 1
        assert checked > 900


class TestReturnTimeDeviation:
    def test_second_direction_captures_roof_deviation(self, d4_balanced):
        # after removing the mean drift and the fitted second-direction
        # component, return times deviate with a much smaller exponent
        T = d4_balanced
        S = canonical_suspension(T)
        v2 = second_direction(T, 200)
        fv2 = cocycle_function(v2, T)
        theta2 = float(cocycle_orbit(T, 2000).theta_hat[1])
        ns = np.unique(np.geomspace(100, 30_000, 5).astype(int))
        xs = (np.arange(256) + substream(4, 20).random(256)) / 256
        roof = S.roof()
        dev = np.empty((len(ns), len(xs)))
        sv = np.empty((len(ns), len(xs)))
        for j, x in enumerate(xs):
            for i, n in enumerate(ns):
                dev[i, j] = birkhoff_sum(T, roof, float(x), int(n)) - n
                sv[i, j] = birkhoff_sum(T, fv2, float(x), int(n))
        b = float((dev[-1] @ sv[-1]) / (sv[-1] @ sv[-1]))
        resid = np.abs(dev - b * sv).max(axis=1)
        slope = float(np.polyfit(np.log(ns), np.log(resid), 1)[0])
        assert slope <= theta2 ** 2 + 0.1
