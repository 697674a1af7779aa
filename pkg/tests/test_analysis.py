import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bakerlab.analysis import (
    CDCD_THRESHOLD,
    InvariantSetId,
    Rectangle,
    ab_orbit,
    cdcd_attractor,
    cdcd_lines,
    conjugacy_defect,
    fixed_points,
    has_cdcd,
    invariant_rectangles,
    lyapunov_analytic,
    lyapunov_finite_time,
    representative_point,
    steady_state_lambda_table,
)
from bakerlab.mapcore import OrbitUnavailable, Params, ParameterError, Region, apply_l, classify_region, orbit

P = Params(0.2)
S = InvariantSetId


def dist(p, q):
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def l_power(p, params, n):
    for _ in range(n):
        p = apply_l(p, params)
    return p


class TestFixedPoints:
    def test_values(self):
        p_a, p_d = fixed_points(P)
        assert dist(p_a, (1 / 9, 7 / 9)) <= 1e-15
        assert dist(p_d, (8 / 9, 5 / 18)) <= 1e-15
        p_a, _ = fixed_points(Params(0.25))
        assert dist(p_a, (0.125, 0.75)) <= 1e-15

    @pytest.mark.parametrize("ell", np.linspace(0.005, 0.25, 50))
    def test_residuals(self, ell):
        params = Params(float(ell))
        p_a, p_d = fixed_points(params)
        assert dist(apply_l(p_a, params), p_a) < 1e-14
        assert dist(apply_l(p_d, params), p_d) < 1e-14
        assert classify_region(p_a, params) is Region.A
        assert classify_region(p_d, params) is Region.D


class TestAbOrbit:
    def test_values(self):
        a, b = ab_orbit(P)
        assert dist(a, (0.12, 0.6 / 2.2)) <= 1e-15
        assert dist(b, (0.8 / 2.2, 0.8)) <= 1e-15

    @pytest.mark.parametrize("ell", [0.13, 0.2, 0.24])
    def test_two_cycle(self, ell):
        params = Params(ell)
        a, b = ab_orbit(params)
        assert dist(apply_l(a, params), b) <= 1e-12
        assert dist(apply_l(b, params), a) <= 1e-12
        assert classify_region(a, params) is Region.A
        assert classify_region(b, params) is Region.B


class TestCdcd:
    def test_lines(self):
        att = cdcd_attractor(P)
        assert att.x_line == pytest.approx(2 / 3, abs=1e-15)
        assert att.y_line == pytest.approx(5 / 6, abs=1e-15)

    def test_hand_orbit(self):
        orb = orbit((2 / 3, 0.3), 4, P)
        yd = 5 / 6
        expected = [(0.85, yd), (2 / 3, 0.2), (0.9, yd), (2 / 3, 0.3)]
        for q, e in zip(orb.points[1:], expected):
            assert dist(q, e) <= 1e-12
        assert orb.itinerary_string == "CDCD"

    def test_threshold_boundary(self):
        xc, _ = cdcd_lines(Params(0.125))
        assert xc == pytest.approx(0.75, abs=1e-15)

    def test_unavailable_below_threshold(self):
        with pytest.raises(OrbitUnavailable):
            cdcd_attractor(Params(0.1))
        assert not has_cdcd(Params(0.1))
        assert has_cdcd(Params(CDCD_THRESHOLD))

    @given(st.floats(1e-4, 0.1249, allow_nan=False))
    def test_line_outside_c_below_threshold(self, ell):
        xc, _ = cdcd_lines(Params(ell))
        assert 0.75 <= xc <= 1.0

    @pytest.mark.parametrize("ell", [0.13, 0.2, 0.24])
    def test_segment_points_are_period_four(self, ell, rng):
        params = Params(ell)
        att = cdcd_attractor(params)
        ys = rng.uniform(0.0, 0.5, 10)
        xs = rng.uniform(0.75, 1.0, 10)
        pts = [(att.x_line, y) for y in ys] + [(x, att.y_line) for x in xs]
        for p in pts:
            assert dist(l_power(p, params, 4), p) <= 1e-12
            assert att.distance(p) == 0.0

    def test_distance(self):
        att = cdcd_attractor(P)
        assert att.distance((2 / 3 + 0.01, 0.25)) == pytest.approx(0.01)
        assert att.distance((0.9, 5 / 6 - 0.02)) == pytest.approx(0.02)


class TestRectangles:
    def test_values(self):
        b, c = invariant_rectangles(P)
        assert (b.x_lo, b.x_hi, b.y_hi) == pytest.approx((0.3, 0.5, 0.5), abs=1e-15)
        assert b.y_lo == pytest.approx(1 / 6, abs=1e-15)
        assert (c.x_lo, c.x_hi, c.y_lo, c.y_hi) == (0.5, 0.75, 0.5, 1.0)

    def test_b_example_orbit(self):
        orb = orbit((0.45, 0.3), 4, P)
        expected = [(0.42, 5 / 12), (0.35, 11 / 30), (0.38, 0.25), (0.45, 0.3)]
        for q, e in zip(orb.points[1:], expected):
            assert dist(q, e) <= 1e-12

    @given(st.floats(1e-3, 0.25, allow_nan=False))
    def test_b_area_formula(self, ell):
        b, _ = invariant_rectangles(Params(ell))
        assert b.area == pytest.approx(ell * ell / (1 - 2 * ell), rel=1e-12)

    def test_equilibrium_areas(self):
        b, c = invariant_rectangles(Params(0.25))
        assert b.area == pytest.approx(0.125, abs=1e-15)
        assert c.area == 0.125

    @pytest.mark.parametrize("ell", [0.05, 0.1, 0.2, 0.24])
    def test_invariance_grid(self, ell):
        params = Params(ell)
        for rect, region in zip(invariant_rectangles(params), (Region.B, Region.C)):
            for p in rect.interior_grid(50):
                q = p
                for _ in range(4):
                    assert classify_region(q, params) is region
                    q = apply_l(q, params)
                    assert rect.contains(q)
                assert dist(q, p) <= 1e-12

    def test_rectangle_validation(self):
        with pytest.raises(ParameterError):
            Rectangle(0.5, 0.4, 0.0, 1.0)


class TestLyapunov:
    def test_p_a(self):
        lx, ly = lyapunov_analytic(S.P_A, P)
        assert lx == pytest.approx(0.5 * math.log(1.25), abs=1e-15)
        assert ly == lx

    def test_ab(self):
        lx, ly = lyapunov_analytic(S.AB, P)
        assert lx == pytest.approx(0.5 * math.log(1.5), abs=1e-15)
        assert ly == pytest.approx(0.5 * math.log(1 / 1.2), abs=1e-15)

    @pytest.mark.parametrize("which", [s for s in S if s not in (S.AB, S.CDCD)])
    def test_equilibrium_zero(self, which):
        assert lyapunov_analytic(which, Params(0.25)) == (0.0, 0.0)

    @pytest.mark.parametrize("which", [S.AB, S.CDCD])
    def test_equilibrium_zero_cycles(self, which):
        lx, ly = lyapunov_analytic(which, Params(0.25))
        assert abs(lx) <= 1e-15 and abs(ly) <= 1e-15

    @pytest.mark.parametrize("which", [S.AB, S.CDCD])
    def test_unavailable(self, which):
        with pytest.raises(OrbitUnavailable):
            lyapunov_analytic(which, Params(0.1))

    @given(st.floats(1e-4, 0.2499, allow_nan=False))
    def test_sign_structure(self, ell):
        params = Params(ell)
        pa = lyapunov_analytic(S.P_A, params)
        pd = lyapunov_analytic(S.P_D, params)
        assert pa.lambda_x > 0 and pa.lambda_y > 0
        assert pd.lambda_x < 0 and pd.lambda_y < 0
        assert pa.lambda_x == -pd.lambda_x and pa.lambda_y == -pd.lambda_y

    @pytest.mark.parametrize("ell", [0.13, 0.2, 0.24, 0.25])
    def test_conjugacy(self, ell):
        assert abs(conjugacy_defect(Params(ell))) <= 1e-14

    @pytest.mark.parametrize("ell", [0.13, 0.2, 0.24])
    @pytest.mark.parametrize("which", list(S))
    def test_finite_time_matches_analytic(self, ell, which):
        params = Params(ell)
        num = lyapunov_finite_time(representative_point(which, params), 1000, params)
        ana = lyapunov_analytic(which, params)
        assert num.lambda_x == pytest.approx(ana.lambda_x, abs=1e-9)
        assert num.lambda_y == pytest.approx(ana.lambda_y, abs=1e-9)

    def test_spec_points(self):
        half = 0.5 * math.log(0.8)
        assert lyapunov_finite_time((8 / 9, 5 / 18), 1000, P) == pytest.approx((half, half), abs=1e-12)
        assert lyapunov_finite_time((2 / 3, 0.3), 1000, P) == pytest.approx((half, 0.0), abs=1e-12)
        assert lyapunov_finite_time((0.6, 0.7), 1000, P) == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_long_run_no_overflow(self):
        pair = lyapunov_finite_time(fixed_points(Params(0.01))[0], 20_000, Params(0.01))
        assert pair.lambda_x == pytest.approx(-0.5 * math.log(0.04), rel=1e-12)

    def test_odd_steps_rejected(self):
        with pytest.raises(ParameterError):
            lyapunov_finite_time((0.3, 0.3), 7, P)

    def test_parse(self):
        assert S.parse("binv") is S.B_inv
        assert S.parse("PA") is S.P_A
        with pytest.raises(ParameterError):
            S.parse("XY")


class TestSteadyTable:
    def test_six_rows(self):
        rows = steady_state_lambda_table(P)
        phi = P.phi
        assert [v for _, v in rows] == [phi, phi / 2, 0.0, 0.0, -phi / 2, -phi]

    def test_four_rows(self):
        rows = steady_state_lambda_table(Params(0.1))
        assert [s for s, _ in rows] == [S.P_D, S.B_inv, S.C_inv, S.P_A]
        assert rows[0][1] == pytest.approx(0.9162907318741551, abs=1e-15)

    def test_equilibrium(self):
        assert all(v == 0.0 for _, v in steady_state_lambda_table(Params(0.25)))
