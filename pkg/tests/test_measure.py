import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bakerlab._pykernels import _step
from bakerlab.mapcore import Params, ParameterError, Region, orbit
from bakerlab.measure import (
    DegenerateError,
    ResourceGuardError,
    conjugate_cylinder_exists,
    cylinder_witness,
    decode_itinerary,
    enumerate_cylinders,
    exact_fr_curve,
    exact_lambda_distribution,
    steady_state_mean_contraction,
)

P = Params(0.2)
ELLS = [0.05, 0.1, 0.2, 0.24]


def masses_by_itinerary(table):
    return {c.itinerary: c.measure for c in table}


def grid_itinerary_masses(ell, n, m=1500):
    """Histogram of itineraries over an ``m x m`` cell-center grid (independent oracle)."""
    t = (np.arange(m) + 0.5) / m
    gx, gy = np.meshgrid(t, t)
    x, y = gx.ravel(), gy.ravel()
    code = np.zeros(x.size, dtype=np.int64)
    for _ in range(n):
        region = np.searchsorted([ell, 0.5, 0.75], x, side="right")
        code = code * 4 + region
        x, y, _ = _step(x, y, ell, 2 * ell, 1 - 2 * ell)
    keys, counts = np.unique(code, return_counts=True)
    return {decode_itinerary(int(k), n): c / x.size for k, c in zip(keys, counts)}


class TestEnumeration:
    def test_n1(self):
        masses = masses_by_itinerary(enumerate_cylinders(P, 1))
        assert masses == pytest.approx({"A": 0.2, "B": 0.3, "C": 0.25, "D": 0.25}, abs=1e-15)

    def test_n2_analytic(self):
        masses = masses_by_itinerary(enumerate_cylinders(P, 2))
        assert masses["DD"] == pytest.approx(0.25 * 0.625, abs=1e-15)
        assert masses["AA"] == pytest.approx(2 * 0.2 ** 2, abs=1e-15)

    def test_n2_small_ell_dd(self):
        masses = masses_by_itinerary(enumerate_cylinders(Params(0.1), 2))
        assert masses["DD"] == pytest.approx(0.25, abs=1e-15)
        assert "DC" not in masses

    @pytest.mark.parametrize("ell, n", [(0.2, 3), (0.07, 4), (0.24, 5)])
    def test_against_grid(self, ell, n):
        exact = masses_by_itinerary(enumerate_cylinders(Params(ell), n))
        grid = grid_itinerary_masses(ell, n)
        # boundary cells dominate the grid error: O(n / m)
        for key in set(exact) | set(grid):
            assert abs(exact.get(key, 0.0) - grid.get(key, 0.0)) < 4e-3

    @pytest.mark.parametrize("ell", ELLS + [1e-4, 0.125, 0.25])
    @pytest.mark.parametrize("n", [1, 2, 5, 8, 12])
    def test_partition_of_unity(self, ell, n):
        table = enumerate_cylinders(Params(ell), n)
        assert abs(math.fsum(table.measures) - 1.0) <= 1e-12
        assert (table.measures > 0).all()

    @pytest.mark.parametrize("ell", ELLS)
    def test_measure_is_area_over_determinant(self, ell):
        params = Params(ell)
        dets = {"A": 1 / (4 * ell), "B": 1.0, "C": 1.0, "D": 4 * ell}
        table = enumerate_cylinders(params, 6)
        for c in table:
            x0, x1, y0, y1 = c.image
            jac = math.prod(dets[s] for s in c.itinerary)
            assert c.measure == pytest.approx((x1 - x0) * (y1 - y0) / jac, rel=1e-9, abs=1e-15)

    @pytest.mark.parametrize("ell", ELLS)
    @pytest.mark.parametrize("n", [1, 4, 9])
    def test_refinement_consistency(self, ell, n):
        params = Params(ell)
        coarse = masses_by_itinerary(enumerate_cylinders(params, n))
        fine = masses_by_itinerary(enumerate_cylinders(params, n + 1))
        marginal = {}
        for it, m in fine.items():
            marginal[it[:-1]] = marginal.get(it[:-1], 0.0) + m
        assert set(marginal) <= set(coarse)
        for it, m in coarse.items():
            assert abs(marginal.get(it, 0.0) - m) <= 1e-12

    @pytest.mark.parametrize("ell", [0.05, 0.1, 0.125, 0.2, 0.24])
    def test_transition_feasibility(self, ell):
        # B maps onto x in [0, 1 - 2 ell], which reaches D exactly when ell < 1/8
        allowed = {"A": set("AB"), "B": set("ABC") if ell >= 0.125 else set("ABCD"),
                   "C": set("CD"), "D": set("D") if ell <= 0.125 else set("CD")}
        seen = {s: set() for s in "ABCD"}
        for c in enumerate_cylinders(Params(ell), 8):
            for a, b in zip(c.itinerary, c.itinerary[1:]):
                seen[a].add(b)
        for s in "ABCD":
            assert seen[s] <= allowed[s]
        assert seen["B"] == allowed["B"]
        if ell > 0.125:
            assert seen["D"] == set("CD")

    def test_sorted_and_deterministic(self):
        a = enumerate_cylinders(P, 10)
        b = enumerate_cylinders(P, 10)
        assert np.array_equal(a.codes, b.codes) and np.array_equal(a.measures, b.measures)
        its = [a.itinerary(i) for i in range(len(a))]
        assert its == sorted(its)

    def test_net_counts(self):
        table = enumerate_cylinders(P, 7)
        for c, k in zip(table, table.net_counts):
            assert c.net_count == k

    @pytest.mark.parametrize("n", [0, 15])
    def test_bounds(self, n):
        with pytest.raises(ParameterError):
            enumerate_cylinders(P, n)

    def test_n_max_override(self):
        assert len(enumerate_cylinders(P, 16, n_max=16)) > 0

    def test_resource_guard(self):
        with pytest.raises(ResourceGuardError):
            enumerate_cylinders(P, 12, max_live=10)

    def test_tiny_ell_keeps_mass(self):
        table = enumerate_cylinders(Params(1e-4), 10)
        assert abs(math.fsum(table.measures) - 1.0) <= 1e-12


class TestDistribution:
    def test_n1(self):
        hist = exact_lambda_distribution(P, 1)
        assert hist.masses == pytest.approx({-1: 0.2, 0: 0.55, 1: 0.25}, abs=1e-15)
        assert hist.kind == "exact"

    def test_n2(self):
        hist = exact_lambda_distribution(P, 2)
        assert hist.mass(2) == pytest.approx(0.15625, abs=1e-15)
        assert hist.mass(-2) == pytest.approx(0.08, abs=1e-15)

    def test_value(self):
        hist = exact_lambda_distribution(P, 4)
        assert hist.value(2) == 2 * P.phi / 4

    def test_equilibrium_single_bin(self):
        hist = exact_lambda_distribution(Params(0.25), 6)
        assert hist.support == [0]
        assert hist.mass(0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("ell", ELLS)
    @pytest.mark.parametrize("n", range(1, 13))
    def test_conjugate_pairing(self, ell, n):
        hist = exact_lambda_distribution(Params(ell), n)
        for k in hist.support:
            assert hist.mass(-k) > 0.0, (k, hist.masses)


class TestFrCurve:
    @given(st.floats(1e-4, 0.2499, allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_n1_identity(self, ell):
        curve = exact_fr_curve(Params(ell), 1)
        (row,) = curve.rows
        assert row.k == 1
        assert abs(row.deviation) <= 1e-14

    def test_n1_examples(self):
        for ell in (0.2, 0.1):
            (row,) = exact_fr_curve(Params(ell), 1).rows
            assert row.lhs == pytest.approx(-math.log(4 * ell), abs=1e-15)

    def test_n2_violation(self):
        curve = exact_fr_curve(P, 2)
        row = next(r for r in curve.rows if r.k == 2)
        assert row.lhs == pytest.approx(0.5 * math.log(0.15625 / 0.08), abs=1e-12)
        assert row.A == pytest.approx(0.2231435513142097, abs=1e-15)
        assert row.deviation == pytest.approx(0.1115717756571049, abs=1e-9)

    def test_equilibrium_degenerate(self):
        with pytest.raises(DegenerateError):
            exact_fr_curve(Params(0.25), 3)

    def test_unpaired_reported(self):
        # D-only itineraries can reach k=n with no A-only partner when ell <= 1/8
        curve = exact_fr_curve(Params(0.05), 12)
        for row in curve.unpaired:
            assert math.isinf(row.lhs)
            assert (row.p_plus == 0.0) != (row.p_minus == 0.0)
        ks = [r.k for r in curve.all_rows]
        assert ks == sorted(ks)


class TestConjugate:
    def test_aa_witness(self):
        ok, w = conjugate_cylinder_exists(P, 2, 2)
        assert ok
        assert w.x < 0.2 and w.y > 0.6
        assert orbit(w, 2, P).itinerary_string == "AA"

    def test_zero_trivial(self):
        ok, w = conjugate_cylinder_exists(P, 1, 0)
        assert ok
        assert orbit(w, 1, P).itinerary_string in ("B", "C")

    def test_absent(self):
        assert conjugate_cylinder_exists(P, 3, 4) == (False, None)

    @pytest.mark.parametrize("n", [6, 10, 12])
    def test_every_bin_has_verified_witness(self, n):
        table = enumerate_cylinders(P, n)
        for k in sorted(set(table.net_counts.tolist())):
            ok, w = conjugate_cylinder_exists(P, n, int(k), table=table)
            assert ok and w is not None
            orb = orbit(w, n, P)
            assert orb.itinerary_string.count("D") - orb.itinerary_string.count("A") == -k

    def test_witness_inside_its_cylinder(self):
        table = enumerate_cylinders(Params(0.13), 7)
        for i in range(0, len(table), 7):
            w = cylinder_witness(table, i)
            assert orbit(w, 7, Params(0.13)).itinerary_string == table.itinerary(i)


class TestSteadyMean:
    def test_equilibrium(self):
        assert steady_state_mean_contraction(Params(0.25), {"P_D": 0.3, "CDCD": 0.2}) == 0.0

    def test_examples(self):
        v = steady_state_mean_contraction(Params(0.1), {"P_D": 0.8, "CDCD": 0.0})
        assert v == pytest.approx(0.8 * -math.log(0.4), abs=1e-15)
        v = steady_state_mean_contraction(P, {"P_D": 0.5, "CDCD": 0.3})
        assert v == pytest.approx(0.2231435513142097 * 0.65, abs=1e-15)

    def test_rejects_bad_measures(self):
        with pytest.raises(ParameterError):
            steady_state_mean_contraction(P, {"P_D": -0.1})
        with pytest.raises(ParameterError):
            steady_state_mean_contraction(P, {"P_D": 0.8, "CDCD": 0.5})
