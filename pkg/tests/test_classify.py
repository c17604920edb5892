import math

import numpy as np
import pytest

from conflab.classify import (
    SupportMismatch,
    TypeVerdict,
    cesaro_weight_liminf,
    classify_measure,
    factor_report,
    invariant_from_cocycle,
    solve_cocycle,
)
from conflab.conformal import atomic_periodic, atomic_summable, coboundary_conformal_density, hopf_construct
from conflab.dynsys import FiniteCycle
from conflab.potential import Coboundary, Constant, Table, TrigPoly

COS = TrigPoly.from_terms(cos={1: 1.0})


def verdict(label, period=None):
    return TypeVerdict(label, period, {}, {})


class TestFactorReport:
    def test_type_one_infinity(self):
        assert factor_report(verdict("I_infinity"))["factor"] == "factor of type I_∞"

    def test_type_two_one(self):
        assert factor_report(verdict("II_1"))["factor"] == "factor of type II_1"

    def test_periodic_is_not_a_factor(self):
        assert factor_report(verdict("I_p", 3))["factor"] == "not a factor; M_3(C)⊗L^∞(T)"

    def test_undecided_pair(self):
        assert "II_∞ or III" in factor_report(verdict("II_inf_or_III"))["factor"]


class TestClassify:
    def test_periodic_orbit(self):
        c = FiniteCycle(2)
        F = Table((1, -1))
        m = atomic_periodic(c, F, 1, 2, 1.0)
        v = classify_measure(m, c, F, 1.0)
        assert (v.label, v.period) == ("I_p", 2)

    def test_density_on_coboundary(self, golden):
        F = Coboundary(COS, golden)
        m = coboundary_conformal_density(COS, golden, 1.0)
        assert classify_measure(m, golden, F, 1.0, horizon=10**4).label == "II_1"

    def test_summable_orbit(self, golden, appendix_a):
        m = atomic_summable(golden, appendix_a, 0.1, -1.0, N=10**5)
        assert classify_measure(m, golden, appendix_a, -1.0).label == "I_infinity"

    def test_bounded_sums_never_type_one(self, golden):
        F = Coboundary(COS, golden)
        rep = hopf_construct(golden, F, 0.1, 1.0, max_horizon=10**4)
        v = classify_measure(rep.measure, golden, F, 1.0, horizon=10**4)
        assert v.label not in ("I_p", "I_infinity")

    def test_rejects_other_objects(self, golden):
        with pytest.raises(TypeError):
            classify_measure(object(), golden, COS, 1.0)


def test_cesaro_liminf_constant_weights():
    rows = cesaro_weight_liminf(np.zeros(1001), 1000)
    assert [h for h, _ in rows] == [250, 500, 1000]
    assert all(v == pytest.approx(1.0) for _, v in rows)


class TestCocycle:
    def test_coboundary_telescopes(self, golden):
        F = Coboundary(COS, golden)
        sol = solve_cocycle(golden, 0.1, F, 1.0, (500, 500))
        h_direct = np.cos(2 * np.pi * golden.orbit(0.1, 500, 500)) - math.cos(2 * math.pi * 0.1)
        assert np.max(np.abs(sol.h - h_direct)) < 1e-10
        assert np.max(np.abs(sol.h)) <= 2.0
        assert sol.telescoping_residual() < 1e-12

    def test_zero(self, golden):
        sol = solve_cocycle(golden, 0.1, Constant(0.0), 1.0, (10, 10))
        assert np.all(sol.h == 0)

    def test_constant_is_linear(self, golden):
        sol = solve_cocycle(golden, 0.1, Constant(1.0), 1.0, (10, 10))
        assert np.allclose(sol.h, np.arange(-10, 11))


class TestInvariantFromCocycle:
    def test_cycle_gives_counting_measure(self):
        c = FiniteCycle(3)
        F = Table((2, -1, -1))
        m = atomic_periodic(c, F, 1, 3, 1.0)
        sol = solve_cocycle(c, 1, F, 1.0, (0, 2))
        est = invariant_from_cocycle(m, sol, c)
        w = np.exp(est.log_weights - np.max(est.log_weights))
        assert np.allclose(w, 1.0) and est.trend == "finite"
        assert max(est.invariance_residual.values()) < 1e-12

    def test_coboundary_mass_is_finite(self, golden):
        # int e^{-h} dm = e^{H(x)} / I_0(1) for the density e^{H}/I_0(1)
        import mpmath
        F = Coboundary(COS, golden)
        m = hopf_construct(golden, F, 0.1, 1.0, ratio_tol=1e-5).measure
        sol = solve_cocycle(golden, 0.1, F, 1.0, (-int(m.ks.min()), int(m.ks.max())))
        est = invariant_from_cocycle(m, sol, golden)
        want = math.exp(math.cos(0.2 * math.pi)) / float(mpmath.besseli(0, 1))
        assert est.trend == "finite"
        assert all(v == pytest.approx(want, abs=1e-3) for _, v in est.masses)
        assert max(est.invariance_residual.values()) < 1e-3

    def test_summable_mass_diverges(self, golden, appendix_a):
        m = atomic_summable(golden, appendix_a, 0.1, -1.0, N=10**5)
        sol = solve_cocycle(golden, 0.1, appendix_a, -1.0, (10**5, 10**5))
        assert invariant_from_cocycle(m, sol).trend == "diverging"

    def test_constant_potential_invariant_weights_are_flat(self, golden):
        F = Constant(1.0)
        rep = hopf_construct(golden, F, 0.1, 1.0, max_horizon=2048, min_horizon=2048)
        m = rep.measure
        sol = solve_cocycle(golden, 0.1, F, 1.0, (-int(m.ks.min()), int(m.ks.max())))
        est = invariant_from_cocycle(m, sol)
        w = np.exp(est.log_weights - np.max(est.log_weights))
        assert np.allclose(w, 1.0)
        assert est.trend != "finite"

    def test_support_mismatch(self, golden):
        c = FiniteCycle(3)
        F = Table((2, -1, -1))
        m = atomic_periodic(c, F, 1, 3, 1.0)
        with pytest.raises(SupportMismatch):
            invariant_from_cocycle(m, solve_cocycle(c, 1, F, 1.0, (0, 1)))
