import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conflab.dynsys import FiniteCycle, Rotation, SquaringMap
from conflab.potential import (
    Coboundary,
    Constant,
    NoSolution,
    Polynomial,
    Table,
    TrigPoly,
    evaluate,
    invariant_integral,
    potential_from_spec,
    solve_coboundary_fourier,
    truncation_tail_bound,
)

from conftest import GOLDEN

COS = TrigPoly.from_terms(cos={1: 1.0})


def test_constant_everywhere(golden):
    assert evaluate(Constant(1.0), golden.point(0.37)) == 1.0


def test_trig_poly_matches_numpy():
    F = TrigPoly.from_terms(cos={1: 0.5, 3: -1.0}, sin={2: 2.0}, const=0.25)
    x = np.linspace(0, 1, 57)
    want = 0.25 + 0.5 * np.cos(2 * np.pi * x) - np.cos(6 * np.pi * x) + 2 * np.sin(4 * np.pi * x)
    assert np.allclose(F(x), want, atol=1e-14)


def test_coboundary_definition(golden):
    F = Coboundary(COS, golden)
    x = np.linspace(0, 1, 33)
    want = np.cos(2 * np.pi * (x + GOLDEN)) - np.cos(2 * np.pi * x)
    assert np.allclose(F(x), want, atol=1e-13)


def test_coboundary_orbit_values_telescope(golden):
    F = Coboundary(COS, golden)
    v = F.values_at(golden, 0.3, np.arange(0, 500))
    assert math.fsum(v.tolist()) == pytest.approx(
        math.cos(2 * math.pi * ((0.3 + 500 * GOLDEN) % 1)) - math.cos(2 * math.pi * 0.3), abs=1e-10)


def test_table_exact_values():
    c = FiniteCycle(3)
    T = Table((Fraction(1), Fraction(-1, 2), Fraction(-1, 2)))
    assert T.exact_value(c, 2) == Fraction(-1, 2)
    assert np.allclose(T(np.array([1, 2, 3])), [1, -0.5, -0.5])


def test_polynomial_on_interval():
    P = Polynomial((-0.5, 1.0))
    assert evaluate(P, SquaringMap().point(0.25)) == -0.25


class TestFourierSolve:
    def test_cos_coefficients(self, golden):
        h = solve_coboundary_fourier(COS, golden)
        want = 0.5 / (cmath.exp(2j * math.pi * GOLDEN) - 1)
        assert abs(h.coefficient(1) - want) < 1e-14
        assert abs(h.coefficient(-1) - want.conjugate()) < 1e-14

    def test_solution_solves_equation(self, golden):
        F = TrigPoly.from_terms(cos={1: 1.0, 2: -0.3}, sin={5: 0.7})
        h = solve_coboundary_fourier(F, golden)
        x = np.arange(4096) / 4096
        assert np.max(np.abs(h(golden.forward(x)) - h(x) - F(x))) < 1e-10

    def test_zero_gives_zero(self, golden):
        h = solve_coboundary_fourier(TrigPoly.from_terms(), golden)
        assert np.all(h(np.linspace(0, 1, 9)) == 0)

    def test_constant_has_no_solution(self, golden):
        out = solve_coboundary_fourier(Constant(1.0), golden)
        assert isinstance(out, NoSolution) and out.reason == "nonzero mean"

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=5),
           st.lists(st.floats(-2, 2), min_size=1, max_size=5))
    def test_random_zero_mean_polys(self, a, b):
        rot = Rotation.named("silver")
        F = TrigPoly.from_terms(cos={i + 1: v for i, v in enumerate(a)},
                                sin={i + 1: v for i, v in enumerate(b)})
        h = solve_coboundary_fourier(F, rot)
        x = np.arange(1024) / 1024
        assert np.max(np.abs(h(rot.forward(x)) - h(x) - F(x))) < 1e-9


class TestInvariantIntegral:
    def test_trig_mean(self, golden):
        F = TrigPoly.from_terms(cos={1: 1.0}, const=0.3)
        assert invariant_integral(golden, F) == pytest.approx(0.3, abs=1e-15)

    def test_cycle_average(self):
        c = FiniteCycle(4)
        assert invariant_integral(c, Table((1, 2, 3, 6))) == pytest.approx(3.0)


class TestSpec:
    def test_kinds(self, golden):
        assert isinstance(potential_from_spec({"kind": "constant", "c": 2}, golden), Constant)
        F = potential_from_spec({"kind": "coboundary", "H": {"kind": "trig", "cos": {"1": 1.0}}}, golden)
        assert isinstance(F, Coboundary)

    def test_negate_and_scale(self):
        s = SquaringMap()
        F = potential_from_spec({"kind": "polynomial", "coeffs": [-0.5, 1.0], "negate": True,
                                 "scale": 2.0}, s)
        assert F(np.array([0.0]))[0] == pytest.approx(1.0)

    def test_unknown_kind(self, golden):
        with pytest.raises(ValueError, match="potential.kind"):
            potential_from_spec({"kind": "bogus"}, golden)


def test_exact_kinds_have_zero_tail():
    assert truncation_tail_bound(Constant(1.0)) == 0.0
    assert truncation_tail_bound(COS) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linear_combinations_evaluate_pointwise(a, b):
    F = a * COS + b * Constant(1.0)
    x = np.linspace(0, 1, 11)
    assert np.allclose(F(x), a * np.cos(2 * np.pi * x) + b, atol=1e-12)
