from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conflab.dynsys import (
    ContinuedFraction,
    ExactCirclePoint,
    FiniteCycle,
    Inverse,
    Point,
    RationalRotation,
    Rotation,
    SpaceMismatch,
    SquaringMap,
    circle_distance,
    orbit_segment,
    step,
    system_from_spec,
)

from conftest import GOLDEN, SILVER


def coords(points):
    return [p.coordinate for p in points]


class TestStep:
    def test_cycle_wraps_last_index_to_first(self):
        c = FiniteCycle(3)
        assert step(c, c.point(3)).coordinate == 1

    def test_cycle_backward_wraps_first_to_last(self):
        c = FiniteCycle(3)
        assert step(c, c.point(1), "backward").coordinate == 3

    def test_squaring_forward_and_backward(self):
        s = SquaringMap()
        assert step(s, s.point(0.5)).coordinate == 0.25
        assert step(s, s.point(0.5), "backward").coordinate == pytest.approx(0.70710678, abs=1e-8)

    def test_rotation_adds_alpha(self, golden):
        assert step(golden, golden.point(0.5)).coordinate == pytest.approx((0.5 + GOLDEN) % 1, abs=1e-15)

    def test_space_mismatch_is_typed(self, golden):
        with pytest.raises(SpaceMismatch):
            step(golden, FiniteCycle(3).point(1))

    def test_bad_direction(self, golden):
        with pytest.raises(ValueError):
            step(golden, golden.point(0.1), "sideways")

    def test_exact_point_moves_by_index(self, golden):
        p = golden.point(ExactCirclePoint(Fraction(1, 3), 0))
        q = step(golden, p)
        assert q.coordinate == ExactCirclePoint(Fraction(1, 3), 1)


class TestRationalRejected:
    def test_empty_period(self):
        with pytest.raises(RationalRotation):
            ContinuedFraction((0, 4), ())

    def test_nonpositive_quotient(self):
        with pytest.raises(ValueError):
            ContinuedFraction((0,), (0,))


class TestOrbitSegment:
    def test_period_two_cycle(self):
        c = FiniteCycle(2)
        assert coords(orbit_segment(c, c.point(1), 1, 2)) == [2, 1, 2, 1]

    def test_golden_rotation_from_zero(self, golden):
        got = coords(orbit_segment(golden, golden.point(0.0), 0, 2))
        assert got == pytest.approx([0.0, GOLDEN, 2 * GOLDEN - 1], abs=1e-15)

    def test_repeated_squaring(self):
        s = SquaringMap()
        got = coords(orbit_segment(s, s.point(0.9), 0, 3))
        assert got == pytest.approx([0.9, 0.81, 0.6561, 0.43046721], abs=1e-15)

    def test_negative_window_rejected(self, golden):
        with pytest.raises(ValueError):
            orbit_segment(golden, golden.point(0.1), -1, 2)


class TestCircleDistance:
    @pytest.mark.parametrize("a,b,d", [(0.1, 0.9, 0.2), (0.3, 0.3, 0.0), (0.0, 0.5, 0.5)])
    def test_examples(self, a, b, d):
        assert circle_distance(a, b) == pytest.approx(d, abs=1e-15)

    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_symmetric_and_bounded(self, a, b):
        d = circle_distance(a, b)
        assert 0.0 <= d <= 0.5
        assert d == pytest.approx(circle_distance(b, a), abs=1e-12)


class TestContinuedFraction:
    def test_golden_convergents_are_fibonacci_ratios(self):
        it = ContinuedFraction.named("golden").convergents()
        got = [next(it) for _ in range(8)]
        fib = [1, 1, 2, 3, 5, 8, 13, 21, 34]
        assert got == [(fib[i], fib[i + 1]) for i in range(8)]

    def test_values_match_closed_forms(self):
        assert float(ContinuedFraction.named("golden").value(40)) == pytest.approx(GOLDEN, abs=1e-16)
        assert float(ContinuedFraction.named("silver").value(40)) == pytest.approx(SILVER, abs=1e-16)

    def test_convergents_satisfy_dirichlet_bound(self):
        a = (mpmath.sqrt(5) - 1) / 2
        it = ContinuedFraction.named("golden").convergents()
        for _ in range(25):
            p, q = next(it)
            assert abs(a - mpmath.mpf(p) / q) < mpmath.mpf(1) / q**2

    def test_semiconvergents_include_convergents(self):
        cf = ContinuedFraction.named("silver")
        conv = set()
        it = cf.convergents()
        for _ in range(6):
            conv.add(next(it))
        semi = set()
        it = cf.semiconvergents()
        for _ in range(20):
            semi.add(next(it))
        assert conv <= semi


class TestRotationArithmetic:
    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1, exclude_max=True), st.integers(-10**6, 10**6))
    def test_iterate_matches_high_precision(self, x, k):
        r = Rotation.named("golden")
        got = float(r.iterate(x, [k])[0])
        with mpmath.workdps(40):
            v = mpmath.mpf(x) + k * (mpmath.sqrt(5) - 1) / 2
            want = float(v - mpmath.floor(v))
        assert circle_distance(got, want) < 1e-14

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1, exclude_max=True), st.integers(0, 500), st.integers(0, 500))
    def test_group_law(self, x, j, k):
        r = Rotation.named("silver")
        a = r.iterate(r.iterate(x, [j])[0], [k])[0]
        b = r.iterate(x, [j + k])[0]
        assert circle_distance(a, b) < 1e-13

    def test_orbit_is_injective(self, golden):
        pts = golden.orbit(0.1, 1000, 1000)
        assert np.unique(np.round(pts, 13)).size == pts.size

    def test_forward_then_backward(self, golden):
        x = np.linspace(0, 1, 101, endpoint=False)
        assert np.max(circle_distance(golden.backward(golden.forward(x)), x)) < 1e-15


class TestFiniteCycle:
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(-50, 50))
    def test_iterate_is_cyclic(self, p, x, k):
        x = (x - 1) % p + 1
        c = FiniteCycle(p)
        assert c.iterate(x, [k])[0] == (x - 1 + k) % p + 1
        assert c.iterate(x, [k + p])[0] == c.iterate(x, [k])[0]

    def test_bad_index(self):
        with pytest.raises(ValueError):
            Point("cycle:3", 4)


def test_inverse_swaps_directions(golden):
    inv = Inverse(golden)
    x = np.array([0.2, 0.7])
    assert np.allclose(inv.forward(x), golden.backward(x))
    assert np.allclose(inv.iterate(0.2, [3]), golden.iterate(0.2, [-3]))


def test_squaring_orbit_collapses_to_fixed_points():
    s = SquaringMap()
    assert s.orbit(0.5, 0, 40)[-1] == 0.0
    assert s.orbit(0.5, 80, 0)[0] == pytest.approx(1.0, abs=2e-16)
    assert s.period_of(0.0) == 1 and s.period_of(0.5) is None


def test_interval_point_out_of_range():
    with pytest.raises(ValueError):
        SquaringMap().point(1.5)


class TestSystemFromSpec:
    def test_named_rotation(self):
        assert system_from_spec({"kind": "rotation", "alpha": "golden"}).alpha == pytest.approx(GOLDEN)

    def test_head_period_rotation(self):
        s = system_from_spec({"kind": "rotation", "head": [0], "period": [2]})
        assert s.alpha == pytest.approx(SILVER)

    def test_unknown_kind_names_field(self):
        with pytest.raises(ValueError, match="system.kind"):
            system_from_spec({"kind": "tent"})

    def test_conjugated_rotation_is_a_homeomorphism(self):
        s = system_from_spec({"kind": "conjugated_rotation", "alpha": "golden", "c": 0.1})
        x = np.linspace(0, 1, 200, endpoint=False)
        assert np.max(circle_distance(s.backward(s.forward(x)), x)) < 1e-12
