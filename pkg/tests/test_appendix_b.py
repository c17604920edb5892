"""Sawtooth counterexample potential on the golden rotation.

Oracles are brute-force scans and closed-form series, computed here
without touching the construction code.
"""

from fractions import Fraction

import mpmath
import numpy as np
import pytest

from conflab.appendix_b import PrecisionError, build_appendix_b
from conflab.dynsys import ExactCirclePoint
from conflab.potential import invariant_integral

with mpmath.workdps(50):
    ALPHA = (mpmath.sqrt(5) - 1) / 2


def frac(n, a=None):
    with mpmath.workdps(50):
        v = n * (ALPHA if a is None else a)
        return v - mpmath.floor(v)


def brute_first_denominator(k, limit=200):
    """Smallest q >= k^3 2^(2k+1) with some p inside the Dirichlet bound (k = 1)."""
    lo = k**3 * 2 ** (2 * k + 1)
    for q in range(lo, limit):
        p = int(mpmath.nint(ALPHA * q))
        if abs(ALPHA - mpmath.mpf(p) / q) <= mpmath.mpf(1) / (k**3 * 2 ** (2 * k + 1) * q):
            return p, q
    raise AssertionError("no denominator found")


def brute_first_return(eps, limit):
    for n in range(2, limit):
        if frac(n) <= eps:
            return n
    raise AssertionError("no return found")


def test_first_level_denominator(appendix_b):
    p, q = brute_first_denominator(1)
    lv = appendix_b.levels[0]
    assert (lv.p, lv.q) == (p, q) == (5, 8)
    assert abs(ALPHA - mpmath.mpf(5) / 8) == pytest.approx(0.00697, abs=1e-5)


def test_second_return_time_by_brute_force(appendix_b):
    eps = mpmath.mpf(1) / (8 * 8)
    assert brute_first_return(eps, 1000) == appendix_b.levels[0].n_next == 34


def test_third_return_time_by_scan(appendix_b):
    lv = appendix_b.levels[1]
    assert lv.q == 10946 and lv.slope == 700544
    n = np.arange(2, 1_400_000, dtype=np.float64)
    a = float(ALPHA)
    fr = np.mod(n * a, 1.0)          # float error below 1e-9 here
    eps = float(lv.eps)
    hits = n[fr <= eps]
    assert int(hits[0]) == lv.n_next == 1346269
    assert float(frac(lv.n_next)) <= eps


def test_sawtooth_integrals_are_exact(appendix_b):
    for k in (1, 2):
        assert appendix_b.omega_integral(k) == Fraction(2, k)


def test_sawtooth_integral_by_quadrature(appendix_b):
    x = (np.arange(2**18) + 0.5) / 2**18
    assert np.mean(appendix_b.omega(1, x)) == pytest.approx(2.0, abs=1e-9)


def test_value_at_zero(golden, appendix_b):
    # teeth of level 1 tile the circle; 0 is a peak and alpha sits on a slope
    F1 = build_appendix_b(golden, K=1)
    want = float(64 * abs(ALPHA - mpmath.mpf(5) / 8))
    assert float(F1(np.array([0.0]))[0]) == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(0.445825, abs=1e-6)
    # the second level adds slope_2 |alpha - p_2/q_2|, again a peak at 0
    extra = float(700544 * abs(ALPHA - mpmath.mpf(6765) / 10946))
    assert float(appendix_b(np.array([0.0]))[0]) == pytest.approx(want + extra, abs=1e-9)


def test_invariant_integral_vanishes(golden, appendix_b):
    assert abs(invariant_integral(golden, appendix_b)) <= 1e-6


def test_return_sums_bounded_on_grid(golden, appendix_b):
    n2 = appendix_b.levels[0].n_next
    x = np.arange(10**4) / 10**4
    acc = np.zeros_like(x)
    for i in range(n2):
        acc += appendix_b(golden.iterate(0.0, [i])[0] + x)
    assert np.max(np.abs(acc)) <= 1.25 + 1e-9


def test_tail_bound_series(appendix_b):
    want = float(mpmath.zeta(2) - 1 - mpmath.mpf(1) / 4)
    assert appendix_b.tail_bound == pytest.approx(want, abs=1e-15)
    assert appendix_b.tail_bound == pytest.approx(0.39493, abs=1e-5)
    assert appendix_b.return_sum_tail_bound == appendix_b.tail_bound


def test_certificate_passes(appendix_b):
    cert = appendix_b.certificate
    assert cert["all_passed"]
    assert all(v["passed"] for k, v in cert.items() if isinstance(v, dict) and "passed" in v)


def test_float_mode_refuses_deep_levels(golden):
    with pytest.raises(PrecisionError, match="precision"):
        build_appendix_b(golden, K=3)
    with pytest.raises(PrecisionError, match="precision"):
        build_appendix_b(golden, K=4)


def test_exact_mode_reaches_level_three(golden):
    F = build_appendix_b(golden, K=3, exact=True)
    assert F.levels[2].n_next > F.levels[1].n_next
    F2 = build_appendix_b(golden, K=2)
    F2x = build_appendix_b(golden, K=2, exact=True)
    x = np.linspace(0, 1, 50, endpoint=False)
    assert np.max(np.abs(F2(x) - F2x(x))) < 1e-8


def test_exact_orbit_sum_telescopes(golden):
    F = build_appendix_b(golden, K=2, exact=True)
    p = ExactCirclePoint(Fraction(1, 7), 0)
    with mpmath.workdps(F.dps):
        direct = mpmath.fsum(F.exact_value(golden, p.shifted(i)) for i in range(34))
        assert abs(direct - F.orbit_sum_exact(p, 34)) < 1e-20
