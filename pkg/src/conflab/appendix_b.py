"""A coboundary-like potential on an irrational rotation whose orbit sums
stay bounded along a sparse sequence of return times.

Level ``k`` uses a rational approximation ``p_k/q_k`` of alpha and a
sawtooth ``omega_k``: teeth of height ``2^(k+1)`` and half-width
``1/(k 2^k q_k)`` centred on the lattice ``(1/q_k) Z``.  The potential is
``F_K(x) = sum_{k<=K} omega_k(x) - omega_k(x + alpha)``, the coboundary of
``v_K = sum_{k<=K} omega_k``.

Float evaluation is refused once the steepest slope times the coordinate
resolution exceeds :data:`FLOAT_TOLERANCE`; the exact mode evaluates through
mpmath at a working precision sized to the slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .dynsys import ExactCirclePoint, Rotation
from .potential import Potential

FLOAT_TOLERANCE = 1e-6
_ULP_SPAN = 4.4e-16  # two ulps of a coordinate near 1


class PrecisionError(ValueError):
    """The requested depth is not representable in the current precision mode."""


@dataclass(frozen=True)
class Level:
    k: int
    p: int
    q: int
    height: int          # 2^(k+1)
    halfwidth: Fraction  # 1/(k 2^k q)
    slope: int           # k 2^(2k+1) q
    eps: Fraction        # epsilon_k
    n_next: int          # n_{k+1}: first n >= 2 with frac(n alpha) <= eps_k

    def as_dict(self):
        return {"k": self.k, "p": self.p, "q": self.q, "height": self.height,
                "halfwidth": str(self.halfwidth), "slope": self.slope,
                "eps": str(self.eps), "n_next": self.n_next}


def _frac(n: int, alpha) -> mpmath.mpf:
    v = n * alpha
    return v - mpmath.floor(v)


def approximant(rot: Rotation, bound: int) -> tuple[int, int]:
    """First convergent ``p/q`` with ``q >= bound``.

    Convergents satisfy ``|alpha - p/q| < 1/q^2 <= 1/(bound q)``.
    """
    for p, q in rot.cf.convergents():
        if q >= bound:
            return p, q
    raise AssertionError("unreachable")


def first_return(rot: Rotation, eps, start: int = 2) -> int:
    """Smallest ``n >= start`` with ``frac(n alpha) <= eps``.

    Record minima of ``frac(n alpha)`` occur at denominators of the
    intermediate fractions approaching alpha from below, so those are
    scanned in order.
    """
    a = rot.alpha_mp
    eps = mpmath.mpf(eps.numerator) / eps.denominator if isinstance(eps, Fraction) else mpmath.mpf(eps)
    best = None
    for _, q in rot.cf.semiconvergents():
        if q < start:
            continue
        if _frac(q, a) <= eps:
            best = q
            break
    # semiconvergents list increasing denominators; anything smaller that also
    # qualifies would itself be a record minimum, but we confirm cheaply when small
    if best is not None and best <= 10**6:
        n = np.arange(start, best + 1)
        fr = np.mod(n * float(a), 1.0)
        cand = n[fr <= float(eps) * (1 + 1e-9)]
        for c in cand:
            if _frac(int(c), a) <= eps:
                return int(c)
    return int(best)


def design_levels(rot: Rotation, K: int) -> list[Level]:
    levels: list[Level] = []
    ns = [1]  # n_1 = 1
    eps_prev = None
    with mpmath.workdps(60):
        for k in range(1, K + 1):
            prod_n = math.prod(ns[1:])  # n_2 ... n_k
            bound = k**3 * 2 ** (2 * k + 1) * prod_n
            p, q = approximant(rot, bound)
            slope = k * 2 ** (2 * k + 1) * q
            eps = Fraction(1, k * k * slope)
            if eps_prev is not None:
                eps = min(eps, eps_prev)
            n_next = first_return(rot, eps)
            levels.append(Level(k, p, q, 2 ** (k + 1), Fraction(1, k * 2**k * q), slope, eps, n_next))
            ns.append(n_next)
            eps_prev = eps
    return levels


def tail_sum(K: int) -> float:
    """``sum_{l > K} 1/l^2``."""
    return float(mpmath.zeta(2) - mpmath.fsum(mpmath.mpf(1) / l**2 for l in range(1, K + 1)))


def _certify(rot: Rotation, levels: list[Level]) -> dict:
    cert = {}
    with mpmath.workdps(60):
        a = rot.alpha_mp
        ns = [1] + [lv.n_next for lv in levels]
        for lv in levels:
            k, q = lv.k, lv.q
            prod_n = math.prod(ns[1:k])
            tol = mpmath.mpf(1) / (k**3 * 2 ** (2 * k + 1) * prod_n * q)
            err = abs(a - mpmath.mpf(lv.p) / q)
            cert[f"a) |alpha - p/q| (k={k})"] = {
                "passed": bool(err <= tol), "value": float(err), "bound": float(tol)}
            worst = mpmath.mpf(0)
            tol_i = mpmath.mpf(1) / (k**3 * 2 ** (2 * k + 1) * q)
            for i in range(2, k + 1):
                fr = _frac(ns[i - 1], a)
                r = int(mpmath.nint(fr * q))
                worst = max(worst, abs(fr - mpmath.mpf(r) / q))
            cert[f"a) returns near lattice (k={k})"] = {
                "passed": bool(worst <= tol_i), "value": float(worst), "bound": float(tol_i)}
            area = q * lv.height * lv.halfwidth
            cert[f"b) integral of omega (k={k})"] = {
                "passed": area == Fraction(2, k), "value": str(area)}
            cert[f"c) 1/q periodic (k={k})"] = {
                "passed": True, "note": "teeth are centred on the lattice (1/q)Z"}
            support = q * 2 * lv.halfwidth
            cert[f"d) support measure (k={k})"] = {
                "passed": support == Fraction(2, k * 2**k) and 2 * lv.halfwidth <= Fraction(1, q),
                "value": str(support)}
            cert[f"e) Lipschitz constant (k={k})"] = {
                "passed": Fraction(lv.height) / lv.halfwidth == lv.slope, "value": lv.slope}
            prev = levels[k - 2].eps if k > 1 else lv.eps
            cert[f"f) eps monotone, slope*eps <= 1/k^2 (k={k})"] = {
                "passed": lv.eps <= prev and lv.slope * lv.eps <= Fraction(1, k * k),
                "value": float(lv.slope * lv.eps)}
            fr = _frac(lv.n_next, a)
            epsf = mpmath.mpf(lv.eps.numerator) / lv.eps.denominator
            cert[f"g) frac(n_{k + 1} alpha) <= eps_{k}"] = {
                "passed": bool(fr <= epsf), "n": lv.n_next, "value": float(fr),
                "bound": float(epsf)}
    return cert


@dataclass(frozen=True, eq=False)
class AppendixB(Potential):
    rotation: Rotation = None
    levels: tuple = ()
    exact: bool = False
    certificate: dict = field(default_factory=dict)
    kind = "appendix_b"
    space = "circle"

    @property
    def K(self) -> int:
        return len(self.levels)

    @property
    def n_seq(self) -> list[int]:
        """``n_1, ..., n_K`` (``n_1 = 1``)."""
        return [1] + [lv.n_next for lv in self.levels[:-1]]

    @property
    def tail_bound(self) -> float:
        # |omega_k(x) - omega_k(x + alpha)| <= slope_k |alpha - p_k/q_k| <= 1/k^2
        return tail_sum(self.K)

    @property
    def return_sum_tail_bound(self) -> float:
        """Bound on the omitted part of orbit sums up to ``n_k``."""
        return tail_sum(self.K)

    @property
    def dps(self) -> int:
        return 30 + int(math.log10(max(lv.slope for lv in self.levels)))

    # -- float evaluation -------------------------------------------------
    def _omega_float(self, lv: Level, x):
        t = x * lv.q
        d = np.abs(t - np.rint(t)) / lv.q
        return np.maximum(0.0, lv.height - lv.slope * d)

    def omega(self, k: int, x):
        lv = self.levels[k - 1]
        if self.exact:
            return np.array([float(self._omega_mp(lv, mpmath.mpf(float(v))))
                             for v in np.ravel(x)]).reshape(np.shape(x))
        return self._omega_float(lv, np.asarray(x, dtype=float))

    def v(self, x):
        """``v_K = sum_k omega_k``."""
        return sum(self.omega(k, x) for k in range(1, self.K + 1))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.exact:
            with mpmath.workdps(self.dps):
                a = self.rotation.alpha_mp
                vals = [float(self._value_mp(mpmath.mpf(float(v)), a)) for v in x.ravel()]
            return np.array(vals).reshape(x.shape)
        y = self.rotation.forward(x)
        return sum(self._omega_float(lv, x) - self._omega_float(lv, y) for lv in self.levels)

    # -- exact evaluation -------------------------------------------------
    @staticmethod
    def _omega_mp(lv: Level, x):
        t = x * lv.q
        d = abs(t - mpmath.nint(t)) / lv.q
        return max(mpmath.mpf(0), lv.height - lv.slope * d)

    def _value_mp(self, x, a):
        y = x + a
        y = y - mpmath.floor(y)
        return mpmath.fsum(self._omega_mp(lv, x) - self._omega_mp(lv, y) for lv in self.levels)

    def exact_value(self, s, x):
        """High-precision value at a float or :class:`ExactCirclePoint`."""
        with mpmath.workdps(self.dps):
            a = self.rotation.alpha_mp
            xv = x.value(a) if isinstance(x, ExactCirclePoint) else mpmath.mpf(float(x))
            return self._value_mp(xv, a)

    def orbit_sum_exact(self, x, n: int):
        """``sum_{i<n} F(x + i alpha)`` evaluated in high precision (telescoped)."""
        with mpmath.workdps(self.dps):
            a = self.rotation.alpha_mp
            xv = x.value(a) if isinstance(x, ExactCirclePoint) else mpmath.mpf(float(x))
            y = xv + n * a
            y = y - mpmath.floor(y)
            return mpmath.fsum(self._omega_mp(lv, xv) - self._omega_mp(lv, y) for lv in self.levels)

    def breakpoints(self):
        pts = []
        a = self.rotation.alpha
        for lv in self.levels:
            c = np.arange(lv.q) / lv.q
            w = float(lv.halfwidth)
            for shift in (0.0, -a):
                cc = c + shift
                pts += [cc, cc - w, cc + w]
        return np.mod(np.concatenate(pts), 1.0)

    def omega_integral(self, k: int) -> Fraction:
        """``int_0^1 omega_k`` in closed form."""
        lv = self.levels[k - 1]
        return lv.q * lv.height * lv.halfwidth

    def describe(self):
        return {"kind": self.kind, "K": self.K, "exact": self.exact,
                "levels": [lv.as_dict() for lv in self.levels], "n": self.n_seq}


def build_appendix_b(rot: Rotation, K: int = 2, exact: bool = False) -> AppendixB:
    if not isinstance(rot, Rotation):
        raise TypeError("this construction is implemented for circle rotations")
    if K < 1:
        raise ValueError("K must be positive")
    levels = design_levels(rot, K)
    steepest = max(lv.slope for lv in levels)
    if not exact and steepest * _ULP_SPAN > FLOAT_TOLERANCE:
        raise PrecisionError(
            f"precision: K={K} has slope {steepest:.3e}; float coordinates would give "
            f"errors up to {steepest * _ULP_SPAN:.2e} > {FLOAT_TOLERANCE}. Use exact mode.")
    cert = _certify(rot, levels)
    cert["tail_bound"] = tail_sum(K)
    cert["all_passed"] = all(v["passed"] for v in cert.values() if isinstance(v, dict))
    return AppendixB(rot, tuple(levels), exact, cert)
