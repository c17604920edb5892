"""Compact spaces and homeomorphisms: irrational rotations, finite cycles,
the squaring map on [0, 1] and smooth conjugates of rotations.

Every system exposes vectorised coordinate-level maps (``forward``,
``backward``, ``iterate``, ``orbit``) used by the numerical modules, plus
the :class:`Point`-level helpers :func:`step` and :func:`orbit_segment`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import mpmath
import numpy as np

CIRCLE = "circle"
INTERVAL = "interval"


class SpaceMismatch(ValueError):
    """A point was handed to a system living on a different space."""


class RationalRotation(ValueError):
    """A rotation number was declared rational."""


# ---------------------------------------------------------------------------
# points and distances


def reduce_mod1(x):
    """Reduce into [0, 1); guards the ``-tiny mod 1 == 1.0`` rounding case."""
    y = np.mod(x, 1.0)
    if np.ndim(y) == 0:
        return 0.0 if y >= 1.0 else float(y)
    y[y >= 1.0] = 0.0
    return y


def circle_distance(a, b):
    """Arc distance on R/Z, in [0, 0.5]."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), 1.0)
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExactCirclePoint:
    """The circle point ``r + n*alpha mod 1`` held exactly."""

    r: Fraction
    n: int

    def shifted(self, k: int) -> "ExactCirclePoint":
        return ExactCirclePoint(self.r, self.n + k)

    def value(self, alpha: mpmath.mpf) -> mpmath.mpf:
        v = mpmath.mpf(self.r.numerator) / self.r.denominator + self.n * alpha
        return v - mpmath.floor(v)


@dataclass(frozen=True)
class Point:
    space_id: str
    coordinate: object

    def __post_init__(self):
        c = self.coordinate
        if self.space_id == CIRCLE:
            if isinstance(c, ExactCirclePoint):
                return
            object.__setattr__(self, "coordinate", reduce_mod1(float(c)))
        elif self.space_id == INTERVAL:
            if not 0.0 <= float(c) <= 1.0:
                raise ValueError(f"interval coordinate {c} outside [0, 1]")
            object.__setattr__(self, "coordinate", float(c))
        elif self.space_id.startswith("cycle:"):
            p = int(self.space_id.split(":")[1])
            if int(c) != c or not 1 <= int(c) <= p:
                raise ValueError(f"finite index {c} outside 1..{p}")
            object.__setattr__(self, "coordinate", int(c))
        else:
            raise ValueError(f"unknown space {self.space_id!r}")


# ---------------------------------------------------------------------------
# continued fractions


NAMED_EXPANSIONS = {
    "golden": ((0,), (1,)),
    "silver": ((0,), (2,)),
    "sqrt2": ((1,), (2,)),
}


@dataclass(frozen=True)
class ContinuedFraction:
    """An eventually periodic expansion ``[head; period, period, ...]``.

    Only the fractional part matters for rotations.  An empty period would
    describe a rational number and is rejected.
    """

    head: tuple
    period: tuple

    def __post_init__(self):
        if not self.period:
            raise RationalRotation("a finite continued fraction is rational")
        if any(int(a) < 1 for a in self.period) or any(int(a) < 1 for a in self.head[1:]):
            raise ValueError("partial quotients after the first must be positive")

    @classmethod
    def named(cls, name: str) -> "ContinuedFraction":
        try:
            head, period = NAMED_EXPANSIONS[name]
        except KeyError:
            raise ValueError(f"unknown named constant {name!r}") from None
        return cls(head, period)

    def quotients(self) -> Iterator[int]:
        yield from self.head
        while True:
            yield from self.period

    def convergents(self) -> Iterator[tuple[int, int]]:
        """Yield ``(p_k, q_k)`` for the fractional part."""
        it = self.quotients()
        next(it)  # integer part is irrelevant mod 1
        p0, q0, p1, q1 = 1, 0, 0, 1
        for a in it:
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
            yield p1, q1

    def semiconvergents(self) -> Iterator[tuple[int, int]]:
        """Convergents and intermediate fractions in increasing denominator."""
        it = self.quotients()
        next(it)
        p0, q0, p1, q1 = 1, 0, 0, 1
        for a in it:
            for t in range(1, a + 1):
                yield t * p1 + p0, t * q1 + q0
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0

    def value(self, dps: int = 50) -> mpmath.mpf:
        """Fractional part to roughly ``dps`` digits."""
        with mpmath.workdps(dps + 10):
            target = mpmath.mpf(10) ** (dps + 5)
            for p, q in self.convergents():
                if q * q > target:
                    return mpmath.mpf(p) / q
        raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class DynSystem:
    """Base class; subclasses implement the coordinate-level maps."""

    minimal: bool = field(default=False, init=False)
    uniquely_ergodic: bool = field(default=False, init=False)
    invariant_measure_known: bool = field(default=False, init=False)

    space_id: str = field(default="", init=False)

    def forward(self, x):
        raise NotImplementedError

    def backward(self, x):
        raise NotImplementedError

    def iterate(self, x0, ks):
        """``phi^k(x0)`` for every integer in ``ks`` (scalar start point)."""
        ks = np.asarray(ks, dtype=np.int64)
        if ks.size == 0:
            return np.empty(0)
        lo, hi = int(ks.min()), int(ks.max())
        seg = self.orbit(x0, max(0, -lo), max(0, hi))
        return seg[ks + max(0, -lo)]

    def orbit(self, x0, n_back: int, m_fwd: int) -> np.ndarray:
        """Coordinates of ``phi^k(x0)`` for ``k = -n_back .. m_fwd``."""
        out = np.empty(n_back + m_fwd + 1, dtype=self._dtype)
        out[n_back] = x0
        x = x0
        for k in range(1, m_fwd + 1):
            x = self.forward(x)
            out[n_back + k] = x
        x = x0
        for k in range(1, n_back + 1):
            x = self.backward(x)
            out[n_back - k] = x
        return out

    _dtype = float

    def period_of(self, x0, limit: int = 0):
        """Minimal period of ``x0`` if it is periodic (only finite systems)."""
        return None

    def contains(self, x: Point) -> bool:
        return x.space_id == self.space_id

    def point(self, coordinate) -> Point:
        return Point(self.space_id, coordinate)

    def invariant_quadrature(self, n: int):
        """Nodes and weights integrating against the invariant measure.

        Only defined for uniquely ergodic systems with a known measure.
        """
        raise NotImplementedError(f"{type(self).__name__} has no unique invariant measure")

    def describe(self) -> dict:
        raise NotImplementedError


def _split26(x: float) -> tuple[float, float]:
    hi = round(x * 2**26) / 2**26
    return hi, x - hi


@dataclass(frozen=True)
class Rotation(DynSystem):
    """``x -> x + alpha mod 1`` with alpha given by its continued fraction.

    Orbits are evaluated as ``x0 + k*alpha`` directly rather than by repeated
    addition.  ``alpha`` is split into a 26-bit head (so ``k*head`` is exact
    for ``|k| < 2**27``) and a tail, which keeps orbit points accurate to a
    few ulp at any index in that range.
    """

    cf: ContinuedFraction = None
    _alpha_mp: mpmath.mpf = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.cf is None:
            raise ValueError("Rotation needs a continued fraction")
        object.__setattr__(self, "minimal", True)
        object.__setattr__(self, "uniquely_ergodic", True)
        object.__setattr__(self, "invariant_measure_known", True)
        object.__setattr__(self, "space_id", CIRCLE)
        a = self.cf.value(60)
        object.__setattr__(self, "_alpha_mp", a)
        hi = round(float(a) * 2**26) / 2**26
        lo = float(a - mpmath.mpf(hi))
        object.__setattr__(self, "_hi", hi)
        object.__setattr__(self, "_lo", lo)

    @classmethod
    def named(cls, name: str) -> "Rotation":
        return cls(ContinuedFraction.named(name))

    @property
    def alpha(self) -> float:
        return self._hi + self._lo

    @property
    def alpha_mp(self) -> mpmath.mpf:
        return self._alpha_mp

    def _shift(self, x, ks):
        ks = np.asarray(ks, dtype=np.int64)
        if ks.size and int(np.abs(ks).max()) >= 2**27:
            raise OverflowError("orbit index beyond the accurate range; use exact mode")
        kf = ks.astype(float)
        head = kf * self._hi
        head = head - np.floor(head)  # exact: head has <= 53 significant bits
        return reduce_mod1((np.asarray(x, dtype=float) + head) + kf * self._lo)

    def forward(self, x):
        return self._shift(x, 1)

    def backward(self, x):
        return self._shift(x, -1)

    def iterate(self, x0, ks):
        return self._shift(x0, ks)

    def orbit(self, x0, n_back, m_fwd):
        return self._shift(float(x0), np.arange(-n_back, m_fwd + 1))

    def exact_point(self, r, n: int = 0) -> ExactCirclePoint:
        return ExactCirclePoint(Fraction(r) % 1, int(n))

    def invariant_quadrature(self, n):
        return np.arange(n) / n, np.full(n, 1.0 / n)

    def describe(self):
        return {"kind": "rotation", "head": list(self.cf.head),
                "period": list(self.cf.period), "alpha": self.alpha}


@dataclass(frozen=True)
class FiniteCycle(DynSystem):
    """The cyclic permutation ``j -> j + 1`` of ``{1, ..., p}`` (``p -> 1``)."""

    p: int = 1
    _dtype = np.int64

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("period must be a positive integer")
        object.__setattr__(self, "minimal", True)
        object.__setattr__(self, "uniquely_ergodic", True)
        object.__setattr__(self, "invariant_measure_known", True)
        object.__setattr__(self, "space_id", f"cycle:{self.p}")

    def forward(self, x):
        return np.mod(x, self.p) + 1

    def backward(self, x):
        return np.mod(np.asarray(x) - 2, self.p) + 1

    def iterate(self, x0, ks):
        return np.mod(int(x0) - 1 + np.asarray(ks, dtype=np.int64), self.p) + 1

    def orbit(self, x0, n_back, m_fwd):
        return self.iterate(x0, np.arange(-n_back, m_fwd + 1))

    def period_of(self, x0, limit=0):
        return self.p

    def invariant_quadrature(self, n=None):
        return np.arange(1, self.p + 1), np.full(self.p, 1.0 / self.p)

    def describe(self):
        return {"kind": "finite_cycle", "p": self.p}


@dataclass(frozen=True)
class SquaringMap(DynSystem):
    """``x -> x**2`` on [0, 1]; fixed points 0 and 1 carry the only ergodic
    invariant measures."""

    def __post_init__(self):
        object.__setattr__(self, "space_id", INTERVAL)

    def forward(self, x):
        return np.square(x)

    def backward(self, x):
        return np.sqrt(x)

    def orbit(self, x0, n_back, m_fwd):
        out = np.empty(n_back + m_fwd + 1)
        out[n_back] = x0
        x = float(x0)
        for k in range(1, m_fwd + 1):
            x = x * x
            out[n_back + k] = x
            if x == 0.0 or x == 1.0:
                out[n_back + k:] = x
                break
        x = float(x0)
        for k in range(1, n_back + 1):
            x = math.sqrt(x)
            out[n_back - k] = x
            if x == 1.0 or x == 0.0:
                out[: n_back - k + 1] = x
                break
        return out

    def period_of(self, x0, limit=0):
        return 1 if float(x0) in (0.0, 1.0) else None

    def describe(self):
        return {"kind": "squaring"}


@dataclass(frozen=True)
class ConjugatedRotation(DynSystem):
    """``h o R_alpha o h^{-1}`` for an increasing circle homeomorphism ``h``.

    The invariant measure is the push-forward of Lebesgue measure by ``h``.
    """

    rotation: Rotation = None
    h: Callable = None
    h_inv: Callable = None
    label: str = "custom"

    def __post_init__(self):
        if self.rotation is None or self.h is None or self.h_inv is None:
            raise ValueError("ConjugatedRotation needs a rotation, h and h_inv")
        object.__setattr__(self, "minimal", True)
        object.__setattr__(self, "uniquely_ergodic", True)
        object.__setattr__(self, "invariant_measure_known", True)
        object.__setattr__(self, "space_id", CIRCLE)

    @classmethod
    def sine(cls, rotation: Rotation, c: float) -> "ConjugatedRotation":
        """``h(t) = t + c sin(2 pi t) / (2 pi)``, increasing when ``|c| < 1``."""
        if not abs(c) < 1:
            raise ValueError("|c| must be < 1 for h to be a homeomorphism")

        def h(t):
            t = np.asarray(t, dtype=float)
            return reduce_mod1(t + c * np.sin(2 * np.pi * t) / (2 * np.pi))

        def h_inv(y):
            y = np.asarray(y, dtype=float)
            t = y.copy()
            for _ in range(60):
                g = t + c * np.sin(2 * np.pi * t) / (2 * np.pi) - y
                t = t - g / (1 + c * np.cos(2 * np.pi * t))
            return reduce_mod1(t)

        return cls(rotation, h, h_inv, label=f"sine:{c}")

    @property
    def alpha(self):
        return self.rotation.alpha

    def forward(self, x):
        return self.h(self.rotation.forward(self.h_inv(x)))

    def backward(self, x):
        return self.h(self.rotation.backward(self.h_inv(x)))

    def iterate(self, x0, ks):
        return self.h(self.rotation.iterate(float(self.h_inv(x0)), ks))

    def orbit(self, x0, n_back, m_fwd):
        return self.h(self.rotation.orbit(float(self.h_inv(x0)), n_back, m_fwd))

    def invariant_quadrature(self, n):
        t = np.arange(n) / n
        return np.asarray(self.h(t)), np.full(n, 1.0 / n)

    def describe(self):
        return {"kind": "conjugated_rotation", "h": self.label,
                "rotation": self.rotation.describe()}


@dataclass(frozen=True)
class Inverse(DynSystem):
    """The same space with ``phi^{-1}`` as the map."""

    base: DynSystem = None

    def __post_init__(self):
        for flag in ("minimal", "uniquely_ergodic", "invariant_measure_known", "space_id"):
            object.__setattr__(self, flag, getattr(self.base, flag))
        object.__setattr__(self, "_dtype", self.base._dtype)

    def forward(self, x):
        return self.base.backward(x)

    def backward(self, x):
        return self.base.forward(x)

    def iterate(self, x0, ks):
        return self.base.iterate(x0, -np.asarray(ks, dtype=np.int64))

    def orbit(self, x0, n_back, m_fwd):
        return self.base.orbit(x0, m_fwd, n_back)[::-1]

    def period_of(self, x0, limit=0):
        return self.base.period_of(x0, limit)

    def invariant_quadrature(self, n):
        return self.base.invariant_quadrature(n)

    def describe(self):
        return {"kind": "inverse", "base": self.base.describe()}


# ---------------------------------------------------------------------------
# point-level operations


def _check(s: DynSystem, x: Point):
    if not s.contains(x):
        raise SpaceMismatch(f"point on {x.space_id!r} given to system on {s.space_id!r}")


def step(s: DynSystem, x: Point, direction: str = "forward") -> Point:
    _check(s, x)
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    if isinstance(x.coordinate, ExactCirclePoint):
        if not isinstance(s, Rotation):
            raise SpaceMismatch("exact circle points only move under a Rotation")
        return Point(s.space_id, x.coordinate.shifted(1 if direction == "forward" else -1))
    f = s.forward if direction == "forward" else s.backward
    y = f(np.asarray(x.coordinate))
    return Point(s.space_id, np.asarray(y).item())


def orbit_segment(s: DynSystem, x: Point, n_back: int, m_fwd: int) -> list[Point]:
    """``[phi^k(x) for k in -n_back .. m_fwd]``."""
    _check(s, x)
    if n_back < 0 or m_fwd < 0:
        raise ValueError("window sizes must be nonnegative")
    if isinstance(x.coordinate, ExactCirclePoint):
        return [Point(s.space_id, x.coordinate.shifted(k)) for k in range(-n_back, m_fwd + 1)]
    return [Point(s.space_id, v.item()) for v in s.orbit(x.coordinate, n_back, m_fwd)]


def min_cross_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest circle distance between a point of ``a`` and a point of ``b``."""
    b_sorted = np.sort(np.asarray(b, dtype=float))
    return float(nearest_distance(np.asarray(a, dtype=float), b_sorted).min())


def nearest_distance(x: np.ndarray, sorted_pts: np.ndarray) -> np.ndarray:
    """Circle distance from each ``x`` to the nearest of ``sorted_pts``."""
    n = sorted_pts.size
    idx = np.searchsorted(sorted_pts, x)
    lo = sorted_pts[(idx - 1) % n]
    hi = sorted_pts[idx % n]
    return np.minimum(circle_distance(x, lo), circle_distance(x, hi))


def system_from_spec(spec: dict) -> DynSystem:
    """Build a system from a config mapping such as ``{"kind": "rotation",
    "alpha": "golden"}``."""
    kind = spec.get("kind")
    if kind in ("rotation", "conjugated_rotation"):
        if "alpha" in spec:
            cf = ContinuedFraction.named(spec["alpha"])
        elif "period" in spec:
            cf = ContinuedFraction(tuple(spec.get("head", (0,))), tuple(spec["period"]))
        else:
            raise ValueError("system.alpha: give a named constant or head/period quotients")
        rot = Rotation(cf)
        if kind == "rotation":
            return rot
        return ConjugatedRotation.sine(rot, float(spec.get("c", 0.5)))
    if kind == "finite_cycle":
        return FiniteCycle(int(spec["p"]))
    if kind == "squaring":
        return SquaringMap()
    raise ValueError(f"system.kind: unknown kind {kind!r}")


def points_from(s: DynSystem, coords: Sequence) -> list[Point]:
    return [s.point(c) for c in coords]
