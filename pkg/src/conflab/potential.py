"""Continuous potentials ``F`` and their evaluation.

Simple kinds live here; the two counterexample constructions live in
:mod:`conflab.appendix_a` and :mod:`conflab.appendix_b` and are re-exported
below.  Every potential is an immutable callable on coordinate arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .dynsys import (
    CIRCLE,
    INTERVAL,
    DynSystem,
    ExactCirclePoint,
    FiniteCycle,
    Point,
    Rotation,
    SpaceMismatch,
)


class Potential:
    """Base class.  Subclasses set ``kind`` and implement ``__call__``."""

    kind = "abstract"
    space: str | None = None  # None: any space
    tail_bound = 0.0

    def __call__(self, x):
        raise NotImplementedError

    def values_at(self, s: DynSystem, x0, ks) -> np.ndarray:
        """``F(phi^k x0)`` for each integer in ``ks``."""
        return np.asarray(self(s.iterate(x0, ks)), dtype=float)

    def orbit_values(self, s: DynSystem, x0, n_back: int, m_fwd: int) -> np.ndarray:
        """``F(phi^k x0)`` for ``k = -n_back .. m_fwd``."""
        return self.values_at(s, x0, np.arange(-n_back, m_fwd + 1))

    def exact_value(self, s: DynSystem, x):
        """Exact (Fraction) or high-precision value; only some kinds."""
        raise NotImplementedError(f"{self.kind} has no exact evaluation")

    def breakpoints(self):
        """Kinks of a piecewise-linear circle potential, else ``None``."""
        return None

    def describe(self) -> dict:
        return {"kind": self.kind}

    def __add__(self, other):
        return Sum((self, other))

    def __neg__(self):
        return Scaled(-1.0, self)

    def __sub__(self, other):
        return Sum((self, Scaled(-1.0, other)))

    def __mul__(self, c):
        return Scaled(float(c), self)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Constant(Potential):
    c: float = 0.0
    kind = "constant"

    def __call__(self, x):
        return np.full(np.shape(x), float(self.c))

    def exact_value(self, s, x):
        return Fraction(self.c)

    def breakpoints(self):
        return np.empty(0)

    def describe(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True, eq=False)
class TrigPoly(Potential):
    """``sum_n c_n exp(2 pi i n x)`` with ``c_{-n} = conj(c_n)``."""

    coeffs: tuple = ()  # pairs (n, complex)
    kind = "trig"
    space = CIRCLE

    def __post_init__(self):
        d = {}
        for n, c in self.coeffs:
            d[int(n)] = d.get(int(n), 0) + complex(c)
        for n, c in d.items():
            partner = d.get(-n, 0)
            if abs(c - np.conj(partner)) > 1e-14 * max(1.0, abs(c)):
                raise ValueError(f"coefficients at {n} and {-n} are not conjugate")
        object.__setattr__(self, "coeffs", tuple(sorted(d.items())))

    @classmethod
    def from_terms(cls, cos=None, sin=None, const=0.0) -> "TrigPoly":
        """``const + sum a_j cos(2 pi j x) + sum b_j sin(2 pi j x)``."""
        d: dict[int, complex] = {0: complex(const)} if const else {}
        for j, a in (cos or {}).items():
            j = int(j)
            d[j] = d.get(j, 0) + a / 2
            d[-j] = d.get(-j, 0) + a / 2
        for j, b in (sin or {}).items():
            j = int(j)
            d[j] = d.get(j, 0) - 0.5j * b
            d[-j] = d.get(-j, 0) + 0.5j * b
        return cls(tuple(d.items()))

    def coefficient(self, n: int) -> complex:
        return dict(self.coeffs).get(n, 0j)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for n, c in self.coeffs:
            if n == 0:
                out += c.real
            elif n > 0:
                # pair n with -n: 2 Re(c e(nx))
                out += 2 * (c.real * np.cos(2 * np.pi * n * x) - c.imag * np.sin(2 * np.pi * n * x))
        return out

    def sup_bound(self) -> float:
        return float(sum(abs(c) for _, c in self.coeffs))

    def describe(self):
        return {"kind": self.kind,
                "coeffs": [[n, c.real, c.imag] for n, c in self.coeffs]}


@dataclass(frozen=True, eq=False)
class Polynomial(Potential):
    """``sum_j coeffs[j] x**j``; used on the interval."""

    coeffs: tuple = (0.0,)
    kind = "polynomial"

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coeffs)

    def describe(self):
        return {"kind": self.kind, "coeffs": list(self.coeffs)}


@dataclass(frozen=True, eq=False)
class Table(Potential):
    """A function on ``{1, ..., p}`` given by its values (floats or Fractions)."""

    values: tuple = ()
    kind = "table"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "_arr", np.array([float(v) for v in self.values]))

    @property
    def space(self):
        return f"cycle:{len(self.values)}"

    def __call__(self, x):
        return self._arr[np.asarray(x, dtype=np.int64) - 1]

    def exact_value(self, s, x):
        v = self.values[int(x) - 1]
        return v if isinstance(v, Fraction) else Fraction(v)

    def describe(self):
        return {"kind": self.kind, "values": [float(v) for v in self.values]}


@dataclass(frozen=True, eq=False)
class Function(Potential):
    """Wraps a vectorised callable."""

    fn: Callable = None
    label: str = "function"
    kind = "function"

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x)), dtype=float)

    def describe(self):
        return {"kind": self.kind, "label": self.label}


@dataclass(frozen=True, eq=False)
class Coboundary(Potential):
    """``F = H o phi - H``."""

    H: Potential = None
    system: DynSystem = None
    kind = "coboundary"

    @property
    def space(self):
        return self.system.space_id

    def __call__(self, x):
        x = np.asarray(x)
        return self.H(self.system.forward(x)) - self.H(x)

    def values_at(self, s, x0, ks):
        ks = np.asarray(ks, dtype=np.int64)
        return (np.asarray(self.H(s.iterate(x0, ks + 1)), dtype=float)
                - np.asarray(self.H(s.iterate(x0, ks)), dtype=float))

    def orbit_values(self, s, x0, n_back, m_fwd):
        h = np.asarray(self.H(s.orbit(x0, n_back, m_fwd + 1)), dtype=float)
        return h[1:] - h[:-1]

    def exact_value(self, s, x):
        return self.H.exact_value(s, s.forward(x)) - self.H.exact_value(s, x)

    def describe(self):
        return {"kind": self.kind, "H": self.H.describe()}


@dataclass(frozen=True, eq=False)
class Sum(Potential):
    terms: tuple = ()
    kind = "sum"

    @property
    def tail_bound(self):
        return float(sum(t.tail_bound for t in self.terms))

    def __call__(self, x):
        return sum(np.asarray(t(x), dtype=float) for t in self.terms)

    def values_at(self, s, x0, ks):
        return sum(t.values_at(s, x0, ks) for t in self.terms)

    def orbit_values(self, s, x0, n_back, m_fwd):
        return sum(t.orbit_values(s, x0, n_back, m_fwd) for t in self.terms)

    def exact_value(self, s, x):
        return sum(t.exact_value(s, x) for t in self.terms)

    def breakpoints(self):
        parts = [t.breakpoints() for t in self.terms]
        if any(p is None for p in parts):
            return None
        return np.concatenate(parts)

    def describe(self):
        return {"kind": self.kind, "terms": [t.describe() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class Scaled(Potential):
    c: float = 1.0
    F: Potential = None
    kind = "scaled"

    @property
    def tail_bound(self):
        return abs(self.c) * self.F.tail_bound

    def __call__(self, x):
        return self.c * np.asarray(self.F(x), dtype=float)

    def values_at(self, s, x0, ks):
        return self.c * self.F.values_at(s, x0, ks)

    def orbit_values(self, s, x0, n_back, m_fwd):
        return self.c * self.F.orbit_values(s, x0, n_back, m_fwd)

    def exact_value(self, s, x):
        return Fraction(self.c) * self.F.exact_value(s, x)

    def breakpoints(self):
        return self.F.breakpoints()

    def describe(self):
        return {"kind": self.kind, "c": self.c, "F": self.F.describe()}


# ---------------------------------------------------------------------------


def evaluate(F: Potential, x: Point) -> float:
    """Value of ``F`` at a single point (truncated value for constructions)."""
    if F.space is not None and x.space_id != F.space:
        raise SpaceMismatch(f"potential on {F.space!r} evaluated at a {x.space_id!r} point")
    if isinstance(x.coordinate, ExactCirclePoint):
        raise SpaceMismatch("use exact_value for exact circle points")
    return float(np.asarray(F(np.asarray([x.coordinate])))[0])


@dataclass(frozen=True)
class NoSolution:
    reason: str
    mean: float = 0.0


def solve_coboundary_fourier(F: TrigPoly, s: Rotation, grid: int = 2**12):
    """Solve ``h o phi - h = F`` coefficientwise for a trig polynomial.

    Returns a :class:`TrigPoly` ``h`` (mean zero) or :class:`NoSolution`.
    """
    if not isinstance(s, Rotation):
        raise TypeError("Fourier solve needs an irrational rotation")
    if isinstance(F, Constant):
        F = TrigPoly(((0, F.c),))
    if not isinstance(F, TrigPoly):
        raise TypeError("Fourier solve needs a trigonometric polynomial")
    mean = F.coefficient(0)
    if abs(mean) > 1e-14:
        return NoSolution("nonzero mean", float(mean.real))
    h = []
    for n, c in F.coeffs:
        if n == 0:
            continue
        h.append((n, c / (np.exp(2j * np.pi * n * s.alpha) - 1)))
    sol = TrigPoly(tuple(h))
    x = np.arange(grid) / grid
    resid = np.max(np.abs(sol(s.forward(x)) - sol(x) - F(x))) if h else 0.0
    if resid >= 1e-10:
        raise ArithmeticError(f"Fourier solution residual {resid:.3e} too large")
    return sol


def piecewise_linear_integral(F: Potential, breakpoints) -> float:
    """Exact integral over the circle of a potential linear between kinks."""
    b = np.unique(np.concatenate([np.mod(np.asarray(breakpoints, dtype=float), 1.0), [0.0, 1.0]]))
    v = np.asarray(F(np.mod(b, 1.0)), dtype=float)
    return math.fsum((0.5 * (v[1:] + v[:-1]) * np.diff(b)).tolist())


def invariant_integral(s: DynSystem, F: Potential, n: int = 2**14) -> float:
    """``int F d(mu)`` for the invariant measure of a uniquely ergodic system.

    Piecewise-linear potentials on a rotation are integrated exactly between
    their kinks; otherwise an ``n``-node rule (exact for trig polynomials of
    degree below ``n``) is used.
    """
    if isinstance(s, Rotation):
        bp = F.breakpoints()
        if bp is not None and len(bp):
            return piecewise_linear_integral(F, bp)
    nodes, w = s.invariant_quadrature(n)
    return math.fsum((np.asarray(F(nodes), dtype=float) * w).tolist())


def potential_from_spec(spec: dict, s: DynSystem) -> Potential:
    """Build a potential from a config mapping (see the README for kinds)."""
    kind = spec.get("kind")
    if kind == "constant":
        F = Constant(float(spec.get("c", 0.0)))
    elif kind == "trig":
        if "coeffs" in spec:
            F = TrigPoly(tuple((int(n), complex(re, im)) for n, re, im in spec["coeffs"]))
        else:
            F = TrigPoly.from_terms(
                cos={int(k): float(v) for k, v in spec.get("cos", {}).items()},
                sin={int(k): float(v) for k, v in spec.get("sin", {}).items()},
                const=float(spec.get("const", 0.0)))
    elif kind == "polynomial":
        F = Polynomial(tuple(float(c) for c in spec["coeffs"]))
    elif kind == "table":
        F = Table(tuple(Fraction(str(v)) for v in spec["values"]))
    elif kind == "coboundary":
        F = Coboundary(potential_from_spec(spec["H"], s), s)
    elif kind == "appendix_a":
        from .appendix_a import build_appendix_a, SpectrumTarget
        targets = [SpectrumTarget(float(t["beta"]), bool(t.get("closed", True)))
                   for t in spec["targets"]]
        F = build_appendix_a(s, [float(x) for x in spec["points"]], targets,
                             int(spec.get("depth", 3)), int(spec.get("horizon", 10**4)),
                             offset=(int(spec["offset"]) if "offset" in spec else None))
    elif kind == "appendix_b":
        from .appendix_b import build_appendix_b
        F = build_appendix_b(s, int(spec.get("K", 2)), exact=bool(spec.get("exact", False)))
    else:
        raise ValueError(f"potential.kind: unknown kind {kind!r}")
    if spec.get("negate"):
        F = -F
    if "scale" in spec:
        F = float(spec["scale"]) * F
    return F


def truncation_tail_bound(F: Potential) -> float:
    """Uniform bound on ``|F_true - F_truncated|`` (0 for exact kinds)."""
    return float(F.tail_bound)


def __getattr__(name):  # lazy re-exports avoid an import cycle
    if name in ("build_appendix_a", "AppendixA", "SpectrumTarget"):
        from . import appendix_a
        return getattr(appendix_a, name)
    if name in ("build_appendix_b", "AppendixB", "PrecisionError"):
        from . import appendix_b
        return getattr(appendix_b, name)
    raise AttributeError(name)
