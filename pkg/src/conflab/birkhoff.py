"""Birkhoff cocycle ``S_k(F)(x)`` on orbit windows.

Conventions: ``S_0 = 0``; ``S_k = sum_{j<k} F(phi^j x)`` for ``k >= 1``;
``S_k = -sum_{j=1}^{|k|} F(phi^-j x)`` for ``k <= -1``.  These make
``S_{k+l}(x) = S_k(x) + S_l(phi^k x)`` hold for all integers.

Float sums use a compensated running sum; finite cycles with rational
tables are summed exactly with :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynsys import DynSystem, FiniteCycle, Point
from .potential import Potential, Table


def compensated_cumsum(v: np.ndarray, start: float = 0.0) -> np.ndarray:
    """Running sums ``start + v[0] + ... + v[i]`` with TwoSum error feedback."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v.copy()
    s = np.cumsum(np.concatenate([[start], v]))
    prev, cur = s[:-1], s[1:]
    bb = cur - prev
    err = (prev - (cur - bb)) + (v - bb)
    return cur + np.cumsum(err)


def _coord(x):
    return x.coordinate if isinstance(x, Point) else x


def _exact_ok(s: DynSystem, F: Potential) -> bool:
    return isinstance(s, FiniteCycle) and isinstance(F, Table)


def birkhoff_sum(s: DynSystem, x, F: Potential, k: int):
    """``S_k(F)(x)``; a Fraction for rational tables on finite cycles."""
    x0 = _coord(x)
    k = int(k)
    if k == 0:
        return Fraction(0) if _exact_ok(s, F) else 0.0
    ks = np.arange(0, k) if k > 0 else np.arange(k, 0)
    sign = 1 if k > 0 else -1
    if _exact_ok(s, F):
        pts = s.iterate(x0, ks)
        return sign * sum((F.exact_value(s, int(p)) for p in pts), Fraction(0))
    return sign * math.fsum(F.values_at(s, x0, ks).tolist())


@dataclass(frozen=True, eq=False)
class OrbitSumTable:
    """Cached ``S_k`` for ``k`` in ``[-N, M]`` (index ``k + N``)."""

    system: DynSystem
    x: object
    F: Potential
    beta: float
    N: int
    M: int
    f_values: np.ndarray      # F(phi^k x), k = -N .. M-1
    s_values: np.ndarray      # S_k, k = -N .. M
    exact: tuple | None = None  # Fractions when available
    meta: dict = field(default_factory=dict)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.N, self.M + 1)

    def S(self, k):
        k = np.asarray(k)
        if np.any(k < -self.N) or np.any(k > self.M):
            raise IndexError(f"k outside the cached window [-{self.N}, {self.M}]")
        return self.s_values[k + self.N]

    def beta_S(self, lo=None, hi=None) -> np.ndarray:
        lo = -self.N if lo is None else lo
        hi = self.M if hi is None else hi
        return self.beta * self.s_values[lo + self.N: hi + self.N + 1]

    def F_at(self, k):
        return self.f_values[np.asarray(k) + self.N]

    def telescoping_residual(self) -> float:
        if self.exact is not None:
            ex = self.exact
            fv = [Fraction(v) for v in self.F.values] if isinstance(self.F, Table) else None
            pts = self.system.orbit(_coord(self.x), self.N, self.M)
            worst = Fraction(0)
            for i in range(len(ex) - 1):
                worst = max(worst, abs(ex[i + 1] - ex[i] - fv[int(pts[i]) - 1]))
            return float(worst)
        return float(np.max(np.abs(np.diff(self.s_values) - self.f_values))) if self.f_values.size else 0.0

    def with_beta(self, beta: float) -> "OrbitSumTable":
        return OrbitSumTable(self.system, self.x, self.F, float(beta), self.N, self.M,
                             self.f_values, self.s_values, self.exact, self.meta)

    def reversed(self) -> "OrbitSumTable":
        """Table of ``-F o phi^-1`` under ``phi^-1``: ``S'_k = S_{-k}``."""
        from .dynsys import Inverse
        from .potential import Function
        s, F = self.system, self.F
        Fr = Function(lambda y: -np.asarray(F(s.backward(y)), dtype=float), "time-reversed")
        ex = tuple(reversed(self.exact)) if self.exact is not None else None
        return OrbitSumTable(Inverse(s), self.x, Fr, self.beta, self.M, self.N,
                             -self.f_values[::-1], self.s_values[::-1].copy(), ex)


def _cum_window(f_back: np.ndarray, f_fwd: np.ndarray, N: int, M: int):
    # f_back[i] = F(phi^{-N+i} x) for i < N ; f_fwd[j] = F(phi^j x) for j < M
    fwd = compensated_cumsum(f_fwd)
    bwd = -compensated_cumsum(f_back[::-1])[::-1] if N else np.empty(0)
    return np.concatenate([bwd, [0.0], fwd])


def _exact_sums(s, x0, F, N, M):
    vals = [Fraction(v) for v in F.values]
    pts = s.orbit(x0, N, M)
    out = [Fraction(0)] * (N + M + 1)
    acc = Fraction(0)
    for j in range(M):
        acc += vals[int(pts[N + j]) - 1]
        out[N + j + 1] = acc
    acc = Fraction(0)
    for j in range(1, N + 1):
        acc -= vals[int(pts[N - j]) - 1]
        out[N - j] = acc
    return tuple(out)


def build_sum_table(s: DynSystem, x, F: Potential, beta: float, N: int, M: int) -> OrbitSumTable:
    if N < 0 or M < 0:
        raise ValueError("window sizes must be nonnegative")
    x0 = _coord(x)
    if N + M:
        f = F.values_at(s, x0, np.arange(-N, M))
    else:
        f = np.empty(0)
    sv = _cum_window(f[:N], f[N:], N, M)
    exact = _exact_sums(s, x0, F, N, M) if _exact_ok(s, F) else None
    if exact is not None:
        sv = np.array([float(v) for v in exact])
    return OrbitSumTable(s, x, F, float(beta), N, M, f, sv, exact)


def extend(table: OrbitSumTable, N2: int, M2: int) -> OrbitSumTable:
    """Grow the window to ``[-N2, M2]``, evaluating ``F`` only at new indices."""
    N2, M2 = max(N2, table.N), max(M2, table.M)
    if (N2, M2) == (table.N, table.M):
        return table
    s, F, x0 = table.system, table.F, _coord(table.x)
    new_back = F.values_at(s, x0, np.arange(-N2, -table.N)) if N2 > table.N else np.empty(0)
    new_fwd = F.values_at(s, x0, np.arange(table.M, M2)) if M2 > table.M else np.empty(0)
    old = table.s_values
    fwd = compensated_cumsum(new_fwd, start=float(old[-1]))
    # backward: S_{-k-1} = S_{-k} - F(phi^{-k-1} x)
    bwd = compensated_cumsum(-new_back[::-1], start=float(old[0]))[::-1] if new_back.size else np.empty(0)
    sv = np.concatenate([bwd, old, fwd])
    f = np.concatenate([new_back, table.f_values, new_fwd])
    exact = _exact_sums(s, x0, F, N2, M2) if table.exact is not None else None
    if exact is not None:
        sv = np.array([float(v) for v in exact])
    return OrbitSumTable(s, table.x, F, table.beta, N2, M2, f, sv, exact)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class CesaroStats:
    horizon: int
    forward_avgs: np.ndarray   # k = 1..H: (1/k) beta S_k
    backward_avgs: np.ndarray  # k = 1..H: (1/k) beta S_{-k}
    tail_max_forward: float | None
    tail_max_backward: float | None
    doubling: dict             # side -> [(h, tail max over [h/2, h])]

    def as_dict(self):
        return {"horizon": self.horizon, "tail_max_forward": self.tail_max_forward,
                "tail_max_backward": self.tail_max_backward,
                "doubling": {k: [[h, v] for h, v in rows] for k, rows in self.doubling.items()}}


def _tail_max(avgs: np.ndarray, h: int) -> float:
    return float(np.max(avgs[h // 2 - 1: h]))


def _doubling(avgs, H):
    hs = [h for h in (H // 4, H // 2, H) if h >= 2]
    return [(h, _tail_max(avgs, h)) for h in hs]


def cesaro_limsup_estimate(table: OrbitSumTable, side: str = "both") -> CesaroStats:
    """Cesaro averages of ``beta F`` along the orbit and their tail maxima.

    The tail maximum at horizon ``h`` is the max of the averages over
    ``k in [h/2, h]``; it is reported at ``H/4, H/2, H``.
    """
    if side not in ("forward", "backward", "both"):
        raise ValueError("side must be forward, backward or both")
    k_f = np.arange(1, table.M + 1)
    k_b = np.arange(1, table.N + 1)
    fwd = table.beta * table.s_values[table.N + 1:] / k_f
    bwd = table.beta * table.s_values[:table.N][::-1] / k_b
    doubling = {}
    tf = tb = None
    if side in ("forward", "both"):
        if table.M < 10:
            raise ValueError("forward horizon must be at least 10")
        tf = _tail_max(fwd, table.M)
        doubling["forward"] = _doubling(fwd, table.M)
    if side in ("backward", "both"):
        if table.N < 10:
            raise ValueError("backward horizon must be at least 10")
        tb = _tail_max(bwd, table.N)
        doubling["backward"] = _doubling(bwd, table.N)
    return CesaroStats(max(table.M, table.N), fwd, bwd, tf, tb, doubling)


def logsumexp(v) -> float:
    """``log sum exp(v)`` with a max shift and an exactly rounded sum."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return -math.inf
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(math.fsum(np.exp(v - m).tolist()))


def log_partition(table: OrbitSumTable, window=None) -> float:
    """``log sum_{k in [-n, m]} exp(beta S_k)``; ``window = (n, m)``."""
    n, m = (table.N, table.M) if window is None else window
    if n > table.N or m > table.M or n < 0 or m < 0:
        raise IndexError("window outside the table")
    return logsumexp(table.beta_S(-n, m))


def sup_partial_sums(table: OrbitSumTable, horizon: int | None = None) -> float:
    """``max_{0 <= n <= horizon} |S_{n+1}|`` (``horizon`` defaults to ``M - 1``)."""
    h = table.M - 1 if horizon is None else horizon
    if h < 0 or h + 1 > table.M:
        raise IndexError("horizon needs S_{horizon+1} in the table")
    return float(np.max(np.abs(table.s_values[table.N + 1: table.N + h + 2])))
