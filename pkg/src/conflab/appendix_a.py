"""A potential on an irrational rotation with prescribed atomic conformal
measures.

For base points ``x_1..x_q`` with disjoint orbits and targets ``beta_p < 0``,
``F = sum_n f_n`` where ``f_n = sum_p (g_n^p - g_n^p o phi^(2n+1))`` and
``g_n^p`` is a tent of height ``b_n^p`` centred at ``phi^n(x_p)``.  The tents
sit on arcs chosen small enough that orbit sums of ``F`` along ``x_p`` are
squeezed between partial sums of two sequences ``a^p <= b^p``.  An
``exp(beta F)``-conformal measure on the orbit of ``x_p`` then exists
exactly for ``beta`` in ``(-inf, beta_p]`` (closed target) or
``(-inf, beta_p)`` (open target).

Only levels ``n <= depth`` are built as tents.  Along the orbit of a base
point every deeper level contributes only at its two tent centres, for
orbit indices up to ``N_{depth+1}``; :meth:`AppendixA.orbit_values` adds
those centre values so orbit sums there are those of the full series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynsys import Rotation, circle_distance, nearest_distance
from .potential import Potential

TENT_FRACTION = 0.5  # tent half-width as a fraction of the arc radius
WINDOW_CHECK = 1000
MAX_TERMS = 2**21


class ConstructionError(ValueError):
    """A condition of the construction could not be satisfied."""


@dataclass(frozen=True)
class SpectrumTarget:
    beta_p: float
    closed: bool = True

    def __post_init__(self):
        if not self.beta_p < 0:
            raise ValueError("target beta_p must be negative")


# ---------------------------------------------------------------------------
# sequences


def _neg_log_c(n, L):
    n = np.asarray(n, dtype=float)
    return np.log(n + L) + 2 * np.log(np.log(n + L + 1))


def _neg_log_c0(L):
    return math.log(L) + 2 * math.log(math.log(L + 1))


def log_c(n, L=32):
    """``log c_n`` with ``c_n = g(n)/g(0)``, ``g(n) = 1/((n+L) log^2(n+L+1))``."""
    return _neg_log_c0(L) - _neg_log_c(n, L)


def log_d(n, L=32):
    """``log d_n`` with ``d_n = L/(n+L)``."""
    return math.log(L) - np.log(np.asarray(n, dtype=float) + L)


def t_seq(n):
    return 1.0 + 1.0 / np.log(np.asarray(n, dtype=float) + 3.0)


def _a_terms(n, target: SpectrumTarget, L):
    # log x_n - log x_{n+1} > 0, computed with log1p to keep digits
    n = np.asarray(n, dtype=float)
    step = np.log1p(1.0 / (n + L))
    if target.closed:
        step = step + 2 * np.log1p(np.log1p(1.0 / (n + L + 1)) / np.log(n + L + 1))
    return step / abs(target.beta_p)


@dataclass(frozen=True)
class Sequences:
    """``a[p, j]``, ``b[p, j]``, ``t[j]`` and ``S[j] = max_p b[p, j]`` for
    ``j < J``."""

    a: np.ndarray
    b: np.ndarray
    t: np.ndarray
    S: np.ndarray
    offset: int

    @classmethod
    def build(cls, targets, J, offset):
        j = np.arange(J)
        a = np.stack([_a_terms(j, tg, offset) for tg in targets])
        t = t_seq(j)
        b = a * t
        return cls(a, b, t, b.max(axis=0), offset)

    @property
    def J(self):
        return self.a.shape[1]


def _cum(v):
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), np.cumsum(v, axis=-1)], axis=-1)


def _b_margin(seq: Sequences, n: int, j: np.ndarray) -> np.ndarray:
    """``sum_{k=n+1}^{j-1} b_k - sum_{k<j} a_k - sum_{i<=n} (2i+1) S_i`` per p."""
    cb, ca = _cum(seq.b), _cum(seq.a)
    penalty = float(np.sum((2 * np.arange(n + 1) + 1) * seq.S[: n + 1]))
    return (cb[:, j] - cb[:, [n + 1]]) - ca[:, j] - penalty


OFFSET_LADDER = (32, 48, 64, 96, 128, 192, 256, 384, 512)


def choose_N(targets, depth, offset, J=MAX_TERMS):
    """Smallest admissible increasing ``N_0 .. N_{depth+1}``.

    ``b`` is non-increasing, so (a_n) for all ``j >= N_n - 1`` reduces to
    ``j = N_n - 1``.  The (b_n) margin grows with ``j`` by ``b_j - a_j > 0``,
    so (b_n) for all ``j >= N_n`` reduces to ``j = N_n``.
    """
    seq = Sequences.build(targets, J, offset)
    bmax = seq.b.max(axis=0)
    N = []
    for n in range(depth + 2):
        lower = max(3 * (n + 1), N[-1] + 1 if N else 0)
        below = np.nonzero(bmax < 2.0**-n)[0]
        j = np.arange(n + 1, J - WINDOW_CHECK - 1)
        good = np.nonzero((_b_margin(seq, n, j) >= 0).all(axis=0))[0]
        if below.size == 0 or good.size == 0:
            raise ConstructionError(
                f"(b_{n}) unattainable within {J} terms at offset {offset}")
        N.append(int(max(lower, below[0] + 1, j[good[0]])))
    # keep only what later checks need
    keep = N[-1] + WINDOW_CHECK + 2
    seq = Sequences(seq.a[:, :keep].copy(), seq.b[:, :keep].copy(), seq.t[:keep].copy(),
                    seq.S[:keep].copy(), offset)
    return N, seq


def choose_offset(targets, depth):
    """First offset on the ladder for which every ``N_n`` up to depth+1 exists."""
    for L in OFFSET_LADDER:
        try:
            return L, choose_N(targets, depth, L)
        except ConstructionError:
            continue
    raise ConstructionError(f"no offset up to {OFFSET_LADDER[-1]} satisfies (b_{depth + 1})")


# ---------------------------------------------------------------------------
# arcs


@dataclass(frozen=True)
class Arc:
    n: int
    p: int
    center_plus: float   # phi^n(x_p)
    center_minus: float  # phi^(-n-1)(x_p)
    radius: float        # radius of the open arc V (and of its preimage)
    height: float        # b_n^p

    @property
    def halfwidth(self):
        return TENT_FRACTION * self.radius


def _orbit_block(rot, points, K):
    ks = np.arange(-K, K + 1)
    return ks, [rot.iterate(x, ks) for x in points]


def build_arcs(rot: Rotation, points, seq: Sequences, N, depth):
    arcs: list[Arc] = []
    report = []
    q = len(points)
    for n in range(depth + 1):
        K = N[n] + 2 * n + 1
        ks, orbs = _orbit_block(rot, points, K)
        cplus = [float(rot.iterate(x, [n])[0]) for x in points]
        cminus = [float(rot.iterate(x, [-n - 1])[0]) for x in points]
        level_centers = np.array(cplus + cminus)
        earlier = [a for a in arcs if a.n < n]
        for p in range(q):
            c2 = np.array([cplus[p], cminus[p]])
            cons = {}
            # (1_n), (2_n): the 2q level-n arcs must be pairwise disjoint
            others = np.delete(level_centers, [p, q + p])
            cons["1"] = circle_distance(c2[0], c2[1]) / 2
            cons["2"] = float(circle_distance(c2[:, None], others[None, :]).min() / 2) if q > 1 else math.inf
            # (3_n): avoid M_n^p, orbit points with |i| <= N_n + 2n + 1
            pts = []
            for l in range(q):
                mask = np.ones(ks.size, bool)
                if l == p:
                    mask &= (ks != n) & (ks != -n - 1)
                pts.append(orbs[l][mask])
            M = np.sort(np.concatenate(pts))
            cons["3"] = float(nearest_distance(c2, M).min())
            # (4_n): avoid every earlier closed W not containing our centres
            d4 = math.inf
            for e in earlier:
                ec = np.array([e.center_plus, e.center_minus])
                dd = circle_distance(c2[:, None], ec[None, :])
                if (dd > e.radius).all():
                    d4 = min(d4, float(dd.min()) - e.radius)
            cons["4"] = d4
            r = min(cons.values()) / 3
            if not r > 1e-14:
                worst = min(cons, key=cons.get)
                raise ConstructionError(f"arc radius underflow at level {n}, point {p}: "
                                        f"condition ({worst}_{n}) leaves {cons[worst]:.3e}")
            arcs.append(Arc(n, p, cplus[p], cminus[p], r, float(seq.b[p, n])))
            report.append({"n": n, "p": p, "radius": r,
                           "limits": {k: (v if math.isfinite(v) else None) for k, v in cons.items()}})
    return arcs, report


def verify_arcs(rot, points, arcs, N):
    """Re-check (1_n)-(4_n) from the finished arcs; returns name -> margin."""
    q = len(points)
    by_level: dict[int, list[Arc]] = {}
    for a in arcs:
        by_level.setdefault(a.n, []).append(a)
    out = {}
    for n, level in sorted(by_level.items()):
        m1 = min(circle_distance(a.center_plus, a.center_minus) - 2 * a.radius for a in level)
        m2 = math.inf
        for a in level:
            for b in level:
                if a.p < b.p:
                    for ca in (a.center_plus, a.center_minus):
                        for cb in (b.center_plus, b.center_minus):
                            m2 = min(m2, circle_distance(ca, cb) - a.radius - b.radius)
        K = N[n] + 2 * n + 1
        ks, orbs = _orbit_block(rot, points, K)
        m3 = math.inf
        for a in level:
            for l in range(q):
                mask = np.ones(ks.size, bool)
                if l == a.p:
                    mask &= (ks != n) & (ks != -n - 1)
                d = np.minimum(circle_distance(orbs[l][mask], a.center_plus),
                               circle_distance(orbs[l][mask], a.center_minus))
                m3 = min(m3, float(d.min()) - a.radius)
        # (4_n) as stated: if neither centre lies in any closed W_i^l, the whole
        # W_n^p misses their union
        m4 = math.inf
        for a in level:
            for i in range(n):
                Wi = by_level[i]
                cs = [a.center_plus, a.center_minus]
                hit = any(circle_distance(c, e) <= w.radius
                          for c in cs for w in Wi for e in (w.center_plus, w.center_minus))
                if not hit:
                    for c in cs:
                        for w in Wi:
                            for e in (w.center_plus, w.center_minus):
                                m4 = min(m4, circle_distance(c, e) - a.radius - w.radius)
        out[f"(1_{n})"] = m1
        out[f"(2_{n})"] = m2
        out[f"(3_{n})"] = m3
        out[f"(4_{n})"] = m4
    return out


# ---------------------------------------------------------------------------
# the potential


@dataclass(frozen=True, eq=False)
class AppendixA(Potential):
    rotation: Rotation = None
    points: tuple = ()
    targets: tuple = ()
    depth: int = 0
    N: tuple = ()
    arcs: tuple = ()
    seq: Sequences = None
    certificate: dict = field(default_factory=dict)
    kind = "appendix_a"
    space = "circle"

    def __post_init__(self):
        object.__setattr__(self, "_cp", np.array([a.center_plus for a in self.arcs]))
        object.__setattr__(self, "_cm", np.array([a.center_minus for a in self.arcs]))
        object.__setattr__(self, "_w", np.array([a.halfwidth for a in self.arcs]))
        object.__setattr__(self, "_h", np.array([a.height for a in self.arcs]))

    @property
    def tail_bound(self):
        d = self.depth
        return float(self.seq.S[d + 1] + 2.0 ** (-d + 1))

    @property
    def exact_window(self) -> int:
        """Orbit indices ``|k| <= N_{depth+1}`` of a base point are exact."""
        return int(self.N[self.depth + 1])

    def a(self, p):
        return self.seq.a[p]

    def b(self, p):
        return self.seq.b[p]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros(flat.size)
        for s in range(0, flat.size, 1 << 16):
            xs = flat[s: s + (1 << 16), None]
            up = np.maximum(0.0, 1.0 - circle_distance(xs, self._cp[None, :]) / self._w)
            dn = np.maximum(0.0, 1.0 - circle_distance(xs, self._cm[None, :]) / self._w)
            out[s: s + xs.shape[0]] = (up - dn) @ self._h
        return out.reshape(x.shape)

    def base_index(self, x0) -> int | None:
        for p, xp in enumerate(self.points):
            if float(x0) == xp:
                return p
        return None

    def values_at(self, s, x0, ks):
        ks = np.asarray(ks, dtype=np.int64)
        vals = np.asarray(self(s.iterate(x0, ks)), dtype=float)
        p = self.base_index(x0)
        if p is None or not (isinstance(s, Rotation) and s.alpha == self.rotation.alpha):
            return vals
        # centres of the omitted levels n > depth: +b_n at k = n, -b_n at k = -n-1
        lo, W = self.depth + 1, self.exact_window
        plus = (ks >= lo) & (ks <= W)
        vals[plus] += self.seq.b[p, ks[plus]]
        n = -ks - 1
        minus = (n >= lo) & (n <= W - 1)
        vals[minus] -= self.seq.b[p, n[minus]]
        return vals

    def breakpoints(self):
        w = self._w
        return np.concatenate([self._cp, self._cp - w, self._cp + w,
                               self._cm, self._cm - w, self._cm + w])

    def sandwich(self, p: int, m_max: int) -> dict:
        """Largest violation of the two-sided orbit-sum bounds for ``m <= m_max``."""
        if m_max > self.exact_window:
            raise ValueError("m_max beyond the exact window")
        x = self.points[p]
        v = self.orbit_values(self.rotation, x, m_max, m_max)
        fwd = np.cumsum(v[m_max:])                 # sum_{i=0}^{m}
        bwd = np.cumsum(v[:m_max][::-1])           # sum_{i=1}^{m} F(phi^-i x)
        A, B = np.cumsum(self.seq.a[p, : m_max + 1]), np.cumsum(self.seq.b[p, : m_max + 1])
        lower = float(np.max(A - fwd))
        upper = float(np.max(fwd - B))
        # eneg: -sum_{i<m} b <= bwd_m <= -sum_{i<m} a
        lower_b = float(np.max(-B[:m_max] - bwd))
        upper_b = float(np.max(bwd + A[:m_max]))
        return {"m_max": m_max, "forward_lower": lower, "forward_upper": upper,
                "backward_lower": lower_b, "backward_upper": upper_b,
                "max_violation": max(lower, upper, lower_b, upper_b)}

    def describe(self):
        return {"kind": self.kind, "points": list(self.points), "depth": self.depth,
                "targets": [{"beta": t.beta_p, "closed": t.closed} for t in self.targets],
                "N": list(self.N), "offset": self.seq.offset}


def _series_certificate(seq: Sequences, N, depth):
    a, b = seq.a, seq.b
    J = seq.J
    diffs = np.diff(b, axis=1)
    growth = _cum(b - a)
    items = {
        "(3) 0 < a <= b": {"passed": bool((a > 0).all() and (a <= b).all()),
                           "min_a": float(a.min()), "max_a_minus_b": float((a - b).max())},
        "(1) b -> 0 (non-increasing envelope)": {
            "passed": bool((diffs <= 0).all()), "max_increment": float(diffs.max()),
            "b_last": float(b[:, -1].max())},
        "(2),(3) divergent partial sums": {
            "passed": bool((growth[:, J] > growth[:, J // 2]).all()),
            "sum_b_minus_a_half": growth[:, J // 2].tolist(),
            "sum_b_minus_a_full": growth[:, J].tolist(),
            "sum_a_full": _cum(a)[:, J].tolist()},
        "N_n >= 3(n+1), increasing": {
            "passed": all(N[n] >= 3 * (n + 1) for n in range(len(N)))
            and all(x < y for x, y in zip(N, N[1:])), "N": list(N)},
    }
    for n, Nn in enumerate(N):
        jj = np.arange(Nn, Nn + WINDOW_CHECK + 1)
        a_ok = float((seq.b[:, Nn - 1:Nn + WINDOW_CHECK].max(axis=0) - 2.0**-n).max())
        marg = _b_margin(seq, n, jj)
        items[f"(a_{n})"] = {"passed": a_ok < 0, "max_b_minus_bound": a_ok,
                             "window": [Nn - 1, Nn + WINDOW_CHECK]}
        items[f"(b_{n})"] = {
            "passed": bool((marg >= 0).all()), "min_margin": float(marg.min()),
            "window": [Nn, Nn + WINDOW_CHECK],
            "margin_growth": float((marg[:, -1] - marg[:, 0]).min()),
            "tail": "margin is non-decreasing in j since b_j > a_j, so the window start certifies all j"}
    return items


def build_appendix_a(rot: Rotation, points, targets, depth: int = 3, horizon: int = 10**4,
                     offset: int | None = None) -> AppendixA:
    """Construct the potential and its certificate.

    ``points`` are circle coordinates, ``targets`` one :class:`SpectrumTarget`
    per point, ``horizon`` the orbit range over which the base orbits are
    checked to be disjoint.
    """
    if not isinstance(rot, Rotation):
        raise TypeError("this construction is implemented for circle rotations")
    points = tuple(float(x) % 1.0 for x in points)
    targets = tuple(targets)
    if len(points) != len(targets) or not points:
        raise ValueError("need one target per base point")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    ks = np.arange(-horizon, horizon + 1)
    orbs = [np.sort(rot.iterate(x, ks)) for x in points]
    sep = math.inf
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            sep = min(sep, float(nearest_distance(orbs[i], orbs[j]).min()))
    if not sep > 1e-13:
        raise ConstructionError(f"orbit collision within horizon {horizon}: separation {sep:.3e}")

    if offset is None:
        offset, (N, seq) = choose_offset(targets, depth)
    else:
        N, seq = choose_N(targets, depth, offset)
    arcs, arc_report = build_arcs(rot, points, seq, N, depth)
    margins = verify_arcs(rot, points, arcs, N)
    cert = {"series": _series_certificate(seq, N, depth),
            "arcs": {k: {"passed": v > 0, "margin": (v if math.isfinite(v) else None)}
                     for k, v in margins.items()},
            "arc_radii": arc_report,
            "orbit_separation": {"passed": True, "horizon": horizon, "min_distance": sep},
            "sequence_defaults": {
                "c_n": f"g(n)/g(0), g(n) = 1/((n+{offset}) log^2(n+{offset}+1))",
                "d_n": f"{offset}/(n+{offset})", "t_n": "1 + 1/log(n+3)"}}
    F = AppendixA(rot, points, targets, depth, tuple(N), tuple(arcs), seq, cert)
    f_int = []
    for a in arcs:  # both tents have equal area, so each f_n^p integrates to 0
        f_int.append(a.height * a.halfwidth - a.height * a.halfwidth)
    cert["f_n^p integrals"] = {"passed": max(map(abs, f_int)) == 0.0, "max_abs": max(map(abs, f_int))}
    cert["tail_bound"] = F.tail_bound
    cert["exact_orbit_window"] = F.exact_window
    cert["all_passed"] = all(
        v["passed"] for group in ("series", "arcs") for v in cert[group].values())
    return F
