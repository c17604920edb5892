"""Conformal measures: existence evidence, spectrum scans and constructions.

A Borel probability ``m`` is ``exp(beta F)``-conformal when
``int f dm = int (f o phi) exp(beta F) dm`` for all continuous ``f``.
Orbit-supported candidates carry weights proportional to ``exp(beta S_k)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .birkhoff import (
    OrbitSumTable,
    build_sum_table,
    cesaro_limsup_estimate,
    logsumexp,
)
from .dynsys import (
    CIRCLE,
    INTERVAL,
    DynSystem,
    FiniteCycle,
    Rotation,
)
from .potential import Potential, invariant_integral

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"
CLASSES = ("ZeroOnly", "NonnegRay", "NonposRay", "FullLine")


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class WeightedAtomicMeasure:
    """Atoms ``phi^k(x)`` for the listed orbit indices, with log-weights.

    Atoms are identified by orbit index; distinct indices are distinct
    points of a non-periodic orbit even where float coordinates coincide.
    """

    system: DynSystem
    ks: np.ndarray
    coords: np.ndarray
    log_weights: np.ndarray      # normalised: logsumexp == 0
    log_normalizer: float
    f_values: np.ndarray | None = None  # F at the atoms, when known exactly along the orbit
    source: Potential | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_log_terms(cls, system, ks, coords, terms, f_values=None, source=None, meta=None):
        terms = np.asarray(terms, dtype=float)
        lz = logsumexp(terms)
        return cls(system, np.asarray(ks), np.asarray(coords), terms - lz, lz,
                   None if f_values is None else np.asarray(f_values, dtype=float),
                   source, dict(meta or {}))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def integrate(self, f: Callable) -> float:
        return math.fsum((self.weights * np.asarray(f(self.coords), dtype=float)).tolist())

    def potential_at_atoms(self, F: Potential) -> np.ndarray:
        if self.f_values is not None and F is self.source:
            return self.f_values
        return np.asarray(F(self.coords), dtype=float)

    def residual(self, f, s, F, beta) -> float:
        w = self.weights
        lhs = math.fsum((w * np.asarray(f(self.coords), dtype=float)).tolist())
        pushed = np.asarray(f(s.forward(self.coords)), dtype=float)
        rhs = math.fsum((w * np.exp(beta * self.potential_at_atoms(F)) * pushed).tolist())
        return abs(lhs - rhs)

    def rows(self, s_values=None):
        """``(k, coordinate, S_k or None, weight)`` rows for export."""
        w = self.weights
        for i, k in enumerate(self.ks):
            yield int(k), self.coords[i], (None if s_values is None else s_values[i]), w[i]

    def as_dict(self):
        return {"kind": "atomic", "atoms": int(len(self.ks)),
                "k_range": [int(self.ks.min()), int(self.ks.max())] if len(self.ks) else None,
                "log_normalizer": self.log_normalizer, **self.meta}


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """``exp(log_density) d(mu)`` on the nodes of an invariant-measure rule."""

    system: DynSystem
    nodes: np.ndarray
    node_weights: np.ndarray
    log_density: np.ndarray     # normalised so the quadrature of the density is 1
    log_normalizer: float
    density_fn: Callable = None
    meta: dict = field(default_factory=dict)

    @property
    def weights(self):
        return self.node_weights * np.exp(self.log_density)

    def integrate(self, f: Callable) -> float:
        return math.fsum((self.weights * np.asarray(f(self.nodes), dtype=float)).tolist())

    def residual(self, f, s, F, beta) -> float:
        w = self.weights
        lhs = math.fsum((w * np.asarray(f(self.nodes), dtype=float)).tolist())
        g = np.asarray(f(s.forward(self.nodes)), dtype=float) * np.exp(beta * np.asarray(F(self.nodes)))
        return abs(lhs - math.fsum((w * g).tolist()))

    def as_dict(self):
        return {"kind": "density", "grid": int(self.nodes.size),
                "log_normalizer": self.log_normalizer, **self.meta}


def standard_tests(s: DynSystem, degree: int = 4):
    """``{1, cos(2 pi j x), sin(2 pi j x): j <= degree}`` on the circle,
    indicators on a finite cycle, monomials on the interval."""
    out = [("1", lambda x: np.ones(np.shape(x)))]
    if s.space_id == CIRCLE:
        for j in range(1, degree + 1):
            out.append((f"cos{j}", lambda x, j=j: np.cos(2 * np.pi * j * np.asarray(x, dtype=float))))
            out.append((f"sin{j}", lambda x, j=j: np.sin(2 * np.pi * j * np.asarray(x, dtype=float))))
    elif isinstance(s, FiniteCycle):
        for j in range(1, s.p + 1):
            out.append((f"1_{j}", lambda x, j=j: (np.asarray(x) == j).astype(float)))
    elif s.space_id == INTERVAL:
        for j in range(1, degree + 1):
            out.append((f"x^{j}", lambda x, j=j: np.asarray(x, dtype=float) ** j))
    return out


def conformality_residual(m, s: DynSystem, F: Potential, beta: float, test_functions=None) -> dict:
    """``|int f dm - int (f o phi) exp(beta F) dm|`` for each test function."""
    tests = standard_tests(s) if test_functions is None else test_functions
    return {name: float(m.residual(f, s, F, beta)) for name, f in tests}


# ---------------------------------------------------------------------------
# existence


@dataclass(frozen=True)
class ExistenceResult:
    verdict: str
    beta: float
    horizon: int
    tol: float
    tail_max_forward: float
    tail_max_backward: float
    trend: dict

    def as_dict(self):
        return {"verdict": self.verdict, "beta": self.beta, "horizon": self.horizon,
                "tol": self.tol, "tail_max_forward": self.tail_max_forward,
                "tail_max_backward": self.tail_max_backward, "trend": self.trend}


def _side_verdict(rows, tol):
    """rows = [(h, tail max)] at h = H/4, H/2, H (already scaled by beta)."""
    vals = [v for _, v in rows]
    final = vals[-1]
    settled = all(b <= max(a, 0.0) + 0.1 * tol for a, b in zip(vals, vals[1:]))
    if final <= tol and settled:
        return HOLDS
    if final >= 10 * tol and final >= vals[0] / 2:
        return FAILS
    return INCONCLUSIVE


def _verdict_from_raw(fwd_raw, bwd_raw, beta, H, tol):
    """Verdict from raw (beta = 1) Cesaro averages scaled by ``beta``."""
    sides = {}
    trend = {}
    for name, avgs in (("forward", fwd_raw), ("backward", bwd_raw)):
        rows = []
        for h in (H // 4, H // 2, H):
            seg = beta * avgs[h // 2 - 1: h]
            rows.append((h, float(seg.max())))
        sides[name] = _side_verdict(rows, tol)
        trend[name] = [[h, v] for h, v in rows]
    if sides["forward"] == HOLDS and sides["backward"] == HOLDS:
        v = HOLDS
    elif FAILS in sides.values():
        v = FAILS
    else:
        v = INCONCLUSIVE
    return v, trend["forward"][-1][1], trend["backward"][-1][1], trend


def _raw_avgs(table: OrbitSumTable):
    st = cesaro_limsup_estimate(table.with_beta(1.0))
    return st.forward_avgs, st.backward_avgs


def existence_check(s: DynSystem, F: Potential, x, beta: float, horizon: int = 10**4,
                    tol: float = 1e-3, table: OrbitSumTable | None = None) -> ExistenceResult:
    """Finite-horizon evidence for the two orbit conditions at ``x``.

    ``holds``: both tail maxima of the Cesaro averages of ``beta F`` (forward,
    and of ``-beta F`` backward) are ``<= tol`` at the final horizon and do
    not increase across ``H/4 -> H/2 -> H``.  ``fails``: some tail maximum is
    ``>= 10 tol`` and has not decayed below half its ``H/4`` value.
    """
    if horizon < 1000:
        raise ValueError("horizon must be at least 1000")
    if table is None or table.N < horizon or table.M < horizon:
        table = build_sum_table(s, x, F, 1.0, horizon, horizon)
    fwd, bwd = _raw_avgs(table)
    v, tf, tb, trend = _verdict_from_raw(fwd[:horizon], bwd[:horizon], beta, horizon, tol)
    return ExistenceResult(v, float(beta), horizon, tol, tf, tb, trend)


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class SpectrumVerdict:
    classification: str
    evidence: dict      # beta -> ExistenceResult as dict (+ seed)
    mismatch: dict      # class -> score
    notes: tuple = ()

    def as_dict(self):
        return {"classification": self.classification,
                "evidence": [dict(beta=b, **{k: v for k, v in e.items() if k != "beta"})
                             for b, e in sorted(self.evidence.items())],
                "mismatch": self.mismatch, "notes": list(self.notes)}


def _expected(cls: str, beta: float) -> str:
    if beta == 0:
        return HOLDS
    if cls == "FullLine":
        return HOLDS
    if cls == "ZeroOnly":
        return FAILS
    if cls == "NonnegRay":
        return HOLDS if beta > 0 else FAILS
    return HOLDS if beta < 0 else FAILS


def default_seeds(s: DynSystem) -> list:
    if isinstance(s, FiniteCycle):
        return [1]
    if s.space_id == INTERVAL:
        return [0.5, 0.25]
    return [0.1, 0.6]


def spectrum_scan(s: DynSystem, F: Potential, beta_grid: Sequence[float], seeds=None,
                  horizon: int = 10**4, tol: float = 1e-3, threads: int = 1) -> SpectrumVerdict:
    """Classify the set of ``beta`` admitting a conformal measure.

    A grid point holds when some seed holds and fails when every seed
    fails.  The class with the fewest contradicted grid points wins
    (inconclusive points count one half); ties go to the earlier class in
    ``ZeroOnly, NonnegRay, NonposRay, FullLine``.
    """
    grid = sorted(float(b) for b in beta_grid)
    if 0.0 not in grid:
        raise ValueError("beta grid must contain 0")
    seeds = default_seeds(s) if seeds is None else list(seeds)

    def raw(x):
        return _raw_avgs(build_sum_table(s, x, F, 1.0, horizon, horizon))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            raws = list(ex.map(raw, seeds))
    else:
        raws = [raw(x) for x in seeds]

    evidence = {}
    for b in grid:
        per = []
        for x, (fw, bw) in zip(seeds, raws):
            v, tf, tb, trend = _verdict_from_raw(fw, bw, b, horizon, tol)
            per.append((v, x, tf, tb, trend))
        if b == 0.0:
            chosen = next(p for p in per if p[0] == HOLDS) if any(p[0] == HOLDS for p in per) else per[0]
            chosen = (HOLDS,) + chosen[1:]
        elif any(p[0] == HOLDS for p in per):
            chosen = next(p for p in per if p[0] == HOLDS)
        elif all(p[0] == FAILS for p in per):
            chosen = per[0]
        else:
            chosen = next(p for p in per if p[0] == INCONCLUSIVE)
        v, x, tf, tb, trend = chosen
        evidence[b] = {"verdict": v, "seed": x, "tail_max_forward": tf,
                       "tail_max_backward": tb, "horizon": horizon, "tol": tol,
                       "trend": trend}
    mismatch = {}
    for cls in CLASSES:
        score = 0.0
        for b, e in evidence.items():
            if e["verdict"] == INCONCLUSIVE:
                score += 0.5
            elif e["verdict"] != _expected(cls, b):
                score += 1.0
        mismatch[cls] = score
    best = min(CLASSES, key=lambda c: (mismatch[c], CLASSES.index(c)))
    notes = []
    if s.minimal and best in ("NonnegRay", "NonposRay"):
        notes.append("horizon artifact: a half-line contradicts the dichotomy for minimal systems")
    if s.uniquely_ergodic:
        try:
            mean = invariant_integral(s, F)
        except NotImplementedError:
            mean = None
        if mean is not None:
            expect = "FullLine" if abs(mean) <= tol else "ZeroOnly"
            notes.append(f"invariant integral {mean:.6g}: uniquely ergodic systems give {expect}"
                         + ("" if expect == best else " (disagrees with the scan)"))
    if all(e["verdict"] == INCONCLUSIVE for b, e in evidence.items() if b != 0):
        notes.append("all nonzero grid points inconclusive")
    return SpectrumVerdict(best, evidence, mismatch, tuple(notes))


# ---------------------------------------------------------------------------
# constructions


class NotCyclic(ValueError):
    def __init__(self, defect):
        super().__init__(f"orbit sum over one period is {defect}, not 0")
        self.defect = defect


class NotPeriodic(ValueError):
    pass


def atomic_periodic(s: DynSystem, F: Potential, x, p: int, beta: float) -> WeightedAtomicMeasure:
    """Weights ``exp(beta S_j) / Z`` on ``x, ..., phi^{p-1} x``.

    Raises :class:`NotCyclic` if ``S_p`` is not zero (to 1e-10) and
    :class:`NotPeriodic` if ``x`` does not have minimal period ``p``.
    """
    orb = s.orbit(x, 0, p)
    if orb[p] != orb[0] or any(orb[j] == orb[0] for j in range(1, p)):
        raise NotPeriodic(f"{x} does not have minimal period {p}")
    t = build_sum_table(s, x, F, beta, 0, p)
    defect = t.exact[p] if t.exact is not None else t.s_values[p]
    if abs(float(defect)) > 1e-10:
        raise NotCyclic(float(defect))
    return WeightedAtomicMeasure.from_log_terms(
        s, np.arange(p), orb[:p], beta * t.s_values[:p], t.f_values[:p], F,
        {"construction": "periodic", "period": p, "defect": float(defect)})


@dataclass(frozen=True)
class Divergent:
    reason: str
    diagnostics: dict


def _envelope_fit(logs: np.ndarray, k: np.ndarray, bins: int = 64):
    """Least-squares slope of the binned maximum of ``logs`` against ``log k``."""
    edges = np.unique(np.geomspace(k[0], k[-1] + 1, bins + 1).astype(np.int64))
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (k >= lo) & (k < hi)
        if sel.any():
            i = np.argmax(np.where(sel, logs, -np.inf))
            xs.append(math.log(k[i]))
            ys.append(logs[i])
    X = np.column_stack([np.ones(len(xs)), xs])
    coef, *_ = np.linalg.lstsq(X, np.array(ys), rcond=None)
    resid = np.array(ys) - X @ coef
    dof = max(len(xs) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[1]), float(math.sqrt(cov[1, 1])), float(coef[0]), len(xs)


def summability_certificate(table: OrbitSumTable, margin: float = 3.0) -> dict:
    """Power-law envelope of ``exp(beta S_k)`` over the last decade, each side.

    Convergent when ``slope + margin * SE < -1`` on both sides; the tail
    beyond the window is then bounded by the fitted ``C k^slope``.
    """
    out = {}
    for side, n in (("forward", table.M), ("backward", table.N)):
        k = np.arange(max(1, n // 10), n + 1)
        logs = table.beta * (table.S(k) if side == "forward" else table.S(-k))
        slope, se, icpt, used = _envelope_fit(logs, k)
        ok = slope + margin * se < -1
        tail = math.exp(icpt) * n ** (slope + 1) / (-(slope + 1)) if ok else math.inf
        out[side] = {"slope": slope, "se": se, "bins": used, "passed": bool(ok),
                     "tail_mass_bound": tail, "decade": [int(k[0]), int(k[-1])]}
    out["passed"] = out["forward"]["passed"] and out["backward"]["passed"]
    out["margin_se"] = margin
    return out


def atomic_summable(s: DynSystem, F: Potential, x, beta: float, N: int = 10**5,
                    table: OrbitSumTable | None = None):
    """Orbit measure with weights ``exp(beta S_k)`` when the sum over Z converges.

    Returns a :class:`WeightedAtomicMeasure` on ``[-N, N]`` or
    :class:`Divergent` with the fitted growth diagnostics.
    """
    if table is None or table.N < N or table.M < N:
        table = build_sum_table(s, x, F, beta, N, N)
    else:
        table = table.with_beta(beta)
    if N > table.N or N > table.M:
        raise ValueError("table too small")
    period = s.period_of(x)
    if period is not None:
        raise NotPeriodic(f"{x} is periodic; use atomic_periodic")
    cert = summability_certificate(table)
    ks = np.arange(-N, N + 1)
    logs = table.beta * table.S(ks)
    lz = logsumexp(logs)
    diag = {"certificate": cert, "log_partial_sum": lz,
            "log_partial_sum_half": logsumexp(table.beta * table.S(np.arange(-N // 2, N // 2 + 1)))}
    if not cert["passed"]:
        return Divergent("terms do not decay faster than 1/k", diag)
    coords = s.orbit(x, N, N)
    fv = np.concatenate([table.f_values[table.N - N: table.N + N], F.values_at(s, x, [N])])
    tail = cert["forward"]["tail_mass_bound"] + cert["backward"]["tail_mass_bound"]
    return WeightedAtomicMeasure.from_log_terms(
        s, ks, coords, logs, fv, F,
        {"construction": "summable", "certificate": cert,
         "tail_mass_estimate": tail / math.exp(lz)})


@dataclass
class ConformalReport:
    measure: object
    converged: bool
    boundary_ratio: float
    ratio_history: list
    residuals: dict
    windows: list
    notes: list = field(default_factory=list)
    s_values: np.ndarray | None = None

    def as_dict(self):
        return {"converged": self.converged, "boundary_ratio": self.boundary_ratio,
                "ratio_history": self.ratio_history, "residuals": self.residuals,
                "windows": self.windows, "notes": self.notes,
                "measure": self.measure.as_dict() if self.measure is not None else None}


def _best_window(lb: np.ndarray, lf: np.ndarray, h: int, candidates: int = 64):
    """Window ``[-n, m]``, ``1 <= n, m <= h``, with a small boundary ratio.

    ``lb[n] = beta S_{-n}``, ``lf[m] = beta S_m``.  Endpoints are first
    ranked by their log-weight minus the log-partition of their own side
    (the record-minimum criterion), then all pairs among the best few are
    scored exactly.
    """
    pb = np.logaddexp.accumulate(lb[: h + 1])          # log sum_{j<=n} e^{lb_j}, includes S_0
    pf = np.logaddexp.accumulate(lf[1: h + 1])         # log sum_{1<=j<=m}
    ub = lb[1: h + 1] - pb[1:]
    uf = lf[1: h + 1] - np.logaddexp(pf, 0.0)
    cb = np.argsort(ub, kind="stable")[:candidates] + 1
    cf = np.argsort(uf, kind="stable")[:candidates] + 1
    logZ = np.logaddexp(pb[cb][:, None], pf[cf - 1][None, :])
    num = np.logaddexp(lb[cb][:, None], lf[cf][None, :])
    r = num - logZ
    i, j = np.unravel_index(np.argmin(r), r.shape)
    return int(cb[i]), int(cf[j]), float(math.exp(r[i, j]))


def hopf_construct(s: DynSystem, F: Potential, x, beta: float, ratio_tol: float = 1e-3,
                   max_horizon: int = 10**5, test_functions=None,
                   min_horizon: int = 1024) -> ConformalReport:
    """Weighted orbit window whose boundary weights are negligible.

    The window grows by doubling from ``min_horizon`` to ``max_horizon``;
    at each size the best window is picked by :func:`_best_window`.  Stops
    once the boundary ratio is ``<= ratio_tol``.
    """
    tests = standard_tests(s) if test_functions is None else test_functions
    if isinstance(s, FiniteCycle):
        try:
            m = atomic_periodic(s, F, x, s.p, beta)
        except NotCyclic as e:
            return ConformalReport(None, False, math.inf, [], {}, [],
                                   [f"finite orbit is not F-cyclic (defect {e.defect:g})"])
        return ConformalReport(m, True, 0.0, [0.0], conformality_residual(m, s, F, beta, tests),
                               [[0, s.p - 1]], ["finite cycle: one period"])
    table = build_sum_table(s, x, F, beta, max_horizon, max_horizon)
    lb = beta * table.s_values[: table.N + 1][::-1]
    lf = beta * table.s_values[table.N:]
    h = min(min_horizon, max_horizon)
    history, windows = [], []
    best = None
    while True:
        n, m_, r = _best_window(lb, lf, h)
        history.append(r)
        windows.append([-n, m_])
        if best is None or r < best[2]:
            best = (n, m_, r)
        if r <= ratio_tol or h >= max_horizon:
            break
        h = min(2 * h, max_horizon)
    n, m_, r = best
    ks = np.arange(-n, m_ + 1)
    logs = beta * table.S(ks)
    coords = s.orbit(x, n, m_)
    fv = table.f_values[table.N - n: table.N + m_ + 1]
    if fv.size < ks.size:  # right end sits on the table edge
        fv = np.concatenate([fv, F.values_at(s, x, [m_])])
    meas = WeightedAtomicMeasure.from_log_terms(
        s, ks, coords, logs, fv, F, {"construction": "window", "window": [-n, m_]})
    res = conformality_residual(meas, s, F, beta, tests)
    notes = [] if r <= ratio_tol else [f"boundary ratio {r:.3g} above {ratio_tol:g} at horizon {max_horizon}"]
    return ConformalReport(meas, r <= ratio_tol, r, history, res, windows, notes,
                           table.S(ks))


def coboundary_conformal_density(H: Potential, s: DynSystem, beta: float,
                                 grid: int = 2**14) -> DensityMeasure:
    """``exp(beta H) d(mu) / int exp(beta H) d(mu)`` for ``F = H o phi - H``."""
    nodes, w = s.invariant_quadrature(grid)
    lh = beta * np.asarray(H(nodes), dtype=float)
    lz = logsumexp(lh + np.log(w))
    return DensityMeasure(s, np.asarray(nodes), np.asarray(w), lh - lz, lz,
                          meta={"construction": "coboundary density", "beta": beta})


class BracketFailed(ValueError):
    pass


def invariant_bracket(s: DynSystem, F: Potential, seeds, horizon: int = 10**4, tol: float = 1e-3):
    """Forward Cesaro means of ``F`` from several seeds and the convex weight
    on the largest making the combination integrate ``F`` to zero."""
    means = []
    for x in seeds:
        v = F.values_at(s, x, np.arange(horizon))
        means.append(math.fsum(v.tolist()) / horizon)
    hi, lo = max(means), min(means)
    if lo > tol or hi < -tol:
        raise BracketFailed(f"bracket failed: means in [{lo:.6g}, {hi:.6g}] do not straddle 0")
    w = 0.5 if hi - lo <= tol else -lo / (hi - lo)
    return hi, lo, float(min(1.0, max(0.0, w)))
