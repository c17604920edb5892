"""Measure types of conformal measures and the matching factor types.

Labels: ``I_p`` (an F-cyclic periodic orbit), ``I_infinity`` (an infinite
orbit with summable weights), ``II_1`` (Cesaro means of ``exp(beta S_j)``
bounded below), and ``II_inf_or_III`` for everything else.  The last label
is never split: telling II_infinity from III needs singularity against all
invariant measures, which no finite orbit computation can see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .birkhoff import build_sum_table, logsumexp
from .conformal import DensityMeasure, WeightedAtomicMeasure, summability_certificate
from .dynsys import DynSystem
from .potential import Potential

DELTA = 1e-6          # lower threshold for the Cesaro weight liminf
CYCLIC_TOL = 1e-10
LABELS = ("I_p", "I_infinity", "II_1", "II_inf_or_III")


@dataclass(frozen=True)
class TypeVerdict:
    label: str
    period: int | None
    diagnostics: dict
    thresholds: dict

    @property
    def factor_label(self) -> str:
        return factor_report(self)["factor"]

    def as_dict(self):
        return {"label": self.label, "period": self.period, "factor": self.factor_label,
                "thresholds": self.thresholds, "diagnostics": self.diagnostics}


def cesaro_weight_liminf(beta_s_fwd: np.ndarray, horizon: int) -> list:
    """Minimum over ``n in [h/2, h]`` of ``(1/n) sum_{j=1}^n exp(beta S_j)``
    at ``h = H/4, H/2, H``; ``beta_s_fwd[j] = beta S_j`` for ``j >= 0``."""
    w = np.exp(np.clip(beta_s_fwd[1: horizon + 1], -745.0, 709.0))
    means = np.cumsum(w) / np.arange(1, horizon + 1)
    return [[h, float(means[h // 2 - 1: h].min())] for h in (horizon // 4, horizon // 2, horizon)]


def _orbit_verdict(s, F, beta, x, horizon, diag):
    table = build_sum_table(s, x, F, beta, horizon, horizon)
    cert = summability_certificate(table)
    diag["summability"] = cert
    if cert["passed"]:
        return "I_infinity", table
    rows = cesaro_weight_liminf(beta * table.s_values[table.N:], horizon)
    diag["cesaro_weight_liminf"] = rows
    if all(v > DELTA for _, v in rows):
        return "II_1", table
    sol = solve_cocycle(s, x, F, beta, (horizon, horizon))
    diag["cocycle"] = sol.stats()
    return "II_inf_or_III", table


def _typical_points(m: DensityMeasure, count: int = 3):
    cdf = np.cumsum(m.weights)
    return [float(m.nodes[min(np.searchsorted(cdf, q), cdf.size - 1)])
            for q in np.linspace(0.2, 0.8, count)]


def classify_measure(m, s: DynSystem, F: Potential, beta: float, horizon: int = 10**5) -> TypeVerdict:
    """Type of ``m`` from orbit evidence at its base point(s).

    Atomic measures are judged at the orbit through their ``k = 0`` atom;
    density measures at a few quantile points of ``m``, all of which must
    agree for a label other than ``II_inf_or_III``.
    """
    thresholds = {"delta": DELTA, "cyclic_tol": CYCLIC_TOL, "horizon": horizon,
                  "summability": "envelope slope + 3 SE < -1 on both sides",
                  "doubling": "H/4, H/2, H"}
    diag: dict = {}
    if isinstance(m, WeightedAtomicMeasure):
        x0 = m.coords[list(m.ks).index(0)] if 0 in m.ks else m.coords[0]
        p = s.period_of(x0)
        if p is not None:
            S = build_sum_table(s, x0, F, beta, 0, p)
            defect = float(S.exact[p] if S.exact is not None else S.s_values[p])
            diag["period_defect"] = defect
            if abs(defect) <= CYCLIC_TOL:
                return TypeVerdict("I_p", p, diag, thresholds)
            return TypeVerdict("II_inf_or_III", None, diag, thresholds)
        label, _ = _orbit_verdict(s, F, beta, x0, horizon, diag)
        return TypeVerdict(label, None, diag, thresholds)
    if isinstance(m, DensityMeasure):
        labels = []
        per = {}
        for x in _typical_points(m):
            d: dict = {}
            lab, _ = _orbit_verdict(s, F, beta, x, horizon, d)
            labels.append(lab)
            per[f"{x:.12g}"] = {"label": lab, **{k: v for k, v in d.items() if k != "summability"},
                                "summable": d["summability"]["passed"]}
        diag["points"] = per
        label = labels[0] if len(set(labels)) == 1 and labels[0] != "I_infinity" else "II_inf_or_III"
        if labels[0] == "I_infinity" and len(set(labels)) == 1:
            diag["note"] = "summable orbits under a non-atomic measure; left unrefined"
        return TypeVerdict(label, None, diag, thresholds)
    raise TypeError("classify_measure expects an atomic or density measure")


# ---------------------------------------------------------------------------
# cocycles and invariant measures


@dataclass(frozen=True)
class CocycleSolution:
    """``h(phi^k x) = beta S_k(F)(x)`` on ``[-N, M]``, normalised by ``h(x) = 0``."""

    x: object
    ks: np.ndarray
    h: np.ndarray
    f_values: np.ndarray
    beta: float

    def telescoping_residual(self) -> float:
        return float(np.max(np.abs(np.diff(self.h) - self.beta * self.f_values))) if self.f_values.size else 0.0

    def stats(self) -> dict:
        n = self.ks.size
        halves = {}
        for frac in (4, 2, 1):
            sel = np.abs(self.ks) <= (np.abs(self.ks).max() // frac)
            halves[f"1/{frac}"] = {"sup_abs_h": float(np.max(np.abs(self.h[sel]))),
                                   "log_mean_exp_neg_h": logsumexp(-self.h[sel]) - math.log(int(sel.sum()))}
        return {"points": int(n), "sup_abs_h": float(np.max(np.abs(self.h))),
                "bounded_trend": halves}


def solve_cocycle(s: DynSystem, x, F: Potential, beta: float, window=(1000, 1000)) -> CocycleSolution:
    N, M = window
    t = build_sum_table(s, x, F, beta, N, M)
    return CocycleSolution(x, t.ks, beta * t.s_values, t.f_values, float(beta))


class SupportMismatch(ValueError):
    pass


@dataclass(frozen=True)
class InvariantMeasureEstimate:
    ks: np.ndarray
    coords: np.ndarray
    log_weights: np.ndarray     # log(w_k) - h_k, unnormalised
    masses: list                # [[window, mass relative to m on that window]]
    trend: str                  # finite, diverging or vanishing
    invariance_residual: dict

    def as_dict(self):
        return {"masses": self.masses, "trend": self.trend,
                "invariance_residual": self.invariance_residual}


def invariant_from_cocycle(m: WeightedAtomicMeasure, sol: CocycleSolution, s: DynSystem | None = None,
                           tests=None) -> InvariantMeasureEstimate:
    """``d(nu) = exp(-h) dm`` on the atoms, with its mass over nested windows.

    The mass on each nested window (central quarter, half, all) is taken
    relative to ``m`` renormalised to that window.  Growth by a factor of at
    least 1.5 per step labels the mass ``diverging``, shrinkage by that
    factor ``vanishing``, otherwise ``finite``.
    """
    index = {int(k): i for i, k in enumerate(sol.ks)}
    try:
        hs = np.array([sol.h[index[int(k)]] for k in m.ks])
    except KeyError:
        raise SupportMismatch("measure atoms lie outside the cocycle window") from None
    lw = m.log_weights - hs
    ks = np.asarray(m.ks)
    masses = []
    if ks.size > 1 and m.meta.get("construction") != "periodic":
        lo, hi = int(ks.min()), int(ks.max())
        for frac in (4, 2, 1):
            sel = (ks >= lo / frac) & (ks <= hi / frac)
            masses.append([frac, math.exp(logsumexp(lw[sel]) - logsumexp(m.log_weights[sel]))])
    else:
        masses.append([1, math.exp(logsumexp(lw))])
    vals = [v for _, v in masses]
    steps = [b / a for a, b in zip(vals, vals[1:])]
    if steps and all(r >= 1.5 for r in steps):
        trend = "diverging"
    elif steps and all(r <= 1 / 1.5 for r in steps):
        trend = "vanishing"
    else:
        trend = "finite"
    resid = {}
    if s is not None:
        from .conformal import standard_tests
        w = np.exp(lw - logsumexp(lw))
        for name, f in (standard_tests(s) if tests is None else tests):
            a = math.fsum((w * np.asarray(f(m.coords), dtype=float)).tolist())
            if m.meta.get("construction") == "periodic":
                b = math.fsum((w * np.asarray(f(s.forward(m.coords)), dtype=float)).tolist())
            else:  # the pushed measure sits on the next atoms
                b = math.fsum((w[:-1] * np.asarray(f(m.coords[1:]), dtype=float)).tolist()) \
                    + w[-1] * float(np.asarray(f(s.forward(m.coords[-1:])))[0])
            resid[name] = float(abs(a - b))
    return InvariantMeasureEstimate(ks, m.coords, lw, masses, trend, resid)


def factor_report(verdict: TypeVerdict) -> dict:
    """Von Neumann type of the representation given by the measure."""
    lab = verdict.label
    if lab == "I_p":
        p = verdict.period
        text = f"not a factor; M_{p}(C)⊗L^∞(T)"
    elif lab == "I_infinity":
        text = "factor of type I_∞"
    elif lab == "II_1":
        text = "factor of type II_1"
    else:
        text = "factor of type II_∞ or III (not decidable from finite orbit data)"
    return {"measure_type": lab, "factor": text}
