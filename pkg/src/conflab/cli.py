"""Command-line front end.

``conflab SUBCOMMAND --config run.json [--out DIR] [--threads N] [--seed S]``

Subcommands: spectrum, construct, classify, gibbs, potential-build,
flow-props.  Every run writes ``report.json`` (keys sorted, floats rounded
to 12 significant digits, no timestamps) and, where relevant, CSV files.
Exit status: 0 success, 1 error, 2 inconclusive-only results.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .appendix_a import ConstructionError
from .appendix_b import PrecisionError
from .classify import classify_measure, factor_report, invariant_from_cocycle, solve_cocycle
from .conformal import (
    Divergent,
    NotCyclic,
    atomic_periodic,
    atomic_summable,
    coboundary_conformal_density,
    conformality_residual,
    default_seeds,
    hopf_construct,
    spectrum_scan,
)
from .dynsys import FiniteCycle, system_from_spec
from .flowprops import approx_inner_test, hn_defect, innerness_test
from .kms_finite import FiniteOrbitModel, gibbs_state, kms_residual, non_injectivity_witness
from .potential import Coboundary, potential_from_spec

SCHEMA_VERSION = 1
COMMANDS = ("spectrum", "construct", "classify", "gibbs", "potential-build", "flow-props")


class ConfigError(ValueError):
    """A config field is missing or invalid; the message names the field."""


# ---------------------------------------------------------------------------
# config


DEFAULTS = {
    "horizon": 10**4,
    "tol": 1e-3,
    "precision": "float",
    "beta": {"min": -4.0, "max": 4.0, "steps": 9},
    "construct": {"method": "hopf", "beta": 1.0, "ratio_tol": 1e-3,
                  "max_horizon": 10**5, "min_horizon": 1024, "N": 10**5},
    "gibbs": {"betas": [-2.0, -1.0, 0.0, 1.0, 2.0], "pairs": 100},
    "flow": {"n_list": [100, 1000, 10000], "grid": 4096},
}


def _merged(cfg: dict) -> dict:
    out = json.loads(json.dumps(DEFAULTS))
    for k, v in cfg.items():
        if k == "beta" and isinstance(v, dict) and "grid" in v:
            out[k] = dict(v)
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v
    return out


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"--config: cannot read {path}: {e.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    return cfg


def beta_grid(cfg: dict) -> list[float]:
    b = cfg["beta"]
    if "grid" in b:
        grid = [float(v) for v in b["grid"]]
    else:
        try:
            lo, hi, n = float(b["min"]), float(b["max"]), int(b["steps"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("beta: need min, max and steps (or grid)") from None
        if n < 1:
            raise ConfigError("beta.steps: must be positive")
        grid = [round(float(v), 12) + 0.0 for v in np.linspace(lo, hi, n)]
    if not grid:
        raise ConfigError("beta: grid is empty")
    return grid


def _validate(cfg: dict, command: str):
    if "system" not in cfg:
        raise ConfigError("system: missing")
    if command != "gibbs" and "potential" not in cfg:
        raise ConfigError("potential: missing")
    if not float(cfg["tol"]) > 0:
        raise ConfigError("tol: must be positive")
    if int(cfg["horizon"]) < 1000 and command in ("spectrum",):
        raise ConfigError("horizon: must be at least 1000")
    if cfg["precision"] not in ("float", "exact"):
        raise ConfigError("precision: must be 'float' or 'exact'")


def _build(cfg):
    try:
        s = system_from_spec(cfg["system"])
    except KeyError as e:
        raise ConfigError(f"system.{e.args[0]}: missing") from None
    except (ValueError, TypeError) as e:
        raise ConfigError(f"system: {e}") from None
    pot = dict(cfg.get("potential", {}))
    if pot.get("kind") == "appendix_b" and "exact" not in pot:
        pot["exact"] = cfg["precision"] == "exact"
    try:
        F = potential_from_spec(pot, s) if pot else None
    except (PrecisionError, ConstructionError):
        raise
    except KeyError as e:
        raise ConfigError(f"potential.{e.args[0]}: missing") from None
    except (ValueError, TypeError) as e:
        msg = str(e)
        raise ConfigError(msg if msg.startswith("potential") else f"potential: {msg}") from None
    return s, F


# ---------------------------------------------------------------------------
# output


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return float(f"{v:.12g}") + 0.0
    if isinstance(v, complex):
        return [_clean(v.real), _clean(v.imag)]
    if v is None or isinstance(v, str):
        return v
    return str(v)


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _fmt(v) -> str:
    return "" if v is None else repr(float(f"{float(v):.12g}") + 0.0)


def write_spectrum_csv(path: Path, verdict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# beta: inverse temperature; verdict: holds/fails/inconclusive\n")
        fh.write("# tail_max_fwd, tail_max_bwd: tail maxima of the Cesaro averages at the final horizon\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "verdict", "tail_max_fwd", "tail_max_bwd", "horizon"])
        for b, e in sorted(verdict.evidence.items()):
            w.writerow([_fmt(b), e["verdict"], _fmt(e["tail_max_forward"]),
                        _fmt(e["tail_max_backward"]), e["horizon"]])


def write_measure_csv(path: Path, measure, s_values=None) -> float:
    """Rows ``k, S_k, weight, coordinate``; returns the weight total."""
    total = 0.0
    with open(path, "w", newline="") as fh:
        fh.write("# k: orbit index (or node index for densities); S_k: orbit sum (blank if n/a)\n")
        fh.write("# weight: probability of the atom or node; coordinate: its position\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "S_k", "weight", "coordinate"])
        if measure is None:
            return 0.0
        if hasattr(measure, "ks"):
            for i, (k, coord, sk, wt) in enumerate(measure.rows(s_values)):
                w.writerow([k, _fmt(sk), _fmt(wt), _fmt(coord)])
                total += wt
        else:
            for i, (x, wt) in enumerate(zip(measure.nodes, measure.weights)):
                w.writerow([i, "", _fmt(wt), _fmt(x)])
                total += wt
    return total


# ---------------------------------------------------------------------------
# commands


def _seeds(cfg, s):
    return cfg.get("seeds") or default_seeds(s)


def cmd_spectrum(cfg, out: Path, threads: int):
    s, F = _build(cfg)
    grid = beta_grid(cfg)
    if 0.0 not in grid:
        raise ConfigError("beta: grid must contain 0")
    v = spectrum_scan(s, F, grid, _seeds(cfg, s), int(cfg["horizon"]), float(cfg["tol"]), threads)
    write_spectrum_csv(out / "spectrum.csv", v)
    inconclusive = all(e["verdict"] == "inconclusive" for b, e in v.evidence.items() if b != 0)
    result = v.as_dict()
    return result, (2 if inconclusive and len(grid) > 1 else 0)


def _construct(cfg, s, F):
    c = cfg["construct"]
    method = c["method"]
    beta = float(c["beta"])
    x = c.get("x", _seeds(cfg, s)[0])
    if method == "hopf":
        rep = hopf_construct(s, F, x, beta, float(c["ratio_tol"]), int(c["max_horizon"]),
                             min_horizon=int(c["min_horizon"]))
        return rep.measure, rep.as_dict(), rep.s_values, (0 if rep.converged else 2), x
    if method == "atomic_periodic":
        p = int(c.get("p", getattr(s, "p", 0)))
        try:
            m = atomic_periodic(s, F, x, p, beta)
        except NotCyclic as e:
            return None, {"not_cyclic": True, "defect": e.defect}, None, 0, x
        from .birkhoff import build_sum_table
        sv = build_sum_table(s, x, F, beta, 0, p).s_values[:p]
        return m, {"measure": m.as_dict(), "residuals": conformality_residual(m, s, F, beta)}, sv, 0, x
    if method == "atomic_summable":
        N = int(c["N"])
        res = atomic_summable(s, F, x, beta, N)
        if isinstance(res, Divergent):
            return None, {"divergent": True, "reason": res.reason, "diagnostics": res.diagnostics}, None, 0, x
        from .birkhoff import build_sum_table
        sv = build_sum_table(s, x, F, beta, N, N).s_values
        return res, {"measure": res.as_dict(), "residuals": conformality_residual(res, s, F, beta)}, sv, 0, x
    if method == "density":
        if not isinstance(F, Coboundary):
            raise ConfigError("construct.method: density needs a coboundary potential")
        m = coboundary_conformal_density(F.H, s, beta, int(c.get("grid", 2**14)))
        return m, {"measure": m.as_dict(), "residuals": conformality_residual(m, s, F, beta)}, None, 0, x
    raise ConfigError(f"construct.method: unknown method {method!r}")


def cmd_construct(cfg, out, threads):
    s, F = _build(cfg)
    m, result, sv, code, _ = _construct(cfg, s, F)
    total = write_measure_csv(out / "measure.csv", m, sv)
    result["weights_total"] = total
    return result, code


def cmd_classify(cfg, out, threads):
    s, F = _build(cfg)
    m, result, sv, code, x = _construct(cfg, s, F)
    if m is None:
        return {"construction": result, "classification": None}, 2
    beta = float(cfg["construct"]["beta"])
    v = classify_measure(m, s, F, beta, int(cfg["horizon"]))
    report = {"construction": result, "classification": v.as_dict(), "factor": factor_report(v)}
    if hasattr(m, "ks"):
        lo, hi = int(m.ks.min()), int(m.ks.max())
        sol = solve_cocycle(s, x, F, beta, (max(0, -lo), max(0, hi)))
        report["invariant_measure"] = invariant_from_cocycle(m, sol, s).as_dict()
        report["cocycle"] = {"telescoping_residual": sol.telescoping_residual(), **sol.stats()}
    write_measure_csv(out / "measure.csv", m, sv)
    return report, code


def cmd_gibbs(cfg, out, threads, seed):
    s = system_from_spec(cfg["system"])
    pot = cfg.get("potential")
    if pot is None:
        raise ConfigError("potential: missing")
    F = potential_from_spec(pot, s)
    x = cfg.get("x", 1 if isinstance(s, FiniteCycle) else None)
    p = int(cfg.get("p", getattr(s, "p", 0)))
    if x is None or p < 1:
        raise ConfigError("p: a period and base point x are needed outside finite cycles")
    model = FiniteOrbitModel.from_orbit(s, F, x, p)
    rng = np.random.default_rng(seed)
    rows = []
    for b in cfg["gibbs"]["betas"]:
        g = gibbs_state(model, float(b))
        res = []
        for _ in range(int(cfg["gibbs"]["pairs"])):
            a = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
            c = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
            res.append(kms_residual(model, float(b), a, c))
        m = atomic_periodic(s, F, x, p, float(b))
        rows.append({"beta": float(b), "weights": g.weights.tolist(),
                     "kms_residual_max": max(res) if res else 0.0,
                     "max_weight_gap_to_conformal": float(np.max(np.abs(g.weights - m.weights)))})
    report = {"model": model.as_dict(), "states": rows}
    if p >= 2:
        report["non_injectivity"] = non_injectivity_witness(model, 1.0)
    return report, 0


def cmd_potential_build(cfg, out, threads):
    s, F = _build(cfg)
    cert = getattr(F, "certificate", None)
    report = {"potential": F.describe(), "tail_bound": float(F.tail_bound),
              "certificate": cert}
    ok = cert.get("all_passed", True) if isinstance(cert, dict) else True
    return report, (0 if ok else 1)


def cmd_flow_props(cfg, out, threads):
    s, F = _build(cfg)
    seeds = _seeds(cfg, s)
    inner = innerness_test(s, F, seeds, int(cfg["horizon"]), float(cfg["tol"]))
    approx = approx_inner_test(s, F, float(cfg["tol"]), seeds)
    report = {"innerness": inner.as_dict(), "approximate_innerness": approx.as_dict()}
    if cfg["flow"].get("n_list"):
        report["hn_defect"] = hn_defect(s, F, cfg["flow"]["n_list"], int(cfg["flow"]["grid"]))
    code = 2 if inner.verdict in ("inconclusive",) else 0
    return report, code


def run(command: str, cfg: dict, out: Path, threads: int = 1, seed: int = 0) -> int:
    """Execute one command; writes ``report.json`` under ``out``."""
    cfg = _merged(cfg)
    env = os.environ.get("CONFLAB_PRECISION")
    if env:
        cfg["precision"] = env
    _validate(cfg, command)
    out.mkdir(parents=True, exist_ok=True)
    if command == "spectrum":
        result, code = cmd_spectrum(cfg, out, threads)
    elif command == "construct":
        result, code = cmd_construct(cfg, out, threads)
    elif command == "classify":
        result, code = cmd_classify(cfg, out, threads)
    elif command == "gibbs":
        result, code = cmd_gibbs(cfg, out, threads, seed)
    elif command == "potential-build":
        result, code = cmd_potential_build(cfg, out, threads)
    elif command == "flow-props":
        result, code = cmd_flow_props(cfg, out, threads)
    else:
        raise ConfigError(f"command: unknown {command!r}")
    report = {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command,
              "seed": seed, "config": cfg, "result": result, "exit_code": code}
    (out / "report.json").write_text(dumps_report(report))
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="conflab", description="Conformal measures and KMS states.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default="conflab-out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for seed scans")
    ap.add_argument("--seed", type=int, default=0, help="random seed (random test matrices)")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        code = run(args.command, cfg, Path(args.out), max(1, args.threads), args.seed)
    except ConfigError as e:
        print(f"conflab: config error: {e}", file=sys.stderr)
        return 1
    except PrecisionError as e:
        print(f"conflab: {e}", file=sys.stderr)
        return 1
    except (ConstructionError, NotCyclic, ValueError, TypeError, OverflowError) as e:
        print(f"conflab: error: {e}", file=sys.stderr)
        return 1
    print(f"conflab: wrote {Path(args.out) / 'report.json'} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
