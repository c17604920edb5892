import csv
import json
import math

import pytest

from conflab.cli import dumps_report, main

GOLDEN_SYS = {"kind": "rotation", "alpha": "golden"}
COB = {"kind": "coboundary", "H": {"kind": "trig", "cos": {"1": 1.0}}}


def run(tmp_path, command, cfg, *extra):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def data_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_spectrum_constant_is_zero_only(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "constant", "c": 1},
           "beta": {"min": -2, "max": 2, "steps": 5}}
    code, rep, out = run(tmp_path, "spectrum", cfg)
    assert code == 0
    assert rep["result"]["classification"] == "ZeroOnly"
    rows = data_rows(out / "spectrum.csv")
    assert [float(r["beta"]) for r in rows] == [-2, -1, 0, 1, 2]
    assert {r["verdict"] for r in rows} == {"holds", "fails"}
    assert (out / "spectrum.csv").read_text().startswith("# ")


def test_report_echoes_defaults(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "constant", "c": 1}, "beta": {"grid": [0, 1]}}
    _, rep, _ = run(tmp_path, "spectrum", cfg)
    assert rep["config"]["horizon"] == 10**4 and rep["config"]["tol"] == 0.001
    assert rep["schema_version"] == 1


def test_construct_writes_measure(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": COB, "construct": {"method": "hopf", "beta": 1.0, "x": 0.1}}
    code, rep, out = run(tmp_path, "construct", cfg)
    assert code == 0
    rows = data_rows(out / "measure.csv")
    assert abs(math.fsum(float(r["weight"]) for r in rows) - 1) <= 1e-9
    assert max(rep["result"]["residuals"].values()) < 1e-2


def test_divergent_construction_gives_header_only_csv(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": COB,
           "construct": {"method": "atomic_summable", "beta": 1.0, "x": 0.1, "N": 10**4}}
    code, rep, out = run(tmp_path, "construct", cfg)
    assert code == 0 and rep["result"]["divergent"]
    assert data_rows(out / "measure.csv") == []


def test_precision_error_exit_one(tmp_path, capsys):
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "appendix_b", "K": 4}}
    code, _, _ = run(tmp_path, "potential-build", cfg)
    assert code == 1
    assert "precision" in capsys.readouterr().err


def test_precision_env_switches_to_exact(tmp_path, monkeypatch):
    monkeypatch.setenv("CONFLAB_PRECISION", "exact")
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "appendix_b", "K": 3}}
    code, rep, _ = run(tmp_path, "potential-build", cfg)
    assert code == 0 and rep["result"]["potential"]["exact"]


@pytest.mark.parametrize("cfg,field", [
    ({"potential": {"kind": "constant"}}, "system"),
    ({"system": {"kind": "torus"}, "potential": {"kind": "constant"}}, "system.kind"),
    ({"system": GOLDEN_SYS, "potential": {"kind": "wave"}}, "potential.kind"),
    ({"system": GOLDEN_SYS, "potential": {"kind": "constant"}, "tol": -1}, "tol"),
    ({"system": GOLDEN_SYS, "potential": {"kind": "constant"}, "beta": {"grid": [1, 2]}}, "beta"),
    ({"system": {"kind": "finite_cycle"}, "potential": {"kind": "constant"}}, "system.p"),
])
def test_config_errors_name_the_field(tmp_path, capsys, cfg, field):
    code, _, _ = run(tmp_path, "spectrum", cfg)
    assert code == 1
    assert f"{field}:" in capsys.readouterr().err


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_unconverged_hopf_exits_two(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "constant", "c": 1},
           "construct": {"method": "hopf", "beta": 1.0, "x": 0.1, "max_horizon": 2048}}
    code, rep, _ = run(tmp_path, "construct", cfg)
    assert code == 2 and rep["exit_code"] == 2 and not rep["result"]["converged"]


def test_classify_periodic(tmp_path):
    cfg = {"system": {"kind": "finite_cycle", "p": 3},
           "potential": {"kind": "table", "values": ["1", "-1/2", "-1/2"]},
           "construct": {"method": "atomic_periodic", "beta": 1.0, "x": 1}}
    code, rep, _ = run(tmp_path, "classify", cfg)
    assert code == 0
    assert rep["result"]["classification"]["label"] == "I_p"
    assert rep["result"]["factor"]["factor"] == "not a factor; M_3(C)⊗L^∞(T)"


def test_gibbs(tmp_path):
    cfg = {"system": {"kind": "finite_cycle", "p": 2}, "potential": {"kind": "table", "values": ["1", "-1"]},
           "gibbs": {"betas": [1.0], "pairs": 10}}
    code, rep, _ = run(tmp_path, "gibbs", cfg, "--seed", "3")
    st = rep["result"]["states"][0]
    assert code == 0 and st["kms_residual_max"] < 1e-10 and st["max_weight_gap_to_conformal"] < 1e-14
    assert rep["result"]["non_injectivity"]["states_differ"]


def test_flow_props(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "trig", "cos": {"1": 1.0}}, "flow": {"n_list": [100, 1000]}}
    code, rep, _ = run(tmp_path, "flow-props", cfg)
    assert code == 0
    assert rep["result"]["innerness"]["verdict"] == "inner_evidence"
    assert rep["result"]["approximate_innerness"]["verdict"] == "approximately_inner"


def test_dump_rounds_and_sorts():
    text = dumps_report({"b": 1 / 3, "a": [float("inf"), -0.0, float("nan")]})
    assert text.index('"a"') < text.index('"b"')
    assert "0.333333333333" in text and "0.3333333333333" not in text
    assert '"inf"' in text and '"nan"' in text and "-0.0" not in text


def test_runs_are_byte_identical(tmp_path):
    cfg = {"system": GOLDEN_SYS, "potential": {"kind": "constant", "c": 1},
           "beta": {"min": -2, "max": 2, "steps": 5}}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    for d in ("a", "b"):
        assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / d), "--seed", "1"]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
