import csv
import json
import math

import numpy as np
import pytest

from alpha_bundle.cli import main
from alpha_bundle.families import NORMAL_SOURCE

EXPR_FAMILY = {
    "expression": NORMAL_SOURCE, "n": 2,
    "domain": {"lower": ["-inf", 0], "upper": ["inf", "inf"]},
    "sample_space": {"kind": "real"},
    "quad_hint": {"loc": "th1", "scale": "th2"},
    "safe_box": {"lower": [-2, 0.5], "upper": [2, 3]},
}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_tensors_json(capsys):
    code, out, _ = run(capsys, "tensors", "--family", "normal", "--theta", "0,1", "--alpha", "0")
    assert code == 0
    pt = json.loads(out)["points"][0]
    assert pt["R_1212"] == 1.0 and pt["sectional_curvature"] == -0.5


def test_tensors_grid_csv(capsys):
    code, out, _ = run(capsys, "tensors", "--family", "normal", "--theta", "0,1;3,2", "--format", "csv")
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and len(rows) == 2
    assert float(rows[1]["g_11"]) == 0.25 and float(rows[0]["R_1212"]) == 1.0


def test_missing_family(capsys):
    code, _, err = run(capsys, "tensors", "--theta", "0,1")
    assert code == 2 and "family" in err


def test_bad_config_values(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"family": "normal", "theta": [0, 1], "dt": -1}))
    assert run(capsys, "geodesic", "--config", str(cfg), "--v0", "1,0")[0] == 2
    cfg.write_text(json.dumps({"family": {"expression": "x +", "n": 1, "domain": {"lower": [0], "upper": [1]}}}))
    assert run(capsys, "tensors", "--config", str(cfg), "--theta", "0.5")[0] == 2
    assert run(capsys, "tensors", "--family", "normal", "--theta", "0,1,2")[0] == 2


def test_numeric_failure_reports_theta(capsys):
    code, _, err = run(capsys, "tensors", "--family", "normal", "--theta", "0,-1")
    assert code == 1 and "[0.0, -1.0]" in err


def test_expression_family_matches_builtin(tmp_path, capsys):
    cfg = tmp_path / "expr.json"
    cfg.write_text(json.dumps({"family": EXPR_FAMILY, "theta": [[0.5, 1.5]], "alpha": 0.5}))
    _, out, _ = run(capsys, "tensors", "--config", str(cfg))
    expr = json.loads(out)["points"][0]
    _, out, _ = run(capsys, "tensors", "--family", "normal", "--theta", "0.5,1.5", "--alpha", "0.5")
    ref = json.loads(out)["points"][0]
    for key in ("g", "T", "christoffel_lower", "christoffel_mixed"):
        assert np.max(np.abs(np.array(expr[key]) - np.array(ref[key]))) <= 1e-6


def test_geodesic_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "geo.csv"
    code, _, _ = run(capsys, "geodesic", "--family", "normal", "--theta", "0,1", "--v0", "1,0.5",
                     "--format", "csv", "--out", str(out))
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["t", "theta_1", "theta_2", "dtheta_1", "dtheta_2", "residual"]
    assert len(rows) == 1002
    # full double precision
    assert repr(float(rows[5][1])) == repr(float(np.float64(rows[5][1])))
    summary = json.loads((tmp_path / "geo.summary.json").read_text())
    assert summary["semicircle_drift"] <= 1e-5 and summary["speed_drift"] <= 1e-5


def test_geodesic_zero_velocity(capsys):
    code, out, _ = run(capsys, "geodesic", "--family", "normal", "--theta", "0.5,2", "--v0", "0,0", "--dt", "0.1")
    theta = np.array(json.loads(out)["theta"])
    assert code == 0 and np.all(theta == [0.5, 2])


def test_geodesic_early_exit(capsys):
    code, out, _ = run(capsys, "geodesic", "--family", "normal", "--theta", "0,1", "--v0", "0,-2",
                       "--alpha", "-1", "--dt", "0.01")
    assert code == 0 and json.loads(out)["summary"]["exited"] is True


def test_transport_flip(capsys):
    T = repr(math.sqrt(2) * math.pi)
    code, out, _ = run(capsys, "transport", "--family", "normal", "--theta", "0,1", "--v0", "1,0",
                       "--vector", "1,0", "--t-end", T, "--dt", "0.01")
    assert code == 0
    assert np.allclose(json.loads(out)["summary"]["final_vector"], [-1, 0], atol=1e-5)


def test_transport_frame_start_invariance(tmp_path, capsys):
    cfg = tmp_path / "t.json"
    base = {"family": "normal", "theta": [0, 1], "velocity": [0.5, 0.3], "vector": [1, 2], "alpha": 0.5}
    cfg.write_text(json.dumps(base))
    ref = json.loads(run(capsys, "transport", "--config", str(cfg))[1])["summary"]["final_vector"]
    cfg.write_text(json.dumps({**base, "frame": [[0.3, -1.0], [0.8, 0.4]]}))
    other = json.loads(run(capsys, "transport", "--config", str(cfg))[1])["summary"]["final_vector"]
    assert np.allclose(ref, other, atol=1e-9)


def test_transport_constant_curve(capsys):
    code, out, _ = run(capsys, "transport", "--family", "normal", "--theta", "0,1", "--v0", "0,0",
                       "--vector", "1,2", "--dt", "0.1")
    assert json.loads(out)["summary"]["final_vector"] == [1.0, 2.0]


def test_transport_requires_vector(capsys):
    assert run(capsys, "transport", "--family", "normal", "--theta", "0,1", "--v0", "1,0")[0] == 2


def test_verify_writes_reports_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["verify", "--family", "normal", "--checks", "theorem_5_8,lemma_5_6", "--seed", "4"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b))[0] == 0
    for name in ("theorem_5_8", "lemma_5_6"):
        assert (a / f"{name}.json").read_bytes() == (b / f"{name}.json").read_bytes()


def test_verify_zero_tolerance_fails(capsys):
    assert run(capsys, "verify", "--family", "normal", "--checks", "lemma_5_6", "--tol", "0")[0] == 3


def test_verify_unknown_check(capsys):
    assert run(capsys, "verify", "--family", "normal", "--checks", "bogus")[0] == 2


def test_log_level_env(monkeypatch, capsys):
    monkeypatch.setenv("ALPHA_BUNDLE_LOG", "debug")
    assert run(capsys, "tensors", "--family", "normal", "--theta", "0,1")[0] == 0
