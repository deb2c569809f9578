import json

import numpy as np
import pytest

from halfflat.cli import main
from halfflat.exterior import Form

import oracle

TWO_PI = "6.283185307179586"


def write_pair(path, omega, psi):
    payload = {"omega": {"degree": 2, "frame": "std", "coeffs": list(omega)},
               "psi": {"degree": 3, "frame": "std", "coeffs": list(psi)}}
    path.write_text(json.dumps(payload))
    return str(path)


def test_validate_flat(tmp_path, capsys):
    path = write_pair(tmp_path / "flat.json", oracle.OMEGA0, oracle.PSI0)
    assert main(["validate", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["valid"] is True
    assert report["P"] == pytest.approx(-4.0, abs=1e-12)


def test_validate_scaled_psi_fails(tmp_path, capsys):
    path = write_pair(tmp_path / "bad.json", oracle.OMEGA0, 2.0 * oracle.PSI0)
    assert main(["validate", path]) == 1
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert report["valid"] is False
    assert report["residuals"]["normalization"] > 1.0
    assert "normalization=" in captured.err


def test_validate_malformed(tmp_path, capsys):
    bad = tmp_path / "trunc.json"
    bad.write_text('{"omega": {"degree": 2, ')
    assert main(["validate", str(bad)]) == 2
    missing = tmp_path / "missing.json"
    missing.write_text('{"omega": {"degree": 2, "frame": "std", "coeffs": []}}')
    assert main(["validate", str(missing)]) == 2


def test_ts3_cosh_sweep(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["ts3", "--f1", "cosh", "--t-max", "3", "--samples", "601",
                 "--out", str(out)]) == 0
    lines = out.read_text().split("\n")
    header = lines[0].split(",")
    assert header == ["t", "f1", "f2", "psi2", "phi5", "P", "scal_sigma",
                      "scal_closed", "res_compat", "res_norm"]
    rows = [r.split(",") for r in lines[1:-1]]
    assert len(rows) == 601
    tcol = np.array([float(r[0]) for r in rows])
    i = int(np.argmin(np.abs(tcol - 1.0)))
    scal_closed = float(rows[i][7])
    assert scal_closed == pytest.approx(-5.7965, abs=1e-4)
    assert float(rows[i][5]) == pytest.approx(-4.0, abs=1e-8)


def test_ts3_inadmissible_reports_violation(capsys):
    assert main(["ts3", "--f1", "-1", "--t-max", "1", "--samples", "101"]) == 1
    err = capsys.readouterr().err
    assert "error=AdmissibilityFailure" in err
    assert "first_violation_t=0.5" in err


def test_ts3_parse_error(capsys):
    assert main(["ts3", "--f1", "cosh(t", "--t-max", "1", "--samples", "11"]) == 2
    assert "error=ParseError" in capsys.readouterr().err


def test_ts3_byte_determinism(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["ts3", "--f1", "cosh", "--t-max", "2", "--samples", "81",
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_ts3_plot(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["ts3", "--f1", "cosh", "--t-max", "1", "--samples", "41",
                 "--out", str(out), "--plot"]) == 0
    err = capsys.readouterr().err
    assert (tmp_path / "sweep.profile.png").exists()
    assert (tmp_path / "sweep.scal.png").exists()
    assert "figure=" in err


def test_plot_requires_out(capsys):
    assert main(["ts3", "--f1", "cosh", "--t-max", "1", "--samples", "41",
                 "--plot"]) == 2
    assert "PlotRequiresOut" in capsys.readouterr().err


def test_torus_strict_report(tmp_path):
    out = tmp_path / "torus.json"
    assert main(["torus", "--a", f"sin({TWO_PI}*x1)", "--b", "0", "--c", "0",
                 "--grid", "8", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["strict"] is True
    assert report["dim_lower_bound"] == 5


def test_torus_flat(capsys):
    assert main(["torus", "--a", "0", "--b", "0", "--c", "0", "--grid", "8"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["strict"] is False
    assert report["sigma"]["sup_norm"] < 1e-12


def test_torus_periodicity_violation(capsys):
    assert main(["torus", "--a", "x1", "--grid", "8"]) == 1
    assert "PeriodicityViolation" in capsys.readouterr().err


def test_stenzel_flat(tmp_path):
    out = tmp_path / "stenzel.csv"
    assert main(["stenzel", "--f1-at-0", "-1", "--t-max", "2",
                 "--samples", "401", "--out", str(out)]) == 0
    rows = out.read_text().strip().split("\n")[1:]
    scal = np.array([[float(x) for x in r.split(",")][6] for r in rows])
    t = np.array([[float(x) for x in r.split(",")][0] for r in rows])
    assert np.max(np.abs(scal[np.abs(t) >= 0.1])) < 1e-5


def test_stenzel_positivity_violation(capsys):
    assert main(["stenzel", "--f1-at-0", "1", "--t-max", "2"]) == 2
    assert "PositivityViolation" in capsys.readouterr().err


def test_validate_full_structure(tmp_path, capsys):
    path = write_pair(tmp_path / "flat.json", oracle.OMEGA0, oracle.PSI0)
    assert main(["validate", path, "--full"]) == 0
    report = json.loads(capsys.readouterr().out)
    hat = Form.from_dict(report["structure"]["psi_hat"])
    expected = oracle.form(3, {(1, 2, 3): 1.0, (1, 5, 6): -1.0,
                               (2, 4, 6): 1.0, (3, 4, 5): -1.0})
    assert np.allclose(hat.coeffs, expected, atol=1e-12)
