import json
import math

import numpy as np
import pytest

from crackstab import cli
from crackstab.closedform import analytic_lambda1


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_lambda1_analytic(capsys):
    code, out, _ = run(capsys, "lambda1", "--length", "1", "--height", "1", "--method", "analytic")
    assert code == 0
    data = json.loads(out)
    assert data["lambda1"] == pytest.approx(0.6366153, abs=5e-8)
    assert data["method"] == "Analytic"
    assert set(data) >= {"lambda1", "eigenfunction", "mu", "reciprocity", "residual_strong", "method", "basis_size"}


def test_lambda1_grid_example(capsys):
    code, out, _ = run(capsys, "lambda1", "--length", "1", "--height", "1", "--method", "grid",
                       "--nx", "513", "--ny", "513", "--format", "csv")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == cli.LAMBDA1_CSV
    lam = float(row.split(",")[0])
    assert abs(lam - analytic_lambda1(1.0, 1.0)) <= 1e-2 * analytic_lambda1(1.0, 1.0)


def test_missing_flag_is_usage_error(capsys):
    code, out, err = run(capsys, "lambda1", "--height", "1")
    assert code == 2
    assert out == ""
    assert "usage:" in err and "--length" in err


@pytest.mark.parametrize("argv", [
    ("lambda1", "--length", "-1", "--height", "1"),
    ("lambda1", "--length", "1", "--height", "1", "--method", "exact"),
    ("lambda1", "--length", "1", "--height", "1", "--a", "const:1", "--method", "modes"),
    ("lambda1", "--length", "1", "--height", "1", "--nx", "3"),
    ("fd-check", "--phi", "coslike:3"),
    ("classify", "--length", "1", "--height", "1", "--alpha", "1", "--beta", "2"),
    ("bogus",),
])
def test_invalid_parameters_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_fd_check_example(capsys):
    code, out, _ = run(capsys, "fd-check", "--phi", "coslike:2", "--alpha", "1", "--beta", "1", "--h", "1e-3")
    assert code == 0
    data = json.loads(out)
    assert abs(data["g1"]) < 1e-6
    assert abs(data["g2"] - data["second_variation"]) / abs(data["second_variation"]) <= 2e-2
    assert data["passed"] is True


def test_series_example(capsys):
    code, out, _ = run(capsys, "series", "--length", "1", "--height", "1")
    assert code == 0
    data = json.loads(out)
    assert data["verdict"] == "PASS"
    assert data["no_root"]["verdict"] == "PASS"


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("length = 2\nheight = 1\nmethod = analytic\n")
    _, out, _ = run(capsys, "lambda1", "--config", str(cfg), "--format", "csv")
    assert float(out.splitlines()[1].split(",")[0]) == analytic_lambda1(2.0, 1.0)
    _, out, _ = run(capsys, "lambda1", "--config", str(cfg), "--length", "1", "--format", "csv")
    assert float(out.splitlines()[1].split(",")[0]) == analytic_lambda1(1.0, 1.0)
    cfg.write_text("length = 2\nheight = 1\nunknown = 3\n")
    assert run(capsys, "lambda1", "--config", str(cfg))[0] == 2


def test_output_files_are_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        code, out, _ = run(capsys, "lambda1", "--length", "1", "--height", "1", "--nx", "33", "--ny", "33",
                           "--dual", "--seedless", "--out", str(p))
        assert code == 0 and out == ""
    assert paths[0].read_bytes() == paths[1].read_bytes()
    data = json.loads(paths[0].read_text())
    assert data["reciprocity"] == pytest.approx(1.0, abs=1e-4)


def test_scan_and_contour(tmp_path, capsys):
    contour = tmp_path / "contour.csv"
    code, out, _ = run(capsys, "scan", "--ell", "1:2:3", "--y0", "0.5,1", "--contour-out", str(contour))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "ell,y0,lambda1,stable,method"
    assert len(lines) == 7
    assert lines[-1].endswith(",false,analytic")
    assert contour.read_text().splitlines()[0] == "y0,ell_star"


def test_phi_and_a_from_files(tmp_path, capsys):
    nx = 33
    x = np.linspace(0, 1, nx)
    phi_file = tmp_path / "phi.txt"
    np.savetxt(phi_file, np.sin(np.pi * x) * (np.abs(np.sin(np.pi * x)) > 1e-12))
    a_file = tmp_path / "a.txt"
    np.savetxt(a_file, np.full(nx, 2.0))
    code, out, _ = run(capsys, "second-variation", "--length", "1", "--height", "1", "--nx", str(nx), "--ny", "33",
                       "--phi", f"file:{phi_file}", "--a", f"file:{a_file}")
    assert code == 0
    data = json.loads(out)
    assert data["a_term"] == pytest.approx(1.0, rel=1e-12)
    assert data["total"] == pytest.approx(data["boundary_term"] + data["gradient_term"] + data["a_term"])
    np.savetxt(a_file, np.ones(5))
    assert run(capsys, "lambda1", "--length", "1", "--height", "1", "--nx", str(nx), "--a", f"file:{a_file}")[0] == 2


def test_second_variation_with_fd(capsys):
    code, out, _ = run(capsys, "second-variation", "--length", "1", "--height", "1", "--nx", "65", "--ny", "65",
                       "--phi", "sin:1", "--h", "1e-3")
    data = json.loads(out)
    assert code == 0
    assert data["fd_second"] == pytest.approx(data["total"], rel=2e-2)


def test_classify_and_dual(capsys):
    code, out, _ = run(capsys, "classify", "--length", "2", "--height", "1", "--method", "modes")
    assert code == 0
    data = json.loads(out)
    assert data["classification"] == "Indefinite" and data["witness_total"] < 0
    code, out, _ = run(capsys, "dual", "--length", "1", "--height", "1", "--nx", "65", "--ny", "65",
                       "--method", "grid", "--format", "csv")
    assert code == 0
    header, row = out.strip().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert float(values["reciprocity"]) == pytest.approx(1.0, abs=1e-6)


def test_verify_subset(capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "2,8")
    assert code == 0
    assert "criterion  2 PASS" in out and "criterion  8 PASS" in out
    assert run(capsys, "verify", "--criteria", "12")[0] == 2


def test_help_exits_cleanly(capsys):
    code, out, _ = run(capsys, "scan", "--help")
    assert code == 0
    assert "ell,y0,lambda1,stable,method" in out


def test_analytic_slopes_scaling(capsys):
    _, out, _ = run(capsys, "lambda1", "--length", "1", "--height", "1", "--method", "analytic",
                    "--alpha", "1", "--beta", "2", "--format", "csv")
    assert float(out.splitlines()[1].split(",")[0]) == pytest.approx(2.5 * analytic_lambda1(1.0, 1.0))
    assert math.isfinite(float(out.splitlines()[1].split(",")[0]))
