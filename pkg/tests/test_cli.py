from __future__ import annotations

import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from conformal_yamabe.cli import CURVATURE_HEADER, main

CONFIGS = Path(__file__).parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cone_mu(capsys):
    code, out, _ = run(capsys, "cone", "mu", "--family", "gamma-k", "--n", "5", "--k", "2")
    assert code == 0 and "mu_plus: 1.5\n" in out


def test_cone_contains_boundary(capsys):
    code, out, _ = run(capsys, "cone", "contains", "--family", "gamma-k", "--n", "4", "--k", "2", "--", "1", "0", "0", "0")
    assert code == 0 and out.splitlines()[0] == "boundary"


def test_cone_contains_negative_entries(capsys):
    code, out, _ = run(capsys, "cone", "contains", "--n", "4", "--k", "1", "--", "-1", "-1", "-1", "-1")
    assert code == 0 and out.splitlines()[0] == "exterior"


def test_tau_verdict_echoed(capsys):
    code, out, _ = run(capsys, "cone", "mu", "--family", "tau", "--tau", "0.6667", "--base", "gamma-k",
                       "--n", "4", "--k", "4")
    mu = float(out.split("mu_plus:")[1].split()[0])
    assert code == 0
    # Gamma_4^+ in n = 4 is the positive cone, so mu = 1 at tau0 = 2/3; 0.6667 sits just above tau0
    assert mu == pytest.approx(1.0, abs=1e-3)
    assert "mu > 1: no" in out


def test_tau_verdict_yes_below_positive_cone(capsys):
    code, out, _ = run(capsys, "cone", "mu", "--family", "tau", "--tau", str(2 / 3), "--n", "4", "--k", "2")
    assert code == 0 and "mu > 1: yes" in out


@pytest.mark.parametrize("argv", [
    ["cone", "mu", "--n", "4", "--k", "7"],
    ["cone", "mu", "--family", "tau", "--n", "4", "--k", "2"],
    ["cone", "contains", "--n", "4", "--k", "2", "--", "1", "0"],
])
def test_cone_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["cone", "bogus"])
    assert info.value.code == 2


def read_csv(text):
    rows = list(csv.reader(text.splitlines()))
    assert tuple(rows[0]) == CURVATURE_HEADER
    return [[float(x) for x in row] for row in rows[1:]]


def test_curvature_schwarzschild_margin(capsys):
    code, out, _ = run(capsys, "curvature", "--metric", "schwarzschild", "--n", "5", "--mu", "1.5", "--m", "1",
                       "--k", "2", "--r-min", "0.5", "--r-max", "10", "--samples", "60")
    rows = read_csv(out)
    assert code == 0 and len(rows) == 60
    assert max(abs(row[-1]) for row in rows) <= 1e-9


def test_curvature_sinh(capsys):
    code, out, _ = run(capsys, "curvature", "--metric", "warped", "--phi", "sinh", "--fiber-sign", "1", "--n", "4")
    rows = read_csv(out)
    assert all(abs(row[1] - 0.5) <= 1e-12 and abs(row[2]) <= 1e-12 for row in rows)


def test_curvature_flat(capsys):
    _, out, _ = run(capsys, "curvature", "--metric", "schwarzschild", "--n", "5", "--mu", "1.5", "--m", "0")
    assert all(all(v == 0 for v in row[1:]) for row in read_csv(out))


def test_curvature_writes_file(capsys, tmp_path):
    target = tmp_path / "c.csv"
    assert main(["curvature", "--metric", "euclidean", "--n", "3", "--output", str(target)]) == 0
    assert target.read_text().startswith("r,chi1,chi2")


def test_solve_manufactured(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--config", str(CONFIGS / "hyperbolic_cap.json"), "--output-dir", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "hyperbolic-cap" / "summary.json").read_text())
    assert summary["solution"]["converged"] and summary["solution"]["sup_error"] <= 5e-5
    assert (tmp_path / "hyperbolic-cap" / "solution.csv").exists()


def test_solve_cosh(capsys, tmp_path):
    code, _, _ = run(capsys, "solve", "--config", str(CONFIGS / "cosh_solve.json"), "--output-dir", str(tmp_path))
    summary = json.loads((tmp_path / "cosh-solve" / "summary.json").read_text())
    assert code == 0 and max(abs(summary["solution"]["u_min"]), abs(summary["solution"]["u_max"])) <= 1e-9


def write_variant(tmp_path, name, edit):
    doc = json.loads((CONFIGS / name).read_text())
    edit(doc)
    path = tmp_path / f"variant-{name}"
    path.write_text(json.dumps(doc))
    return path


def test_solve_rejects_tiny_grid(capsys, tmp_path):
    path = write_variant(tmp_path, "hyperbolic_cap.json", lambda d: d["problem"].update(N=3))
    code, out, _ = run(capsys, "solve", "--config", str(path), "--output-dir", str(tmp_path))
    assert code == 2 and "N >= 5" in out
    assert not (tmp_path / "hyperbolic-cap").exists()


def test_solve_infeasible_exit_code(capsys, tmp_path):
    # round caps ln(2 rho/(rho^2 + r^2)) are the only radial solutions; on r <= 1/2 their
    # boundary value is at most ln 2, so u = 2 on the boundary has no solution
    path = write_variant(tmp_path, "spherical_cap.json",
                         lambda d: d["problem"].update(right_value=2.0, exact=None))
    code, _, _ = run(capsys, "solve", "--config", str(path), "--output-dir", str(tmp_path))
    assert code == 3


def test_exhaust_euclidean(capsys, tmp_path):
    code, out, _ = run(capsys, "exhaust", "--config", str(CONFIGS / "euclidean_exhaust.json"), "--output-dir", str(tmp_path))
    assert code == 0 and "classification: case2" in out
    run_dir = tmp_path / "euclidean-exhaust"
    summary = json.loads((run_dir / "summary.json").read_text())
    for R, inf in zip(summary["radii"], summary["inf_trace"]):
        assert abs(inf - math.log(2.0 / R)) <= 0.7
    assert sorted(p.name for p in run_dir.glob("stage-*.csv")) == [f"stage-{j}.csv" for j in range(1, 7)]
    assert (run_dir / "report.json").exists()


def test_exhaust_cosh(capsys, tmp_path):
    code, out, _ = run(capsys, "exhaust", "--config", str(CONFIGS / "cosh_exhaust.json"), "--output-dir", str(tmp_path))
    assert code == 0 and "classification: case1" in out


def test_exhaust_two_stages(capsys, tmp_path):
    path = write_variant(tmp_path, "euclidean_exhaust.json", lambda d: d["exhaustion"].update(J=2))
    _, out, _ = run(capsys, "exhaust", "--config", str(path), "--output-dir", str(tmp_path))
    assert "classification: undetermined" in out


def test_exhaust_deterministic_and_parallel(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfgs = [str(CONFIGS / "euclidean_exhaust.json"), str(CONFIGS / "cosh_exhaust.json")]
    assert main(["exhaust", "--config", *cfgs, "--output-dir", str(a)]) == 0
    assert main(["exhaust", "--config", *cfgs, "--output-dir", str(b), "--jobs", "2"]) == 0
    capsys.readouterr()
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert len(files) == 2 * 8
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_verify_cones(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "cones")
    assert code == 0 and "4/4 checks passed" in out


def test_verify_unknown_suite(capsys):
    code, _, err = run(capsys, "verify", "--suite", "nope")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "conformal_yamabe", "cone", "mu", "--n", "6", "--k", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "mu_plus: 1" in proc.stdout
