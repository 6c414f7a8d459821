import json
import subprocess
import sys

import numpy as np
import pytest

from holomap import catalog
from holomap.cli import main


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


@pytest.mark.parametrize("name", ["example1", "example2", "example3", "example4", "example5",
                                  "singular"])
def test_reproduce(name, tmp_path, capsys):
    assert main(["reproduce", name, "--out-dir", str(tmp_path)]) == 0
    man = _manifest(tmp_path)
    assert man["passed"] and man["checks"]
    assert all(c["passed"] for c in man["checks"])
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_reproduce_example3_verdict(tmp_path):
    main(["reproduce", "example3", "--out-dir", str(tmp_path)])
    values = _manifest(tmp_path)["values"]
    assert values["verdict"] == "Infeasible"


def test_manifest_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["reproduce", "example4", "--out-dir", str(a)])
    main(["reproduce", "example4", "--out-dir", str(b)])
    for f in sorted(p.name for p in a.iterdir()):
        if f == "manifest.json":
            ma, mb = _manifest(a), _manifest(b)
            ma["inputs"].pop("out_dir")
            mb["inputs"].pop("out_dir")
            assert ma == mb
        else:
            assert (a / f).read_bytes() == (b / f).read_bytes()


def _map_files(tmp_path, pair):
    t1, t2 = tmp_path / "t1.json", tmp_path / "t2.json"
    pair.tau1.to_json(t1)
    pair.tau2.to_json(t2)
    return str(t1), str(t2)


def test_solve_p_from_files(tmp_path):
    t1, t2 = _map_files(tmp_path, catalog.example1())
    out = tmp_path / "out"
    assert main(["solve-p", "--tau1", t1, "--tau2", t2, "--out-dir", str(out)]) == 0
    rows = np.loadtxt(out / "p.csv", delimiter=",", comments="#")
    inner = rows[:, 0] <= 1 / 3
    x, p = rows[inner, 0], rows[inner, 1]
    assert np.max(np.abs(p - (0.0625 + 1.875 * x))) <= 1e-6
    assert _manifest(out)["values"]["verdict"] == "Feasible"


def test_solve_p_refined_grid(tmp_path):
    assert main(["solve-p", "--example", "example4", "--grid", "8192",
                 "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["params"]["grid"] == 8192
    assert rep["residual_linf"] <= 1e-6


def test_solve_p_infeasible_exit_code(tmp_path):
    assert main(["solve-p", "--example", "example5", "--out-dir", str(tmp_path)]) == 1
    assert not _manifest(tmp_path)["passed"]


def test_missing_file_is_usage_error(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "holomap.cli", "solve-p", "--tau1",
                           str(tmp_path / "nope.json"), "--out-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "no such file" in proc.stderr


def test_selector_lambda_zero(tmp_path):
    assert main(["selector", "--example", "example2", "--lambda", "0",
                 "--out-dir", str(tmp_path)]) == 0
    names = [c["name"] for c in _manifest(tmp_path)["checks"]]
    assert "selector equals tau2" in names
    assert (tmp_path / "selector.csv").read_text().startswith("x,tau(x)")


def test_selector_random_pdf(tmp_path):
    assert main(["selector", "--example", "example2", "--out-dir", str(tmp_path)]) == 0


def test_invariant(tmp_path):
    assert main(["invariant", "--example", "example2", "--cells", "10",
                 "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "matrix.csv").exists() and (tmp_path / "density.csv").exists()


def test_simulate_twice_identical(tmp_path):
    args = ["simulate", "--example", "example2", "--seed", "7", "--steps", "20000",
            "--burn-in", "100"]
    main(args + ["--out-dir", str(tmp_path / "a")])
    main(args + ["--out-dir", str(tmp_path / "b")])
    for f in ("histogram.csv", "histogram.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_bangbang(tmp_path):
    g = tmp_path / "g.csv"
    g.write_text("0,0\n1,1\n")
    assert main(["bangbang", "--example", "example2", "--N", "10", "--objective", str(g),
                 "--Ns", "10", "20", "--out-dir", str(tmp_path)]) == 0
    values = _manifest(tmp_path)["values"]
    assert values["best_value"] == pytest.approx(0.527907, abs=1e-6)
    assert (tmp_path / "vertices.csv").exists() and (tmp_path / "convergence.csv").exists()


def test_flag_defaults_mirror_modules():
    from holomap.cli import build_parser
    from holomap.density import DEFAULT_GRID
    from holomap.montecarlo import SimConfig
    args = build_parser().parse_args(["simulate", "--example", "example2"])
    assert args.grid == DEFAULT_GRID and args.seed == SimConfig.seed
    assert args.steps == SimConfig.n_steps and args.bins == SimConfig.bins
