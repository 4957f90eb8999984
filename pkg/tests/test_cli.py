import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from stratlab.cli import main, rational
from stratlab.kernels import CovarianceKernel, GridSpec
from stratlab.sampler import factorize, sample_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_example(capsys):
    code, out, _ = run(capsys, "constants", "--process", "bbm", "--K", "1", "--tol", "1e-10")
    assert code == 0
    d = json.loads(out)
    assert d["schema"] == 1
    assert d["value"] == pytest.approx(0.8985, abs=5e-4)
    assert d["tail_bound"] <= 1e-10


def test_constants_variants(capsys):
    code, out, _ = run(capsys, "constants", "--process", "sfbm", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "value,truncation_M,tail_bound"
    code, out, _ = run(capsys, "constants", "--process", "fbm", "--H", "1/6", "--empirical",
                       "--n", "64")
    assert code == 0 and json.loads(out)["n"] == 64
    code, _, _ = run(capsys, "constants", "--process", "bbm")
    assert code == 2


def test_no_args_is_usage_error(capsys):
    code, _, err = run(capsys)
    assert code == 2 and "usage" in err


def test_limitlaw_rejects_supercritical(capsys):
    code, out, err = run(capsys, "limitlaw", "--process", "bbm", "--H", "0.9", "--K", "0.9",
                         "--format", "json")
    assert code == 3 and out == ""
    d = json.loads(err)
    assert d["code"] == 3 and "supercritical" in d["error"]


def test_simulate_example(capsys):
    code, out, _ = run(capsys, "simulate", "--process", "fbm", "--H", "0.16667", "--n", "8",
                       "--T", "1", "--seed", "1", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["t", "x"] and len(rows) == 10
    assert float(rows[1][1]) == 0.0
    # 17 significant digits round-trip exactly
    expected = sample_path(factorize(CovarianceKernel.fbm(0.16667), GridSpec(8, 1.0)), 1).values
    np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], expected)


def test_simulate_json_round_trip_and_seed(capsys):
    argv = ("simulate", "--process", "sfbm", "--h", "1/3", "--n", "16", "--paths", "3", "--seed", "4")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    d = json.loads(a)
    expected = sample_path(factorize(CovarianceKernel.sfbm(1 / 3), GridSpec(16, 1.0)), 4, 2).values
    np.testing.assert_allclose(d["paths"][2], expected, rtol=0, atol=1e-13)


def test_rational_literals():
    assert rational("1/6") == 1 / 6
    assert rational("2/3") * rational("1/4") == pytest.approx(1 / 6, abs=1e-16)
    assert rational("1e-10") == 1e-10
    assert CovarianceKernel.fbm(rational("1/6")).regime == "critical"


@pytest.mark.parametrize(
    "argv,code",
    [
        (["audit", "--process", "sfbm", "--h", "1/3", "--all"], 0),
        (["audit", "--process", "fbm", "--H", "1/6", "--condition", "v", "--gamma", "3"], 1),
        (["audit", "--process", "fbm", "--H", "1/6", "--condition", "vi", "--n-list", "16,32"], 0),
        (["audit", "--process", "fbm", "--H", "1/6"], 2),
        (["audit", "--process", "fbm", "--H", "1/6", "--condition", "v", "--gamma", "0.5"], 3),
    ],
)
def test_audit(capsys, argv, code):
    got, out, err = run(capsys, *argv, "--format", "json")
    assert got == code
    json.loads(out if out else err)


def test_functionals(capsys, tmp_path):
    dump = tmp_path / "paths.csv"
    code, out, _ = run(capsys, "functionals", "--process", "fbm", "--H", "1/6", "--n", "32",
                       "--paths", "50", "--stat", "var", "--seed", "7", "--dump-paths", str(dump))
    assert code == 0
    d = json.loads(out)
    assert set(d["functionals"]["phi_n"]) == {"var"}
    rows = list(csv.reader(dump.open()))
    assert len(rows) == 51 and rows[0][:3] == ["path", "x_t", "phi_n"]
    assert rows[0][-1] == "x_32"


def test_limitlaw_csv(capsys):
    code, out, _ = run(capsys, "limitlaw", "--process", "fbm", "--H", "1/6", "--n", "32",
                       "--paths", "20", "--seed", "11", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["x_t", "correction", "rhs"] and len(rows) == 21
    x, c, r = map(float, rows[5])
    assert r == pytest.approx(x**3 + c, rel=1e-12, abs=1e-12)


def test_experiment_from_config(capsys, tmp_path):
    conf = tmp_path / "exp.cfg"
    conf.write_text(
        "# vanishing check\n"
        "experiment = vanishing\n"
        "process = fbm\nH = 1/3\n"
        "f = x3\nn_list = 16,32,64\npaths = 1000\nseed = 5\n"
        "threshold.vanishing_ratio = 0.9\n"
    )
    plot = tmp_path / "plot.csv"
    code, out, _ = run(capsys, "experiment", "--config", str(conf), "--plot-csv", str(plot))
    d = json.loads(out)
    assert code == 0 and d["passed"]
    assert d["config"]["seed"] == 5 and d["config"]["thresholds"]["vanishing_ratio"] == 0.9
    assert plot.read_text().startswith("n,var_phi_minus_increment@t=1\n")
    # flags override the file
    code, out, _ = run(capsys, "experiment", "--config", str(conf), "--seed", "6", "--format", "csv")
    assert code == 0 and out.startswith("experiment,n,t,statistic,value\n")


def test_experiment_errors(capsys, tmp_path):
    code, _, err = run(capsys, "experiment", "--process", "bbm", "--H", "1/2", "--K", "1/2",
                       "--experiment", "weak_limit", "--paths", "1000", "--format", "json")
    assert code == 3 and json.loads(err)["code"] == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, _, _ = run(capsys, "experiment", "--config", str(bad))
    assert code == 2
    code, _, _ = run(capsys, "experiment", "--process", "fbm", "--H", "1/6")
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--process", "fbm", "--n", "8"],
        ["simulate", "--process", "fbm", "--H", "abc", "--n", "8"],
        ["simulate", "--bogus"],
        ["nonsense"],
        ["simulate", "--process", "fbm", "--H", "1.5", "--n", "8"],
    ],
)
def test_errors_are_json(capsys, argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    assert code in (2, 3) and out == ""
    d = json.loads(err)
    assert d["code"] == code and d["error"]


def test_threads_and_cache(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("STRATLAB_CACHE_DIR", "")  # restored after the test
    code, _, _ = run(capsys, "simulate", "--process", "bbm", "--H", "0.3", "--K", "0.9", "--n", "12",
                     "--threads", "1", "--cache-dir", str(tmp_path))
    assert code == 0
    assert any(p.name.startswith("factor-v1-") for p in tmp_path.iterdir())


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "stratlab.cli", "constants", "--process", "fbm",
                           "--format", "csv"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].startswith("0.8985")
