import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ssfplsim.cli import main
from ssfplsim.dataio import Dataset, RunReport, write_dataset, write_schema
from ssfplsim.functional import FunctionalSample, Grid

ROOT = Path(__file__).resolve().parents[1]
SMALL_INI = """\
M = 2
seed = 11
grid_size = 100
test_size = 40

[scenario tiny]
n = 40
p = 6
rho = 0.5
c = 0.01

[fit]
h_count = 3
lambda_count = 15
"""


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    (d / "sim.ini").write_text(SMALL_INI)
    rc = main(["simulate", "--config", str(d / "sim.ini"), "--out", str(d / "out"), "--emit-data"])
    assert rc == 0
    return d


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_outputs(simulated):
    out = simulated / "out"
    rows = read_csv(out / "summary.csv")
    assert [r["scenario"] for r in rows] == ["tiny"]
    rep = json.loads((out / "tiny.json").read_text())
    assert len(rep["replicates"]) == 2
    assert (out / "timings.log").exists()
    assert "seconds" not in (out / "summary.csv").read_text()


def test_simulate_is_deterministic(simulated, tmp_path):
    assert main(["simulate", "--config", str(simulated / "sim.ini"), "--out", str(tmp_path), "--threads", "2"]) == 0
    for name in ("summary.csv", "tiny.json"):
        assert (tmp_path / name).read_bytes() == (simulated / "out" / name).read_bytes()


def test_emit_data_then_fit_reproduces_selection(simulated, tmp_path, capsys):
    out = simulated / "out"
    capsys.readouterr()
    rep = json.loads((out / "tiny.json").read_text())
    rep0 = next(r for r in rep["replicates"] if r["replicate"] == 0)
    rc = main(["fit", "--data", str(out / "tiny_rep0.csv"), "--schema", str(out / "tiny_rep0.schema"),
               "--config", str(out / "tiny_rep0.ini"), "--out", str(tmp_path)])
    assert rc == 0
    line = capsys.readouterr().out.splitlines()[0]
    fields = dict(kv.split("=", 1) for kv in line.split())
    assert fields["selected"] == ",".join(map(str, rep0["selected"]))
    report = RunReport.load(tmp_path / "report.json")
    assert report.h_hat == rep0["h_hat"] and report.lambda_hat == rep0["lambda_hat"]
    assert np.array_equal(report.theta_coefficients, rep0["theta_hat"])
    assert read_csv(tmp_path / "theta.csv")[0].keys() == {"t", "theta"}
    assert len(read_csv(tmp_path / "link.csv")) == 101


def test_predict_round_trip(simulated, tmp_path, capsys):
    out = simulated / "out"
    args = ["--data", str(out / "tiny_rep0.csv"), "--schema", str(out / "tiny_rep0.schema")]
    assert main(["fit", *args, "--config", str(out / "tiny_rep0.ini"), "--out", str(tmp_path / "fit")]) == 0
    assert main(["predict", "--model", str(tmp_path / "fit" / "report.json"), *args,
                 "--out", str(tmp_path / "pred.csv"), "--widen"]) == 0
    rows = read_csv(tmp_path / "pred.csv")
    assert len(rows) == 40
    assert "msep=" in capsys.readouterr().out
    r = rows[0]
    assert float(r["residual"]) == pytest.approx(float(r["y"]) - float(r["prediction"]), abs=1e-12)


def test_fit_with_test_split(simulated, tmp_path, capsys):
    out = simulated / "out"
    ini = (out / "tiny_rep0.ini").read_text().replace("n_train = none", "n_train = 30")
    (tmp_path / "f.ini").write_text(ini)
    rc = main(["fit", "--data", str(out / "tiny_rep0.csv"), "--schema", str(out / "tiny_rep0.schema"),
               "--config", str(tmp_path / "f.ini"), "--out", str(tmp_path), "--widen"])
    assert rc == 0
    assert "baseline_msep=" in capsys.readouterr().out
    assert len(read_csv(tmp_path / "predictions.csv")) == 10


def test_report_tables(simulated, tmp_path, capsys):
    assert main(["report", "--in", str(simulated / "out"), "--out", str(tmp_path / "t.txt")]) == 0
    text = (tmp_path / "t.txt").read_text()
    assert text.startswith("Variable selection")
    assert "83.333" in capsys.readouterr().out  # 5 of 6 correct zeros over two replicates


def test_usage_errors(capsys):
    assert main(["simulate", "--bogus"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err and "kind=usage" in err
    assert main([]) == 2


def test_data_error_exit_code(tmp_path, capsys):
    rc = main(["fit", "--data", str(tmp_path / "none.csv"), "--schema", str(tmp_path / "none.schema"),
               "--out", str(tmp_path)])
    assert rc == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ssfplsim: error kind=data")


def test_numerical_error_exit_code(tmp_path, capsys, rng):
    # identical curves project to a single point, so no bandwidth exists
    g = Grid.uniform(0, 1, 30)
    curves = FunctionalSample(np.tile(np.sin(3 * g.points), (25, 1)), g)
    ds = Dataset(rng.normal(size=25), rng.normal(size=(25, 3)), ("a", "b", "c"), curves)
    write_schema(write_dataset(ds, tmp_path / "d.csv"), tmp_path / "d.schema")
    rc = main(["fit", "--data", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "d.schema"),
               "--out", str(tmp_path / "o"), "--knots", "2"])
    assert rc == 4
    assert "kind=numerical" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ssfplsim", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout


TECATOR = Path(os.environ.get("SSFPLSIM_TECATOR", ROOT / "data" / "tecator.csv"))


@pytest.mark.skipif(not TECATOR.exists(), reason=f"Tecator data not found at {TECATOR}; see docs/tecator.md")
def test_tecator_layout():
    from ssfplsim.dataio import read_dataset, read_schema, split
    ds = read_dataset(TECATOR, read_schema(ROOT / "docs" / "tecator.schema"))
    assert ds.n == 215 and ds.curves.grid.size == 100 and ds.x.shape == (215, 2)
    tr, te = split(ds, 160)
    assert (tr.n, te.n) == (160, 55)
