"""Command-line interface: commands, reports, determinism and exit codes."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from polyextrema.cli import StudyConfig, dumps, main
from polyextrema.errors import ConfigError


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("POLYEXTREMA_SEED", raising=False)
    monkeypatch.delenv("POLYEXTREMA_THREADS", raising=False)
    return tmp_path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def write_dataset(path, X, f, header=None):
    d = X.shape[1]
    header = header or [f"x{k}" for k in range(1, d + 1)] + ["f"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(np.column_stack([X, f]).tolist())


class TestFit:
    def test_full_fit(self, workdir):
        assert main(["fit", "--model", "additive_2d", "--method", "full", "--degree", "4",
                     "--out", "s.json"]) == 0
        doc = json.loads((workdir / "s.json").read_text())
        assert len(doc["coefficients"]) == 15
        for key in ("residual", "rank", "condition"):
            assert key in doc["diagnostics"]
        assert (workdir / "s.json.config.json").exists()

    def test_ridge_fit_reports_lift(self, workdir, capsys):
        assert main(["fit", "--model", "analytical_ridge", "--method", "ridge", "--subspace-dim", "2",
                     "--samples", "100", "--out", "r.json"]) == 0
        msg = json.loads(capsys.readouterr().out)
        assert msg["lift_residual"] < 1e-6

    def test_lars_fit(self, workdir):
        assert main(["fit", "--model", "analytical_ridge", "--method", "lars", "--samples", "60",
                     "--p-max", "3", "--out", "l.json"]) == 0

    def test_dataset_fit(self, workdir, rng):
        X = rng.random((50, 2))
        write_dataset(workdir / "d.csv", X, X[:, 0] + X[:, 1] ** 2)
        assert main(["fit", "--data", "d.csv", "--degree", "2", "--out", "d.json"]) == 0
        resolved = json.loads((workdir / "d.json.config.json").read_text())
        assert resolved["inputs"][0]["distribution"] == "uniform"

    def test_missing_column(self, workdir, rng, capsys):
        X = rng.random((20, 2))
        write_dataset(workdir / "d.csv", X, X[:, 0], header=["x1", "x3", "f"])
        assert main(["fit", "--data", "d.csv", "--degree", "1"]) == 2
        assert "x2" in capsys.readouterr().err

    def test_missing_output_column(self, workdir, rng, capsys):
        X = rng.random((20, 2))
        write_dataset(workdir / "d.csv", X, X[:, 0], header=["x1", "x2", "y"])
        assert main(["fit", "--data", "d.csv"]) == 2
        assert "'f'" in capsys.readouterr().err

    def test_underdetermined_is_numerical(self, workdir):
        assert main(["fit", "--model", "borehole", "--degree", "4", "--samples", "50"]) == 3

    def test_missing_file_is_io(self, workdir):
        assert main(["fit", "--data", "nope.csv"]) == 4


class TestSensitivity:
    def test_sobol_report(self, workdir):
        main(["fit", "--model", "additive_2d", "--degree", "4", "--out", "s.json"])
        assert main(["sensitivity", "--surrogate", "s.json", "--kind", "sobol", "--out", "r.json"]) == 0
        entries = json.loads((workdir / "r.json").read_text())["reports"]["sobol"]["entries"]
        vals = {e["label"]: e["mean"] for e in entries}
        assert vals["x1"] == pytest.approx(5 / 9, abs=1e-8)

    def test_trials_csv(self, workdir):
        assert main(["sensitivity", "--model", "borehole", "--kind", "total", "--degree", "2",
                     "--samples", "100", "--trials", "30", "--out", "t.json"]) == 0
        rows = read_csv(workdir / "t.csv")
        assert rows[0] == ["report", "label", "mean", "sd"]
        assert len(rows) == 9
        assert all(float(r[3]) >= 0 for r in rows[1:])

    def test_extremum_tails(self, workdir):
        assert main(["sensitivity", "--model", "additive_2d", "--kind", "extremum", "--tail", "both",
                     "--pool-size", "20000", "--extremum-degree", "4", "--out", "e.json"]) == 0
        reports = json.loads((workdir / "e.json").read_text())["reports"]
        bottom = [e["mean"] for e in reports["bottom"]["entries"]]
        top = [e["mean"] for e in reports["top"]["entries"]]
        assert bottom[0] > bottom[1]
        assert top[1] > top[0]

    def test_skewness_symmetric_flagged(self, workdir, rng):
        X = rng.uniform(-1, 1, (40, 2))
        write_dataset(workdir / "d.csv", X, X[:, 0] - 2 * X[:, 1])
        (workdir / "c.json").write_text(json.dumps({"inputs": [
            {"distribution": "uniform", "lower": -1, "upper": 1}] * 2}))
        assert main(["sensitivity", "--config", "c.json", "--data", "d.csv", "--degree", "1",
                     "--kind", "skewness", "--out", "k.json"]) == 0
        rep = json.loads((workdir / "k.json").read_text())["reports"]["skewness"]
        assert rep["metadata"]["status"] == "undefined (gamma~0)"

    def test_skewness_report(self, workdir):
        assert main(["sensitivity", "--model", "additive_2d", "--degree", "4", "--samples", "40",
                     "--kind", "skewness", "--out", "k.json"]) == 0
        rep = json.loads((workdir / "k.json").read_text())["reports"]["skewness"]
        totals = {e["label"]: e["mean"] for e in rep["totals"]}
        assert totals["x1"] < 0 < totals["x2"]

    def test_qmc(self, workdir):
        assert main(["sensitivity", "--model", "additive_2d", "--method", "qmc", "--kind", "total",
                     "--samples", "6000", "--out", "q.json"]) == 0
        entries = json.loads((workdir / "q.json").read_text())["reports"]["total"]["entries"]
        assert entries[0]["mean"] == pytest.approx(5 / 9, abs=0.03)

    def test_deterministic_bytes(self, workdir):
        args = ["sensitivity", "--model", "piston", "--kind", "total", "--degree", "2",
                "--samples", "80", "--trials", "3", "--seed", "5"]
        main(args + ["--out", "a.json"])
        main(args + ["--out", "b.json"])
        assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()

    def test_resolved_config_round_trip(self, workdir):
        main(["sensitivity", "--model", "piston", "--kind", "sobol", "--degree", "2", "--samples", "80",
              "--seed", "3", "--out", "a.json"])
        assert main(["sensitivity", "--config", "a.json.config.json", "--out", "b.json"]) == 0
        assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()

    def test_environment_seed(self, workdir, monkeypatch):
        base = ["sensitivity", "--model", "piston", "--kind", "total", "--degree", "2", "--samples", "80"]
        main(base + ["--seed", "11", "--out", "a.json"])
        monkeypatch.setenv("POLYEXTREMA_SEED", "11")
        main(base + ["--out", "b.json"])
        assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()

    def test_needs_input(self, workdir):
        assert main(["sensitivity", "--kind", "sobol"]) == 2


class TestCompare:
    def test_small_study(self, workdir):
        assert main(["compare", "--model", "analytical_ridge", "--methods", "ridge,qmc,full",
                     "--budgets", "50,100", "--trials", "2", "--out", "c.csv"]) == 0
        rows = read_csv(workdir / "c.csv")
        assert rows[0][:4] == ["method", "budget", "subset", "truth"]
        skipped = [r for r in rows[1:] if r[0] == "full"]
        assert skipped and all("skipped" in r[7] for r in skipped)
        truth = {r[2]: float(r[3]) for r in rows[1:]}
        assert truth["1-3"] == pytest.approx(0.153253, abs=1e-6)

    def test_empty_method_list(self, workdir):
        assert main(["compare", "--model", "analytical_ridge", "--methods", ""]) == 2

    def test_unknown_method(self, workdir):
        assert main(["compare", "--model", "analytical_ridge", "--methods", "mave"]) == 2


class TestBench:
    def test_dump(self, workdir):
        assert main(["bench", "borehole", "--dump", "100", "--seed", "7", "--out", "a.csv"]) == 0
        assert main(["bench", "borehole", "--dump", "100", "--seed", "7", "--out", "b.csv"]) == 0
        rows = read_csv(workdir / "a.csv")
        assert len(rows) == 101 and all(len(r) == 9 for r in rows)
        assert rows[0][-1] == "f"
        assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()

    def test_spec(self, capsys):
        assert main(["bench", "piston", "--spec"]) == 0
        spec = json.loads(capsys.readouterr().out)
        ranges = {i["name"]: (i["lower"], i["upper"]) for i in spec["inputs"]}
        assert ranges["M"] == (30.0, 60.0)
        assert ranges["k"] == (1000.0, 5000.0)
        assert ranges["T_0"] == (340.0, 360.0)

    def test_unknown_model(self, capsys):
        assert main(["bench", "ishigami"]) == 2
        assert "unknown model" in capsys.readouterr().err


class TestSubspace:
    def test_export_import(self, workdir, capsys):
        main(["fit", "--model", "analytical_ridge", "--method", "ridge", "--samples", "100",
              "--out", "r.json"])
        assert main(["subspace", "export", "--surrogate", "r.json", "--out", "M.csv"]) == 0
        capsys.readouterr()
        assert main(["subspace", "import", "M.csv", "--model", "analytical_ridge"]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["d"] == 6 and info["n"] == 2
        assert info["angle_to_true"] < 1e-6

    def test_estimate_and_reuse(self, workdir):
        assert main(["subspace", "estimate", "--model", "analytical_ridge", "--samples", "150",
                     "--out", "M.csv"]) == 0
        assert main(["fit", "--model", "analytical_ridge", "--method", "ridge", "--subspace", "M.csv",
                     "--out", "r.json"]) == 0


class TestConfig:
    def test_unknown_key(self, workdir):
        (workdir / "c.json").write_text(json.dumps({"degre": 3}))
        assert main(["fit", "--config", "c.json", "--model", "additive_2d"]) == 2

    def test_schema_types(self):
        with pytest.raises(ConfigError):
            StudyConfig.from_dict({"degree": "four"})
        with pytest.raises(ConfigError):
            StudyConfig.from_dict({"fraction": 0.7})

    def test_invalid_json(self, workdir):
        (workdir / "c.json").write_text("{")
        assert main(["fit", "--config", "c.json"]) == 2

    def test_float_format(self):
        assert dumps({"a": 0.1, "b": [1.0, 2]}) == '{\n  "a": 0.10000000000000001,\n  "b": [1.0, 2]\n}'


def test_module_entry_point(workdir):
    out = subprocess.run([sys.executable, "-m", "polyextrema", "bench", "additive_2d", "--spec"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["dim"] == 2
