import json
import math

import numpy as np
import pytest

from archdpg.cli import main

CANTILEVER = {
    "parameters": {"epsilon": 1e-4, "mu": 1.0, "lambda": 6.0},
    "bc": "fc",
    "load": {"point_loads": [{"endpoint": 0, "component": "w", "magnitude": 1.0}]},
    "discretization": {"p": 1, "delta_p": 2, "test_norm": "standard"},
    "mesh": {"n": 8},
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(*argv):
    return main(list(argv))


class TestConfigValidation:
    def test_unknown_top_level_key(self, tmp_path, capsys):
        cfg = dict(CANTILEVER, bogus_key=1)
        rc = run("solve", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path))
        assert rc == 2
        assert "bogus_key" in capsys.readouterr().err

    def test_unknown_nested_key(self, tmp_path, capsys):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["load"]["distributed_x"] = {"poly": [1.0]}
        rc = run("solve", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path))
        assert rc == 2
        assert "load.distributed_x" in capsys.readouterr().err

    def test_bad_parameter_range(self, tmp_path, capsys):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["parameters"]["lambda"] = 7.5
        rc = run("solve", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path))
        assert rc == 2
        assert "lambda" in capsys.readouterr().err

    def test_bad_bc_code(self, tmp_path):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["bc"] = "zz"
        assert run("solve", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path)) == 2

    def test_missing_file(self, tmp_path):
        assert run("solve", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path)) == 2

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run("solve", "--config", str(path), "--out", str(tmp_path)) == 2

    def test_interior_point_load_rejected(self, tmp_path, capsys):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["load"]["point_loads"][0]["endpoint"] = 0.5
        assert run("solve", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path)) == 2

    def test_mesh_n_and_nodes_exclusive(self, tmp_path):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["mesh"] = {"n": 4, "nodes": [0.0, 0.5, 1.0]}
        assert run("solve", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path)) == 2


class TestSolveCommand:
    def test_outputs_and_summary(self, tmp_path):
        out = tmp_path / "run"
        rc = run("solve", "--config", write_config(tmp_path, CANTILEVER), "--out", str(out))
        assert rc == 0
        assert (out / "fields.csv").exists()
        assert (out / "traces.csv").exists()
        assert (out / "fields.png").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["stability"]["c_stab"] == 1.0
        assert summary["stability"]["regime"] == "covered-unit"
        assert summary["dofs"]["trace_free"] == 6 * 9 - 6
        header = (out / "fields.csv").read_text().splitlines()[0]
        assert header == "x,u,w,theta,n,q,m"

    def test_byte_stable_reruns(self, tmp_path):
        cfg_path = write_config(tmp_path, CANTILEVER)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run("solve", "--config", cfg_path, "--out", str(out1), "--no-plot") == 0
        assert run("solve", "--config", cfg_path, "--out", str(out2), "--no-plot") == 0
        for name in ("fields.csv", "traces.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_zero_load_gives_zero_columns(self, tmp_path):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["load"] = {}
        out = tmp_path / "zero"
        assert run("solve", "--config", write_config(tmp_path, cfg),
                   "--out", str(out), "--no-plot") == 0
        rows = (out / "fields.csv").read_text().splitlines()[1:]
        values = np.array([[float(tok) for tok in row.split(",")] for row in rows])
        assert np.all(values[:, 1:] == 0.0)

    def test_no_plot_suppresses_figure(self, tmp_path):
        out = tmp_path / "quiet"
        assert run("solve", "--config", write_config(tmp_path, CANTILEVER),
                   "--out", str(out), "--no-plot") == 0
        assert not (out / "fields.png").exists()

    def test_samples_per_element(self, tmp_path):
        out = tmp_path / "s"
        assert run("solve", "--config", write_config(tmp_path, CANTILEVER),
                   "--out", str(out), "--no-plot", "--samples-per-element", "5") == 0
        rows = (out / "fields.csv").read_text().splitlines()
        assert len(rows) == 1 + 8 * 5

    def test_scientific_notation_has_enough_digits(self, tmp_path):
        out = tmp_path / "digits"
        assert run("solve", "--config", write_config(tmp_path, CANTILEVER),
                   "--out", str(out), "--no-plot") == 0
        first_value = (out / "fields.csv").read_text().splitlines()[1].split(",")[0]
        mantissa = first_value.split("e")[0]
        assert len(mantissa.replace("-", "").replace(".", "")) >= 12
        assert "e" in first_value


class TestConvergeCommand:
    def test_rows_match_n_list(self, tmp_path):
        cfg = {
            "parameters": {"epsilon": 0.5, "mu": 1.0, "lambda": 2.0},
            "bc": "cc",
            "load": {
                "distributed_u": {"trig": [{"kind": "cos", "amplitude": 1.0, "frequency": 1.0, "phase": 0.0}]},
                "distributed_w": {"trig": [{"kind": "sin", "amplitude": 1.0, "frequency": 1.0, "phase": 0.0}]},
            },
            "discretization": {"p": 1, "delta_p": 2, "test_norm": "standard"},
            "mesh": {"n": 8},
        }
        out = tmp_path / "conv"
        rc = run("converge", "--config", write_config(tmp_path, cfg),
                 "--n-list", "4,8,16", "--out", str(out), "--no-plot")
        assert rc == 0
        lines = (out / "convergence.csv").read_text().splitlines()
        assert lines[0].startswith("N,h_max,err_u,")
        assert len(lines) == 4
        last = lines[-1].split(",")
        rates = [float(v) for v in last[9:]]
        assert all(abs(r - 2.0) < 0.4 for r in rates)

    def test_bad_n_list(self, tmp_path):
        assert run("converge", "--config", write_config(tmp_path, CANTILEVER),
                   "--n-list", "8,8", "--out", str(tmp_path)) == 2


class TestStabilityCommand:
    def test_csv_values(self, tmp_path):
        out = tmp_path / "stab"
        rc = run("stability", "--bc-codes", "cf,sd", "--lambda-min", "0.1",
                 "--lambda-max", "6.0", "--lambda-step", "0.1", "--out", str(out),
                 "--no-plot")
        assert rc == 0
        lines = (out / "stability_cf.csv").read_text().splitlines()
        assert lines[0] == "lambda,C_n,C_q,C_q0,C_stab,regime"
        rows = [line.split(",") for line in lines[1:]]
        # cf is the unit regime: C_stab identically one
        assert all(float(r[4]) == 1.0 for r in rows)
        assert all(r[5] == "covered-unit" for r in rows)
        lams = np.array([float(r[0]) for r in rows])
        cns = np.array([float(r[1]) for r in rows])
        cqs = np.array([float(r[2]) for r in rows])
        sel = lams >= 1.0
        assert np.all(np.diff(cns[sel]) > 0.0)  # C_n grows for lambda >= 1
        assert cqs[0] > 1e2  # C_q blows up as lambda -> 0+
        assert (out / "stability_sd.csv").exists()

    def test_lambda_grid_validation(self, tmp_path):
        assert run("stability", "--lambda-min", "0.0", "--out", str(tmp_path)) == 2


class TestCompareFemCommand:
    def test_dof_accounting_and_locking_columns(self, tmp_path):
        out = tmp_path / "cmp"
        rc = run("compare-fem", "--config", write_config(tmp_path, CANTILEVER),
                 "--n-list", "8,16", "--out", str(out), "--no-plot")
        assert rc == 0
        lines = (out / "compare_fem.csv").read_text().splitlines()
        rows = [line.split(",") for line in lines[1:]]
        for row in rows:
            n = int(row[0])
            assert int(row[1]) == 6 * (n + 1) - 6
            assert int(row[2]) == 3 * (n + 1) - 3  # fc: 3 kinematic constraints
        unred_w = float(rows[-1][13])
        red_w = float(rows[-1][10])
        assert unred_w > 0.9 and red_w < 0.1

    def test_mu_zero_rejected(self, tmp_path):
        cfg = json.loads(json.dumps(CANTILEVER))
        cfg["parameters"]["mu"] = 0.0
        assert run("compare-fem", "--config", write_config(tmp_path, cfg),
                   "--n-list", "8,16", "--out", str(tmp_path)) == 2


class TestOracleCommand:
    def test_dump(self, tmp_path):
        out = tmp_path / "oracle"
        rc = run("oracle", "--config", write_config(tmp_path, CANTILEVER),
                 "--out", str(out), "--samples", "11")
        assert rc == 0
        lines = (out / "reference.csv").read_text().splitlines()
        assert len(lines) == 12
        w_tip = float(lines[1].split(",")[2])
        assert w_tip > 0.0  # deflection follows the load sign
