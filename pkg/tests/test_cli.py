import json

import numpy as np
import pytest

from shmeta.cli import run
from shmeta.field import Field, Grid, write_field_csv
from shmeta.io import read_csv, read_meta


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("SHMETA_OUTPUT_ROOT", str(tmp_path / "runs"))
    return tmp_path / "runs"


def run_json(capsys, argv):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), (json.loads(err) if err.strip() else None)


def test_constants_at_zero_q(capsys):
    code, out, _ = run_json(capsys, ["constants", "--q", "0"])
    assert code == 0
    assert out["linearization"]["gamma"] == pytest.approx(0.7071068, abs=1e-7)
    assert out["sternberg"]["condition_holds"] and out["sternberg"]["q_smoothness"] == 1
    assert out["config"]["energy"]["q"] == 0


def test_validate_potential(capsys):
    code, out, _ = run_json(capsys, ["validate-potential"])
    assert code == 0 and out["passed"]


def test_validate_failing_potential_is_config_error(capsys, tmp_path):
    cfg = tmp_path / "w.toml"
    cfg.write_text('[potential]\nkind = "polynomial"\ncoeffs = [1.1, 0, -2, 0, 1]\n')
    code, out, err = run_json(capsys, ["validate-potential", "--config", str(cfg)])
    assert code == 2 and not out["passed"] and "w3" in err["message"]


def test_bound_sweep_default_has_negative_slope(capsys, output_root):
    code, out, _ = run_json(capsys, ["bound-sweep", "--no-figures"])
    assert code == 0
    fit = json.loads((output_root / "bound-sweep" / "fit.json").read_text())
    assert fit["fit"]["slope"] < 0 and fit["schema_version"] == 1
    assert fit["config"]["bound_sweep"]["q"] == 0
    rows = read_csv(output_root / "bound-sweep" / "table.csv")
    assert [float(r["epsilon"]) for r in rows] == [0.01, 0.015, 0.02, 0.025, 0.03]


def test_simulate_outputs_and_reproducibility(capsys, tmp_path):
    args = ["simulate", "--epsilon", "0.05", "--tau", "1e-3", "--t-end", "0.01", "--scheme", "si",
            "--grid-n", "256", "--init", "random", "--seed", "7", "--snap-stride", "5"]
    outs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        code, out, _ = run_json(capsys, args + ["--out", str(out_dir)])
        assert code == 0
        outs.append(out_dir)
    a, b = outs
    for rel in ("energy.csv", "snapshots/t_0.000000000e+00.csv", "snapshots/t_1.000000000e-02.csv"):
        ta, tb = (a / rel).read_text(), (b / rel).read_text()
        assert ta.replace(str(a), "") == tb.replace(str(b), "")
    rows = read_csv(a / "energy.csv")
    assert len(rows) == 11 and list(rows[0]) == ["t", "total", "potential", "gradient", "hessian", "dissipation"]
    assert np.all(np.diff([float(r["total"]) for r in rows]) <= 0)
    assert read_meta(a / "energy.csv")["config"]["simulate"]["init"] == "random"
    run_doc = json.loads((a / "run.json").read_text())
    assert run_doc["summary"]["steps"] == 10
    assert (a / "energy.png").exists() and (a / "snapshots.png").exists()


def test_simulate_from_file_and_energy(capsys, tmp_path):
    g = Grid.torus(4096)
    path = tmp_path / "sine.csv"
    write_field_csv(Field(g, np.sin(2 * np.pi * g.x)), path)
    code, out, _ = run_json(capsys, ["energy", "--epsilon", "0.05", "--q", "0.1", "--input", str(path)])
    assert code == 0
    assert out["energy"]["total"] == pytest.approx(1.873713047023109, abs=1e-12)
    eps, k = 0.05, 2 * np.pi
    # averages of W(sin), (u'')^2 and (u')^2 over one period
    margin = 3 / 32 + eps**4 * k**4 / 2 - 0.1 * eps**2 * k**2 / 2
    assert out["interpolation"]["margin"] == pytest.approx(margin, abs=1e-12)
    assert out["interpolation"]["holds"] is True
    code, out, _ = run_json(capsys, ["simulate", "--init", str(path), "--t-end", "2e-4", "--no-figures",
                                     "--out", str(tmp_path / "s")])
    assert code == 0 and out["summary"]["steps"] == 2


def test_missing_init_file_is_config_error(capsys):
    code, _, err = run_json(capsys, ["simulate", "--init", "/nonexistent.csv"])
    assert code == 2 and err["error"] == "ArgumentError" and "simulate.init" in err["message"]


def test_numerical_failure_exit_code(capsys, tmp_path):
    cfg = tmp_path / "f.toml"
    cfg.write_text("[flow]\ninner_tol = 1e-15\ninner_max_iters = 1\ntau = 0.01\nt_end = 0.02\n")
    code, _, err = run_json(capsys, ["simulate", "--config", str(cfg), "--no-figures"])
    assert code == 3 and err["error"] == "StepFailure" and err["time"] == 0.0


def test_budget_exit_code(capsys, output_root):
    code, out, _ = run_json(capsys, ["slow-motion", "--eps", "0.05:0.07:3", "--budget-seconds", "0.5",
                                     "--no-figures"])
    assert code == 4 and out["partial"]
    rows = read_csv(output_root / "slow-motion" / "departures.csv")
    assert len(rows) == 3 and {r["status"] for r in rows} == {"budget"}
    assert "compliance_h1" in rows[0]


def test_m1_and_midpoint_decay(capsys, output_root):
    code, out, _ = run_json(capsys, ["m1", "--no-figures"])
    assert code == 0 and out["m1"]["m1"] == pytest.approx(0.7423441806064502, abs=1e-12)
    code, out, _ = run_json(capsys, ["midpoint-decay", "--d-over-eps", "10,15,20,25"])
    assert code == 0 and out["fit"]["slope"] == pytest.approx(-0.3535, rel=0.15)
    assert (output_root / "midpoint-decay" / "fit.png").exists()


def test_minimize_profile(capsys, output_root):
    code, out, _ = run_json(capsys, ["minimize-profile", "--epsilon", "0.05", "--q", "0", "--no-figures"])
    assert code == 0 and out["report"]["el_residual"] < 1e-6
    rows = read_csv(output_root / "minimize-profile" / "profile.csv")
    assert float(rows[0]["u"]) == 0.0


def test_bad_flag_value_exits_2():
    with pytest.raises(SystemExit) as info:
        run(["simulate", "--scheme", "rk4"])
    assert info.value.code == 2
