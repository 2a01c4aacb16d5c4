import json

import numpy as np
import pytest

from sirsfit.cli import main
from sirsfit.config import ConfigError, defaults, parse_config_text, resolve
from sirsfit.data import load_spatial_csv, read_field
from sirsfit.datasets import dataset_path

SMALL = ["--grid", "9", "9", "100"]


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([argv[0], "--out-dir", str(out), *argv[1:]])
    manifest = json.loads((out / "manifest.json").read_text())
    return code, out, manifest


def test_gridfit(tmp_path):
    code, out, manifest = run(tmp_path, "gridfit", *SMALL)
    assert code == 0 and manifest["exit_code"] == 0
    for year in range(2009, 2015):
        assert (out / f"gridfit_{year}.csv").is_file()
    grid, field = read_field(out / "data_y2.field")
    assert field.shape == (101, 9, 9) and field.min() >= 0
    assert set(manifest) >= {"config", "seed", "versions", "wall_time_s", "outputs"}


def test_fit_pde_small(tmp_path):
    code, out, manifest = run(tmp_path, "fit-pde", *SMALL, "--set", "max_iter=5")
    assert code in (0, 3)
    _, beta = read_field(out / "beta.field")
    assert beta.min() >= 0 and beta.max() <= 4
    J = np.loadtxt(out / "fit_trace.csv", delimiter=",", skiprows=1)[:, 1]
    assert np.all(np.diff(J) < 0)
    assert (out / "slice_2012.csv").is_file()
    assert not manifest["warnings"]


def test_fit_pde_time_mode_and_low_omega_warning(tmp_path, capsys):
    code, out, manifest = run(tmp_path, "fit-pde", *SMALL, "--omega", "1e-4", "--beta-mode", "time",
                              "--set", "max_iter=2")
    assert code in (0, 3)
    assert any("exceed 3" in w for w in manifest["warnings"])
    assert "exceed 3" in capsys.readouterr().err
    _, beta = read_field(out / "beta.field")
    assert np.all(beta == beta[:, :1, :1])  # constant in space


def test_missing_file_is_input_error(tmp_path, capsys):
    missing = tmp_path / "nowhere.csv"
    code, _, manifest = run(tmp_path, "fit-pde", *SMALL, "--set", f"spatial={missing}")
    assert code == 2
    assert str(missing) in capsys.readouterr().err and str(missing) in manifest["error"]


def test_bad_config_is_input_error(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nx = 9\nfoo = 3\n")
    code, _, manifest = run(tmp_path, "gridfit", "--config", str(cfg))
    assert code == 2 and "run.cfg:2" in manifest["error"]


def test_solver_failure_is_numerical_error(tmp_path):
    code, _, manifest = run(tmp_path, "fit-pde", "--grid", "9", "9", "2")
    assert code == 1 and "time step" in manifest["error"]


def test_fit_ode_constant(tmp_path):
    code, out, manifest = run(tmp_path, "fit-ode", "--set", "ode_fit=constant", "--set", "free=beta,gamma")
    assert code == 0
    fit = manifest["results"]["constant_fit"]
    assert fit["beta"] == pytest.approx(0.8823, rel=0.01) and fit["gamma"] == pytest.approx(0.8785, rel=0.01)
    assert (out / "constant_trajectory.csv").is_file()


def test_fit_ode_time_varying(tmp_path):
    code, out, manifest = run(tmp_path, "fit-ode", "--set", "ode_fit=time-varying", "--set", "max_iter=3",
                              "--set", "substeps=5")
    assert code in (0, 3)
    rows = np.loadtxt(out / "time_varying.csv", delimiter=",", skiprows=1)
    assert rows.shape == (316, 8)
    assert manifest["results"]["time_varying"]["iterations"] == 3


def test_simulate_sde_byte_identical(tmp_path):
    a = run(tmp_path, "simulate-sde", "--seed", "3", name="a")
    b = run(tmp_path, "simulate-sde", "--seed", "3", name="b")
    assert a[0] == b[0] == 0
    assert (a[1] / "sde_summary.csv").read_bytes() == (b[1] / "sde_summary.csv").read_bytes()
    c = run(tmp_path, "simulate-sde", "--seed", "4", name="c")
    assert (a[1] / "sde_summary.csv").read_bytes() != (c[1] / "sde_summary.csv").read_bytes()


def test_simulate_sde_refit(tmp_path):
    code, out, _ = run(tmp_path, "simulate-sde", "--set", "n_realizations=2", "--set", "refit_realizations=2")
    assert code == 0
    rows = np.loadtxt(out / "refit_histogram.csv", delimiter=",", skiprows=1)
    assert rows.shape == (2, 4)
    assert np.all(np.abs(rows[:, 1] / 0.8823 - 1) < 0.5) and np.all(rows[:, 3] > 0)


def test_stability_reports(tmp_path):
    code, out, manifest = run(tmp_path, "stability")
    assert code == 0
    text = (out / "stability.txt").read_text()
    assert "disease-free: stable" in text and "does not exist" in text
    code, out, _ = run(tmp_path, "stability", "--set", "beta=20", name="endemic")
    assert code == 0
    assert "endemic: stable" in (out / "stability.txt").read_text()
    assert len((out / "modes_endemic.txt").read_text().splitlines()) == 51
    assert (out / "sweep.csv").read_text().count("\n") == 42


def test_correlate_dewpoint_leads(tmp_path):
    code, out, manifest = run(tmp_path, "correlate")
    assert code == 0
    first = (out / "best_lags.csv").read_text().splitlines()[1].split(",")
    assert first[0] == "dewpoint" and first[1] == "3"
    assert any("windspeed" in w for w in manifest["warnings"])


def test_manifest_replay(tmp_path):
    code, out, manifest = run(tmp_path, "gridfit", *SMALL, "--stiffness", "0.3")
    code2, out2, manifest2 = run(tmp_path, "gridfit", "--config", str(out / "manifest.json"), name="replay")
    assert code == code2 == 0
    assert manifest2["config"] == manifest["config"]
    assert (out / "data_y2.field").read_bytes() == (out2 / "data_y2.field").read_bytes()
    with pytest.raises(SystemExit):
        main(["nonsense"])


def test_manifest_for_other_command_rejected(tmp_path):
    _, out, _ = run(tmp_path, "gridfit", *SMALL)
    code, _, manifest = run(tmp_path, "correlate", "--config", str(out / "manifest.json"), name="x")
    assert code == 2 and "gridfit" in manifest["error"]


def test_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small grid\nnx = 5\nny = 5\nnt = 20  # steps\nstiffness = 2\n")
    code, _, manifest = run(tmp_path, "gridfit", "--config", str(cfg), "--stiffness", "0.5")
    assert code == 0
    assert manifest["config"]["nx"] == 5 and manifest["config"]["stiffness"] == 0.5
    assert manifest["config_file_values"]["stiffness"] == 2.0
    assert manifest["overrides"] == {"stiffness": "0.5"}


def test_config_layers():
    d = defaults("fit-pde")
    assert d["omega"] == 1e-3 and d["beta_max"] == 4.0 and d["y1_0"] == 200.0
    cfg = resolve("fit-pde", {"nx": 5}, {"nx": "7", "eps": ""})
    assert cfg["nx"] == 7 and cfg["eps"] is None
    with pytest.raises(ConfigError):
        parse_config_text("nx 5")
    with pytest.raises(ConfigError):
        resolve("fit-pde", {}, {"beta_mode": "space"})
    with pytest.raises(ConfigError):
        resolve("fit-pde", {}, {"mu": "-1"})
    with pytest.raises(ConfigError):
        defaults("fit")


def test_village_file_shape():
    assert len(load_spatial_csv(dataset_path("villages.csv"))) == 6
