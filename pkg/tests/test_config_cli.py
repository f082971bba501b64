import math

import numpy as np
import pytest

from sitfem import cli
from sitfem.config import ConfigError, ScenarioConfig, config_to_dict, parse_config, render_config
from sitfem.model import ModelParams
from sitfem.output import TIMESERIES_COLUMNS, read_timeseries, read_vtk_scalars
from sitfem.release import Gaussian, Uniform
from sitfem.scenarios import catalog, resolve

SMALL = """
name = "small"
[mesh]
n = 4
[scheme]
theta = 1.0
dt = 0.5
T = 3.0
[initial]
M = { kind = "uniform", value = 100.0 }
F = { kind = "gaussian", center = [0.5, 0.5], amplitude = 200.0 }
M_S = { kind = "uniform", value = 0.0 }
[release]
continuous = { kind = "scaled", shape = "uniform", lambda_crit_factor = 0.5 }
[[release.impulses]]
t = 1.0
field = { kind = "uniform", value = 10.0 }
[output]
sample_every = 0.5
snapshot_times = [0.0, 1.0, 3.0]
fields = true
"""


def test_defaults():
    cfg = parse_config('name = "d"')
    assert cfg.n == 64 and cfg.scheme.theta == 1.0 and cfg.scheme.dt == 0.5 and cfg.scheme.T == 500.0
    assert cfg.params == ModelParams()
    assert cfg.initial == (Uniform(0.0), Uniform(0.0), Uniform(0.0))


def test_full_document():
    cfg = parse_config(SMALL)
    assert cfg.initial[1] == Gaussian((0.5, 0.5), 200.0)
    assert cfg.schedule.continuous.value == pytest.approx(0.5 * 1291.92, abs=0.01)
    assert [i.t for i in cfg.schedule.impulses] == [1.0]


@pytest.mark.parametrize("text,path", [
    ("[scheme]\ntheta = 0.3", "scheme"),
    ("[scheme]\ndt = 0.5\n[[release.impulses]]\nt = 10.25\nfield = { kind = 'uniform', value = 1.0 }",
     "release.impulses[0].t"),
    ("[mesh]\nn = 4\nsize = 3", "mesh.size"),
    ("[initial]\nM = { kind = 'uniform', value = 1.0, extra = 2 }", "initial.M.extra"),
    ("[params]\ngama = 0.5", "params.gama"),
    ("[initial]\nF = { kind = 'blob' }", "initial.F.kind"),
    ("[output]\nsnapshot_times = [501.0]", "output.snapshot_times[0]"),
    ("[mesh]\nn = 0", "mesh.n"),
    ("[initial]\nM = { kind = 'uniform', value = -1.0 }", "initial.M"),
])
def test_rejections_name_the_key(text, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.path.startswith(path)


def test_bad_toml():
    with pytest.raises(ConfigError):
        parse_config("name = ")


@pytest.mark.parametrize("cfg", [c for v in catalog().values() for c in v], ids=lambda c: c.name)
def test_round_trip_catalog(cfg):
    again = parse_config(render_config(cfg))
    assert again == cfg
    assert render_config(again) == render_config(cfg)


def test_round_trip_small():
    cfg = parse_config(SMALL)
    assert parse_config(render_config(cfg)) == cfg
    assert config_to_dict(cfg)["mesh"]["n"] == 4


def test_overrides_trim_past_T():
    cfg = resolve("impulsive-control/c")[0].with_overrides(T=40.0)
    assert max(cfg.output.snapshot_times) <= 40 and max(i.t for i in cfg.schedule.impulses) <= 40


def test_resolve_unknown():
    with pytest.raises(KeyError):
        resolve("nope")
    with pytest.raises(KeyError):
        resolve("control-location/z")


@pytest.fixture
def small_file(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def test_run_outputs(small_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", str(small_file), "--out", str(out)]) == 0
    ts = read_timeseries(out / "timeseries.csv")
    assert tuple(ts) == TIMESERIES_COLUMNS
    np.testing.assert_allclose(ts["t"], np.arange(0, 3.01, 0.5))
    assert (out / "manifest.toml").read_text().startswith("# sitfem")
    parse_config((out / "manifest.toml").read_text())
    for label in ("0", "1-", "1", "3"):
        for tag in ("M", "F", "Ms"):
            prof = (out / f"profile_{tag}_t{label}.csv").read_text().splitlines()
            assert prof[0] == "x,value" and len(prof) == 6
            rows = (out / f"field_{tag}_t{label}.csv").read_text().splitlines()
            assert len(rows) == 5 and all(len(r.split(",")) == 5 for r in rows)
    vtk = (out / "field_F_t0.vtk").read_text().splitlines()
    assert vtk[0] == "# vtk DataFile Version 3.0" and vtk[3] == "DATASET STRUCTURED_GRID"
    assert vtk[4] == "DIMENSIONS 5 5 1" and vtk[5] == "POINTS 25 double"
    vals = read_vtk_scalars(out / "field_F_t0.vtk")
    assert vals[12] == pytest.approx(200.0) and len(vals) == 25
    ms1 = read_vtk_scalars(out / "field_Ms_t1.vtk") - read_vtk_scalars(out / "field_Ms_t1-.vtk")
    np.testing.assert_allclose(ms1, 10.0)
    assert "small" in capsys.readouterr().out


def test_determinism(small_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(small_file), "--out", str(a)]) == 0
    assert cli.main(["run", str(small_file), "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_env_output_dir(small_file, tmp_path, monkeypatch):
    monkeypatch.setenv("SITFEM_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["run", "homogeneous-bistability/lambda0.9-ic80", "--T", "2", "--n", "2"]) == 0
    assert (tmp_path / "env" / "homogeneous-bistability" / "lambda0.9-ic80" / "timeseries.csv").is_file()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scheme]\ntheta = 0.3\n")
    assert cli.main(["run", str(bad)]) == 2
    assert "scheme" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 2
    assert cli.main(["run", "no-such-scenario"]) == 2
    assert cli.main(["run", "control-location/a", "--dt", "0.3", "--T", "1"]) == 2
    assert cli.main(["run", "theta-comparison", "--T", "1"]) == 2


def test_solver_failure_exit_3(small_file, tmp_path, monkeypatch):
    from sitfem import stepper
    from sitfem.linalg import SolverError

    def boom(*a, **k):
        raise SolverError("did not converge", 1.0, 7)

    monkeypatch.setattr(stepper, "cg_solve", boom)
    out = tmp_path / "out"
    assert cli.main(["run", str(small_file), "--out", str(out)]) == 3
    assert "did not converge" in (out / "error.txt").read_text()


def test_threshold_command(capsys):
    assert cli.main(["threshold"]) == 0
    out = capsys.readouterr().out
    lc = float(out.splitlines()[0].split("=")[1])
    assert lc == pytest.approx(1292, abs=1)
    assert "M* = 5194.2" in out


def test_threshold_not_viable(capsys):
    assert cli.main(["threshold", "--set", "mu_F=3.0"]) == 2
    assert "not viable" in capsys.readouterr().out
    assert cli.main(["threshold", "--set", "nope=1"]) == 2


def test_ode_command(tmp_path):
    assert cli.main(["ode", "--M0", "0", "--F0", "0", "--Lambda", "100", "--T", "10", "--dt", "0.1",
                     "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "ode.csv").read_text().splitlines()
    assert lines[0] == "t,M,F,Ms" and len(lines) == 12
    ms10 = float(lines[-1].split(",")[3])
    assert ms10 == pytest.approx(100 / 0.04 * (1 - math.exp(-0.4)), rel=1e-8)


def test_list_command(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("homogeneous-bistability", "gaussian-release", "convergence-study", "theta-comparison",
                 "initial-conditions", "control-location", "impulsive-control"):
        assert name in out


def test_scenario_config_validates_directly():
    with pytest.raises(ConfigError):
        ScenarioConfig(n=0)
