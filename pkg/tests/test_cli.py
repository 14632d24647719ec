import json
from pathlib import Path

import pytest

from nltaxis.cli import main
from nltaxis.config import load_config, parse_config, solver_config
from nltaxis.errors import ConfigurationError

SMALL_RUN = """
[grid]
length = 10.0
n_cells = 100

[model]
preset = "minimal_linear"
a = 0.05
s_cc = 0.0
s_cv = 10.0
mu = 1.0

[formulation]
kind = "nonlocal_adhesion"
radius = 1.0

[initial]
alpha = 2.0
center = 5.0

[time]
t_end = 0.6
sample_times = [0.3, 0.6]

[sweep]
radii = [1.0, 0.5]

[compare]
first = "nonlocal_adhesion"
second = "nonlocal_ball"

[output]
directory = "{out}"
"""

ILL_POSED_RUN = """
[grid]
length = 10.0
n_cells = 100

[model]
preset = "minimal_linear"
a = 0.01
s_cc = 2.5
s_cv = 10.0
mu = 1.0

[formulation]
kind = "local"

[initial]
alpha = 2.0
center = 5.0

[time]
t_end = 2.0
sample_times = [1.0, 2.0]

[output]
directory = "{out}"
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_RUN.format(out=tmp_path / "out"))
    return path


@pytest.fixture
def ill_posed_config(tmp_path):
    path = tmp_path / "ill.toml"
    path.write_text(ILL_POSED_RUN.format(out=tmp_path / "out"))
    return path


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def test_load_config_resolves_defaults(small_config):
    cfg = load_config(small_config)
    resolved = cfg.resolved()
    assert resolved["time"]["rel_tol"] == 1e-6
    assert resolved["initial"]["v_const"] == 1.0
    assert resolved["formulation"]["quad_points"] == 8
    sc = solver_config(cfg)
    assert sc.grid.n_cells == 100


def test_unknown_key_is_hard_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL_RUN.format(out=tmp_path) + "\n[grid]\n" if False else SMALL_RUN.format(out=tmp_path).replace("alpha = 2.0", "alpha = 2.0\nwobble = 1"))
    with pytest.raises(ConfigurationError, match="wobble"):
        load_config(path)


def test_unknown_section_is_hard_error():
    with pytest.raises(ConfigurationError, match="sections"):
        parse_config({"grid": {"length": 1.0, "n_cells": 8}, "mystery": {}})


def test_missing_section_is_hard_error():
    with pytest.raises(ConfigurationError, match="missing"):
        parse_config({"grid": {"length": 1.0, "n_cells": 8}})


def test_wrong_type_is_hard_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL_RUN.format(out=tmp_path).replace("n_cells = 100", 'n_cells = "many"'))
    with pytest.raises(ConfigurationError, match="wrong type"):
        load_config(path)


# ---------------------------------------------------------------------------
# run command
# ---------------------------------------------------------------------------


def test_run_writes_outputs_and_exits_zero(small_config, tmp_path):
    out = tmp_path / "run_out"
    assert main(["run", "--config", str(small_config), "--out", str(out)]) == 0
    profiles = (out / "profiles.csv").read_text().splitlines()
    assert profiles[0] == "t,x,c,v"
    assert len(profiles) == 1 + 2 * 100  # two sample times, one row per cell
    ts = [float(line.split(",")[0]) for line in profiles[1:]]
    assert ts == sorted(ts)
    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0] == "t,mass_c,min_c,max_c,mass_v"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert manifest["resolved_config"]["time"]["rel_tol"] == 1e-6
    names = {o["path"] for o in manifest["outputs"]}
    assert {"profiles.csv", "diagnostics.csv"} <= names


def test_run_determinism_byte_identical(small_config, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(small_config), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(small_config), "--out", str(out2)]) == 0
    for name in ("profiles.csv", "diagnostics.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["outputs"] == m2["outputs"]  # content hashes match


def test_run_missing_config_exit_one(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 1


def test_run_malformed_config_exit_one(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid]\nlength = 10.0\nn_cells = 100\n")  # missing sections
    assert main(["run", "--config", str(bad)]) == 1
    bad.write_text("this is { not toml")
    assert main(["run", "--config", str(bad)]) == 1


def test_run_ill_posed_exit_two_with_partial_outputs(ill_posed_config, tmp_path):
    out = tmp_path / "ill_out"
    assert main(["run", "--config", str(ill_posed_config), "--out", str(out)]) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ill-posed-abort"
    assert manifest["t_final"] < 2.0
    assert (out / "profiles.csv").exists()


def test_usage_error_exit_one():
    assert main(["run"]) == 1  # missing --config
    assert main(["bogus-command"]) == 1


# ---------------------------------------------------------------------------
# sweep command
# ---------------------------------------------------------------------------


def test_sweep_outputs(small_config, tmp_path):
    out = tmp_path / "sweep_out"
    assert main(["sweep", "--config", str(small_config), "--out", str(out)]) == 0
    dist = (out / "distances.csv").read_text().splitlines()
    assert dist[0] == "t,r,d"
    rows = [line.split(",") for line in dist[1:]]
    assert len(rows) == 4  # two radii x two sample times
    radii = [float(r[1]) for r in rows]
    assert radii == [1.0, 1.0, 0.5, 0.5]  # r outer (descending), t inner
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert set(manifest["sweep_statuses"]) == {"r_1.0", "r_0.5"}
    assert (out / "reference" / "profiles.csv").exists()
    assert (out / "r_1.0" / "profiles.csv").exists()


def test_sweep_radii_flag_overrides(small_config, tmp_path):
    out = tmp_path / "sweep_out2"
    assert main(["sweep", "--config", str(small_config), "--out", str(out), "--radii", "0.8"]) == 0
    dist = (out / "distances.csv").read_text().splitlines()
    assert all(line.split(",")[1] == "0.8" for line in dist[1:])


def test_sweep_empty_radii_exit_one(small_config, tmp_path):
    cfg = load_config(small_config)
    text = small_config.read_text().replace("radii = [1.0, 0.5]", "radii = []")
    bad = tmp_path / "noradii.toml"
    bad.write_text(text)
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1


def test_sweep_parallel_matches_serial(small_config, tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["sweep", "--config", str(small_config), "--out", str(out1)]) == 0
    assert main(["sweep", "--config", str(small_config), "--out", str(out2), "--jobs", "2"]) == 0
    assert (out1 / "distances.csv").read_bytes() == (out2 / "distances.csv").read_bytes()


def test_sweep_ill_posed_reference_exit_two(ill_posed_config, tmp_path):
    out = tmp_path / "sweep_ill"
    code = main(["sweep", "--config", str(ill_posed_config), "--out", str(out), "--radii", "1.0"])
    assert code == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ill-posed-abort"
    assert manifest["sweep_statuses"]["r_1.0"] == "completed"


# ---------------------------------------------------------------------------
# compare command
# ---------------------------------------------------------------------------


def test_compare_outputs(small_config, tmp_path):
    out = tmp_path / "cmp_out"
    assert main(["compare", "--config", str(small_config), "--out", str(out), "--op-profiles"]) == 0
    lines = (out / "comparison.csv").read_text().splitlines()
    assert lines[0] == "t,distance,interior_max,layer_max,op_interior_max,op_layer_max"
    assert len(lines) == 3
    assert (out / "first_nonlocal_adhesion" / "profiles.csv").exists()
    assert (out / "second_nonlocal_ball" / "profiles.csv").exists()
    op = (out / "operator_profiles.csv").read_text().splitlines()
    assert op[0] == "t,x,adhesion_velocity,ball_average_grad"


def test_compare_requires_section(ill_posed_config, tmp_path):
    assert main(["compare", "--config", str(ill_posed_config), "--out", str(tmp_path / "c")]) == 1


def test_compare_self_is_zero(small_config, tmp_path):
    text = small_config.read_text().replace('second = "nonlocal_ball"', 'second = "nonlocal_adhesion"')
    cfg_path = tmp_path / "self.toml"
    cfg_path.write_text(text)
    out = tmp_path / "cmp_self"
    assert main(["compare", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "comparison.csv").read_text().splitlines()[1:]
    assert all(float(line.split(",")[1]) == 0.0 for line in lines)


# ---------------------------------------------------------------------------
# opcheck and plot commands
# ---------------------------------------------------------------------------


def test_opcheck_small_grid_passes(tmp_path, capsys):
    assert main(["opcheck", "--length", "20", "--n-cells", "500", "--out", str(tmp_path)]) == 0
    report = (tmp_path / "opcheck_report.txt").read_text()
    assert "PASS" in report and "FAIL" not in report
    assert "checks passed" in capsys.readouterr().out


def test_opcheck_broken_kernel_exit_three(tmp_path):
    assert (
        main(["opcheck", "--length", "20", "--n-cells", "500", "--broken-kernel", "--out", str(tmp_path)])
        == 3
    )
    assert "FAIL" in (tmp_path / "opcheck_report.txt").read_text()


def test_plot_round_trip(small_config, tmp_path):
    out = tmp_path / "run_out"
    assert main(["run", "--config", str(small_config), "--out", str(out)]) == 0
    plot_out = tmp_path / "plots"
    assert main(["plot", str(out / "profiles.csv"), "--out", str(plot_out)]) == 0
    assert (plot_out / "profiles_c.svg").exists()
    assert (plot_out / "profiles_v.svg").exists()
    assert main(["plot", str(out / "diagnostics.csv"), "--out", str(plot_out)]) == 0
    assert (plot_out / "diagnostics.svg").exists()


def test_plot_distances(small_config, tmp_path):
    out = tmp_path / "sweep_out"
    assert main(["sweep", "--config", str(small_config), "--out", str(out)]) == 0
    assert main(["plot", str(out / "distances.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "distances.svg").exists()


def test_plot_empty_csv_exit_one(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t,x,c,v\n")
    assert main(["plot", str(empty)]) == 1
    missing_header = tmp_path / "noheader.csv"
    missing_header.write_text("")
    assert main(["plot", str(missing_header)]) == 1


def test_run_with_svg_format(small_config, tmp_path):
    out = tmp_path / "svg_out"
    assert main(["run", "--config", str(small_config), "--out", str(out), "--format", "svg"]) == 0
    assert (out / "profiles_c.svg").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    names = {o["path"] for o in manifest["outputs"]}
    assert "profiles_c.svg" in names


# ---------------------------------------------------------------------------
# shipped config library
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "name", ["fig1", "fig2", "fig3a", "fig3b", "fig3c", "fig4", "fig5a", "fig5b"]
)
def test_shipped_configs_parse(name):
    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / f"{name}.toml")
    sc = solver_config(cfg)
    assert sc.grid.n_cells >= 4
    assert sc.t_end > 0
