import os

import numpy as np
import pytest

from hypoflow.cli import RunConfig, load_config, main, parse_config_text
from hypoflow.core import ConfigError


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_config_text_basics():
    cfg = parse_config_text("""
# a comment
solver.dt = 0.02
scenario.preset = cross   # trailing comment
""")
    assert cfg == {"solver.dt": "0.02", "scenario.preset": "cross"}


def test_parse_rejects_malformed_line():
    with pytest.raises(ConfigError):
        parse_config_text("solver.dt 0.02")


def test_parse_rejects_duplicate_key():
    with pytest.raises(ConfigError):
        parse_config_text("a.b = 1\na.b = 2")


def test_unknown_key_is_hard_error():
    with pytest.raises(ConfigError) as err:
        RunConfig({"solver.dtt": "0.01"})
    assert "solver.dtt" in str(err.value)


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        RunConfig({"scenario.preset": "circle"})


def test_custom_region_config():
    cfg = RunConfig({
        "scenario.preset": "custom",
        "region.count": "2",
        "region.1.kind": "disk",
        "region.1.center": "0.25 0.25",
        "region.1.radius": "0.2",
        "region.2.kind": "band",
        "region.2.axis": "1",
        "region.2.center": "0.5",
        "region.2.width": "0.25",
    })
    assert len(cfg.region.components) == 2


def test_preset_regions_build():
    for preset in ("uniform", "cross", "band", "two-disks"):
        cfg = RunConfig({"scenario.preset": preset, "grid.n_x": "16",
                         "grid.n_theta": "16"})
        field = cfg.build_field()
        assert field.sigma_sup > 0


# ---------------------------------------------------------------------------
# subcommands (small grids to keep runtime down)
# ---------------------------------------------------------------------------

FAST = """
grid.n_x = 16
grid.n_theta = 16
solver.dt = 0.02
solver.t_end = 2.0
gcc.positions = 16
gcc.angles = 8
"""


def test_cmd_simulate_uniform(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = uniform\n" + FAST)
    out = str(tmp_path / "out")
    assert main(["simulate", "--config", cfgpath, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "series.csv"))
    assert os.path.exists(os.path.join(out, "report.txt"))
    assert os.path.exists(os.path.join(out, "state.bin"))
    rows = np.loadtxt(os.path.join(out, "series.csv"), delimiter=",", skiprows=2)
    l2 = rows[:, 2]
    assert np.all(np.diff(l2) <= 1e-12 * l2[0])  # monotone l2 column


def test_cmd_simulate_band_flags_gcc(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = band\n" + FAST)
    out = str(tmp_path / "out")
    assert main(["simulate", "--config", cfgpath, "--out", out]) == 0
    report = open(os.path.join(out, "report.txt")).read()
    assert "uniform GCC not certified" in report


def test_cmd_simulate_gnuplot(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = uniform\n" + FAST)
    out = str(tmp_path / "out")
    assert main(["simulate", "--config", cfgpath, "--out", out, "--gnuplot"]) == 0
    assert os.path.exists(os.path.join(out, "plot.gp"))


def test_cmd_simulate_determinism(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = cross\n" + FAST)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["simulate", "--config", cfgpath, "--out", out1, "--seed", "5"]) == 0
    assert main(["simulate", "--config", cfgpath, "--out", out2, "--seed", "5"]) == 0
    a = open(os.path.join(out1, "series.csv")).read().splitlines()[1:]
    b = open(os.path.join(out2, "series.csv")).read().splitlines()[1:]
    assert a == b
    out3 = str(tmp_path / "c")
    assert main(["simulate", "--config", cfgpath, "--out", out3, "--seed", "6"]) == 0
    c = open(os.path.join(out3, "series.csv")).read().splitlines()[1:]
    assert a != c


def test_cmd_gcc_uniform_and_band(tmp_path):
    out = str(tmp_path / "g1")
    cfgpath = write_config(tmp_path, "scenario.preset = uniform\ngcc.t_star = 1.5\n" + FAST)
    try:
        assert main(["gcc", "--config", cfgpath, "--out", out,
                     "--threads", "1"]) == 0
    finally:
        try:
            import numba
            numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        except ImportError:
            pass
    assert os.path.exists(os.path.join(out, "psi.bin"))
    text = open(os.path.join(out, "gcc.txt")).read()
    assert "c_min            : 1.5" in text
    out2 = str(tmp_path / "g2")
    cfgpath2 = write_config(tmp_path, "scenario.preset = band\n" + FAST, "b.cfg")
    assert main(["gcc", "--config", cfgpath2, "--out", out2]) == 0
    text2 = open(os.path.join(out2, "gcc.txt")).read()
    assert "c_min            : 0" in text2
    assert "theta = 0.000000" in text2
    assert "NOT certified" in text2


def test_cmd_gcc_two_disks_reports_reachability(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = two-disks\n" + FAST)
    out = str(tmp_path / "out")
    assert main(["gcc", "--config", cfgpath, "--out", out]) == 0
    text = open(os.path.join(out, "gcc.txt")).read()
    assert "component reachability" in text


def test_cmd_verify(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = cross\n" + FAST
                           + "verify.record_every = 10\n")
    out = str(tmp_path / "out")
    assert main(["verify", "--config", cfgpath, "--out", out]) == 0
    text = open(os.path.join(out, "verify.txt")).read()
    for name in ("mass conservation", "energy ledger identity",
                 "trajectory transfer", "good-set density", "moment bound"):
        assert name in text


def test_cmd_bogovskii(tmp_path):
    cfgpath = write_config(tmp_path, "bogovskii.mesh = 32\nbogovskii.ensemble = 2\n")
    out = str(tmp_path / "out")
    assert main(["bogovskii", "--config", cfgpath, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "divergence.txt"))
    assert os.path.exists(os.path.join(out, "F_x.bin"))


def test_cmd_certificate_uniform(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = uniform\n" + FAST
                           + "certificate.n_random = 3\ncertificate.n_heldout = 2\n"
                           + "certificate.dt = 0.05\n")
    out = str(tmp_path / "out")
    assert main(["certificate", "--config", cfgpath, "--out", out]) == 0
    text = open(os.path.join(out, "certificate.txt")).read()
    assert "validated             : yes" in text


def test_cmd_certificate_band_refuses(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = band\n" + FAST)
    out = str(tmp_path / "out")
    assert main(["certificate", "--config", cfgpath, "--out", out]) == 2
    text = open(os.path.join(out, "certificate.txt")).read()
    assert "no decay certificate" in text


def test_exit_code_config_error(tmp_path):
    cfgpath = write_config(tmp_path, "nonsense.key = 1\n")
    assert main(["simulate", "--config", cfgpath]) == 1


def test_missing_config_file():
    assert main(["simulate", "--config", "/nonexistent/path.cfg"]) == 1


def test_cmd_verify_completed_run_dir(tmp_path):
    cfgpath = write_config(tmp_path, "scenario.preset = cross\n" + FAST)
    run_out = str(tmp_path / "run")
    assert main(["simulate", "--config", cfgpath, "--out", run_out]) == 0
    cfg2 = write_config(tmp_path, "scenario.preset = cross\n" + FAST
                        + f"verify.run_dir = {run_out}\n", "v.cfg")
    out = str(tmp_path / "verify")
    assert main(["verify", "--config", cfg2, "--out", out]) == 0
    text = open(os.path.join(out, "verify.txt")).read()
    assert "energy ledger identity" in text
    assert "skipped: snapshots unavailable" in text
