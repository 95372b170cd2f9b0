import subprocess
import sys

import pytest

from dampwave.cli import main

BLOW_UP = """\
domain = 0, 1, 0, 1
nx = 4
ny = 4
alpha_kind = constant
alpha_value = 1
semilinear = cubic
u0 = 1000*sin(pi*x)*sin(pi*y)
u1 = 0
k = 0.5
T = 20
"""


def test_run_preset(tmp_path, capsys):
    assert main(["run", "example1", "--N", "4,8", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "example1_table.csv" in out and "experiment example1" in out
    assert (tmp_path / "example1_decay_N8.csv").exists()


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert all(f"example{i}" in out for i in range(1, 8))


@pytest.mark.parametrize("argv", [
    ["run", "example99"],
    ["run", "example1", "--T", "0"],
    ["run", "example1", "--T", "-1"],
    ["run", "example1", "--k", "0"],
    ["run", "example1", "--delta", "-2"],
    ["run", "example2", "--alpha", "5", "--N", "4"],
    ["run", "example7", "--delta", "2", "--beta", "1"],
])
def test_usage_errors_exit_1(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["run"], ["run", "example1", "--N", "a,b"],
                                  ["run", "example1", "--bogus"], ["frobnicate"],
                                  ["run", "example1", "--window", "1,0"]])
def test_argument_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_bad_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(BLOW_UP.replace("k = 0.5\n", ""))
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 1
    assert "'k'" in capsys.readouterr().err


def test_numerical_failure_exits_2(tmp_path, capsys):
    cfg = tmp_path / "blow.cfg"
    cfg.write_text(BLOW_UP)
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_overrides_reach_the_run(tmp_path, capsys):
    assert main(["run", "example7", "--N", "4", "--delta", "5", "--T", "0.5",
                 "--window", "0.1,0.5", "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "example7_summary.txt").read_text()
    assert "alpha 40.0" in summary and "beta 335.0" in summary


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dampwave", "run", "example1", "--N", "4",
                           "--T", "0.1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "dampwave", "run", "example1", "--T", "0"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 1
