import json
from pathlib import Path

import numpy as np
import pytest

from vfbns.cli import main
from vfbns.config import parse_config
from vfbns.energetics import CSV_COLUMNS

EQ_CFG = """\
[model]
gamma = 2.0
N = 32
t_end = 2.0
[data]
kind = equilibrium
[schedule]
samples = 9
"""

ILL_CFG = """\
[model]
gamma = 2.0
N = 48
t_end = 1.0
dt_safety = 0.5
[data]
kind = ill_prepared
delta = 0.05
[schedule]
samples = 9
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_equilibrium_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, EQ_CFG)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "config.cfg", "run.csv", "run.png", "summary.json"]

    lines = (out / "run.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    table = np.genfromtxt(out / "run.csv", delimiter=",", skip_header=1)
    assert table.shape == (9, 12)
    assert np.all(table[:, 1] == 0.0)  # E column identically zero

    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdicts"]["equilibrium_preserved"]["passed"] is True
    # config echo re-parses to an identical configuration
    assert parse_config((out / "config.cfg").read_text()) == parse_config(EQ_CFG)

    msgs = capsys.readouterr().out
    assert "PASS equilibrium_preserved" in msgs


def test_run_refuses_to_clobber(tmp_path):
    cfg = write_cfg(tmp_path, EQ_CFG)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert main(["run", "--config", cfg, "--out", str(out)]) == 1
    assert main(["run", "--config", cfg, "--out", str(out), "--overwrite"]) == 0


def test_run_abort_exit_code(tmp_path):
    text = ILL_CFG.replace("dt_safety = 0.5", "dt_safety = 10.0") \
                  + "[integrator]\nmode = explicit_reference\n"
    cfg = write_cfg(tmp_path, text)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 2
    # partial trajectory still written
    assert (out / "run.csv").exists()


def test_usage_errors(tmp_path):
    assert main(["frobnicate"]) == 64
    assert main([]) == 64
    assert main(["run"]) == 64  # missing --config
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 64
    cfg = write_cfg(tmp_path, "[model]\ngamma = 0.5\n")
    assert main(["run", "--config", cfg]) == 64  # config error


def test_sweep_eps_outputs(tmp_path):
    cfg = write_cfg(tmp_path, ILL_CFG)
    out = tmp_path / "s"
    rc = main(["sweep-eps", "--config", cfg, "--eps", "0.4,0.2,0.1",
               "--out", str(out)])
    assert rc == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "0.1", "0.2", "0.4", "summary.json", "sweep.png"]
    assert (out / "0.2" / "run.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["axis"] == "epsilon"
    assert len(summary["values"]) == 3


def test_sweep_eps_needs_axis(tmp_path):
    cfg = write_cfg(tmp_path, ILL_CFG)
    assert main(["sweep-eps", "--config", cfg, "--out", str(tmp_path / "x")]) == 64


def test_sweep_eps_axis_from_config(tmp_path):
    cfg = write_cfg(tmp_path, ILL_CFG + "[experiment]\neps_list = 0.4, 0.2, 0.1\n")
    out = tmp_path / "s"
    assert main(["sweep-eps", "--config", cfg, "--out", str(out)]) == 0


def test_sweep_mesh_outputs(tmp_path):
    cfg = write_cfg(tmp_path, "[model]\ngamma = 2.0\nN = 8\nt_end = 0.25\n"
                              "[schedule]\nsamples = 3\n")
    out = tmp_path / "m"
    rc = main(["sweep-mesh", "--config", cfg, "--mesh", "8,16,32",
               "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["axis"] == "N"
    assert summary["verdicts"]["order_at_least_one"]["passed"] is True


def test_analyze(tmp_path):
    cfg = write_cfg(tmp_path, ILL_CFG)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert main(["analyze", str(out)]) == 0
    dat = (out / "analysis" / "run.dat").read_text().splitlines()
    assert dat[0].startswith("# t E D")
    assert len(dat) == 10  # header + 9 samples
    assert (out / "analysis" / "run.png").exists()
    assert main(["analyze", str(tmp_path / "nowhere")]) == 1
