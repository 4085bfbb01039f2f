import json

import numpy as np
import pytest

from modalloc import matrix_io
from modalloc.cli import main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def header(path):
    return path.read_text().splitlines()[0].split(",")


def test_show_config(capsys):
    assert main(["--show-config"]) == 0
    out = capsys.readouterr().out
    for line in ("lambda", "rho", "ts"):
        assert line in out
    assert "lambda" in out and "= 1.0" in out
    assert "= 100.0" in out and "= 0.02" in out


def test_pipeline_seed_7(workdir):
    assert main(["bench", "--seed", "7"]) == 0
    meta = json.loads((workdir / "metadata.json").read_text())
    assert meta["seed"] == 7
    assert main(["simulate", "--mode", "sparse"]) == 0
    cols = header(workdir / "timeseries.csv")
    assert cols[:2] == ["t", "y1"] and cols[2:8] == [f"v{i}" for i in range(1, 7)]
    assert cols[-1] == "u10"
    assert header(workdir / "metrics.csv") == ["metric", "value"]
    assert main(["prony", "--input", "timeseries.csv"]) == 0
    assert header(workdir / "prony_modes.csv") == ["freq_hz", "damping_pct", "amplitude", "phase"]


def test_reduce_and_modal(workdir):
    assert main(["bench"]) == 0
    assert main(["reduce", "--plot"]) == 0
    assert header(workdir / "hankel.csv") == ["index", "value"]
    red = matrix_io.read_plant(workdir / "reduced")
    assert red.n_states == 6
    assert (workdir / "hankel.svg").read_text().startswith("<svg")
    assert main(["modal"]) == 0
    rows = (workdir / "modes.csv").read_text().splitlines()
    assert len(rows) == 4


def test_allocate_one_shot(workdir, capsys):
    matrix_io.write_matrix(workdir / "e.mtx.txt", [[1.0, 1.0, 1.0]])
    args = ["allocate", "--effectiveness", "e.mtx.txt", "--v", "[0.3]",
            "--set", "lambda=0", "--set", "w_s=0", "--set", "rho=1e6"]
    assert main(args) == 0
    u = [float(x) for x in capsys.readouterr().out.split()]
    assert u == pytest.approx([0.1, 0.1, 0.1], abs=1e-4)
    assert main(args + ["--set", "failures=[[1, 0, 1], [2, 0, 1]]"]) == 0
    u = [float(x) for x in capsys.readouterr().out.split()]
    assert u == pytest.approx([0.3, 0.0, 0.0], abs=1e-4)
    assert main(["allocate", "--effectiveness", "e.mtx.txt", "--v", "[1.0]", "--fixed"]) == 0
    (workdir / "bad.mtx.txt").write_text("1.0 1.0 1.0\n")
    assert main(["allocate", "--effectiveness", "bad.mtx.txt", "--v", "[0.3]"]) == 1


def test_bad_bounds_exit_1(workdir, capsys):
    assert main(["bench"]) == 0
    (workdir / "run.cfg").write_text("u_min = 0.1\n")
    assert main(["simulate", "--config", "run.cfg"]) == 1
    assert "u_min <= 0" in capsys.readouterr().err


def test_unknown_key_named(workdir, capsys):
    (workdir / "run.cfg").write_text("# comment\nlambda = 2\nlamda = 1\n")
    assert main(["simulate", "--config", "run.cfg"]) == 1
    err = capsys.readouterr().err
    assert "'lamda'" in err and "run.cfg:3" in err
    assert main(["simulate", "--set", "bogus=1"]) == 1


def test_usage_errors_exit_2(workdir):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--mode", "maybe"]) == 2


def test_missing_plant_and_feedthrough(workdir, capsys):
    assert main(["simulate"]) == 1
    assert "not found" in capsys.readouterr().err
    assert main(["bench"]) == 0
    matrix_io.write_matrix(workdir / "plant_D.mtx.txt", [[0.0]])
    assert main(["simulate"]) == 1
    assert "feedthrough" in capsys.readouterr().err


def test_dynamic_controller_files(workdir):
    assert main(["bench"]) == 0
    matrix_io.write_matrix(workdir / "ctl_Ak.mtx.txt", [[-1.0]])
    matrix_io.write_matrix(workdir / "ctl_Bk.mtx.txt", [[1.0]])
    matrix_io.write_matrix(workdir / "ctl_Ck.mtx.txt", np.zeros((6, 1)))
    matrix_io.write_matrix(workdir / "ctl_Dk.mtx.txt", np.zeros((6, 1)))
    assert main(["simulate", "--set", "controller=ctl"]) == 0
    matrix_io.write_matrix(workdir / "ctl_Dk.mtx.txt", np.zeros((5, 1)))
    matrix_io.write_matrix(workdir / "ctl_Ck.mtx.txt", np.zeros((5, 1)))
    assert main(["simulate", "--set", "controller=ctl"]) == 1


def test_disturbance_forms(workdir):
    assert main(["bench"]) == 0
    assert main(["simulate", "--set", "disturbance={'cycles': 2}", "--set", "t_end=4"]) == 0
    assert main(["simulate", "--set", "disturbance={'oops': 2}"]) == 1
    assert main(["simulate", "--set", "failures=[[0, 1.0]]"]) == 1


def test_prony_column_selection(workdir):
    t = np.arange(0, 10, 0.02)
    y = np.exp(-0.1 * t) * np.cos(2 * np.pi * 0.564 * t)
    lines = ["time,junk,signal"] + [f"{a:.17g},0,{b:.17g}" for a, b in zip(t, y)]
    (workdir / "ring.csv").write_text("\n".join(lines) + "\n")
    args = ["prony", "--input", "ring.csv", "--column", "signal", "--t-start", "0", "--modes", "1",
            "--set", "prony_decimate=1", "--output", "m.csv"]
    assert main(args) == 0
    first = (workdir / "m.csv").read_text().splitlines()[1].split(",")
    assert float(first[0]) == pytest.approx(0.564, abs=1e-4)
    assert main(["prony", "--input", "ring.csv", "--column", "nope"]) == 1
    assert main(["prony", "--input", "missing.csv"]) == 1


def test_byte_identical_outputs(tmp_path, monkeypatch):
    blobs = []
    for name in ("a", "b"):
        run_dir = tmp_path / name
        run_dir.mkdir()
        monkeypatch.chdir(run_dir)
        assert main(["bench", "--seed", "3"]) == 0
        assert main(["simulate", "--set", "failures=[[1, 2.0, 5.0]]"]) == 0
        assert main(["sweep", "--set", "fractions=[0, 0.5]", "--set", "t_end=6"]) == 0
        assert main(["reduce"]) == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(run_dir.iterdir()) if p.is_file()})
    assert blobs[0] == blobs[1]
    assert "sweep.csv" in blobs[0]
    assert blobs[0]["sweep.csv"].splitlines()[0] == b"failure_pct,sparse_ca,fixed_alloc,no_control"


def test_plots_are_svg(workdir):
    assert main(["bench"]) == 0
    assert main(["simulate", "--plot", "--set", "t_end=4", "--out", "out"]) == 0
    assert (workdir / "out" / "timeseries.svg").read_text().startswith("<svg")
