import numpy as np
import pytest

from chemoflock import TrajectoryRecord
from chemoflock.cli import main, read_probes_file, read_trajectory_file, write_trajectory_file
from chemoflock.metrics import metrics_csv_header


def test_run_preset_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run1"
    code = main([
        "run", "--preset", "1", "--seed", "42", "--out", str(out),
        "--scale", "4", "--t-end", "1.0", "--snapshot-every", "5",
    ])
    assert code == 0
    text = (out / "metrics.csv").read_text().splitlines()
    assert text[0] == metrics_csv_header()
    assert len(text) > 2
    assert (out / "plots.gp").exists()
    assert "metrics.csv" in capsys.readouterr().out


def test_run_requires_exactly_one_source(tmp_path, capsys):
    assert main(["run"]) == 1
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text("[params]\n")
    assert main(["run", "--preset", "1", "--config", str(cfgfile)]) == 1


def test_run_rejects_unknown_flag():
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--preset", "1", "--frobnicate"])
    assert excinfo.value.code == 2


def test_run_from_config_file(tmp_path):
    from dataclasses import replace
    from chemoflock import preset, scale_config, serialize_config

    cfg = scale_config(preset(5, seed=1), 4.0)
    cfg = replace(cfg, step=replace(cfg.step, t_end=0.5, dt_main=0.05, snapshot_every=5))
    path = tmp_path / "test5.ini"
    path.write_text(serialize_config(cfg))
    out = tmp_path / "outdir"
    assert main(["run", "--config", str(path), "--out", str(out)]) == 0
    assert (out / "metrics.csv").exists()


def test_run_missing_config_file(capsys):
    assert main(["run", "--config", "/nonexistent/nope.ini"]) == 1
    assert "nope.ini" in capsys.readouterr().err


def test_trajectory_file_round_trip(tmp_path):
    traj = TrajectoryRecord(
        times=np.array([0.0, 1.0, 2.5]),
        positions=np.arange(18, dtype=float).reshape(3, 3, 2),
        roles=np.array([1, 0, 1], dtype=np.int8),
    )
    path = str(tmp_path / "traj.txt")
    write_trajectory_file(traj, path)
    back = read_trajectory_file(path)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.positions, traj.positions)
    assert np.array_equal(back.roles, traj.roles)


def test_probes_file_parsing(tmp_path):
    path = tmp_path / "probes.txt"
    path.write_text("# x y t\n6.0 6.0 0.5\n6.5 6.0 1.0\n")
    probes = read_probes_file(str(path))
    assert probes.shape == (2, 3)
    assert probes[1, 2] == 1.0


def test_oracle_compare_end_to_end(tmp_path):
    center = 6.25
    traj = TrajectoryRecord.stationary(np.array([[center, center]]), np.array([1]), 1.0)
    tfile = str(tmp_path / "traj.txt")
    write_trajectory_file(traj, tfile)
    pfile = tmp_path / "probes.txt"
    pfile.write_text("\n".join(
        f"{center + ox} {center + oy} {t}"
        for t in (0.5, 1.0) for ox, oy in ((0.25, 0.0), (0.0, -0.25), (0.25, 0.25))
    ))
    out = str(tmp_path / "cmp.csv")
    code = main([
        "oracle-compare", "--trajectory", tfile, "--probes", str(pfile), "--out", out,
        "--lx", "12.5", "--nx", "50", "--dt", "0.005", "--diffusion", "1.0", "--xi", "0.5",
    ])
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "x,y,t,f_solver,f_oracle,rel_err"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert rows.shape == (6, 6)
    assert np.all(rows[:, 4] > 0)       # oracle values positive near the source
    assert np.all(rows[:, 5] < 0.1)     # coarse grid still within 10%


def test_lyapunov_subcommand(tmp_path, capsys):
    out = str(tmp_path / "lyap.csv")
    code = main(["lyapunov", "--preset", "1", "--tbar", "1.0", "--out", out,
                 "--t-end", "5.0", "--dt", "0.01"])
    assert code == 0
    printed = dict(
        line.split(" = ") for line in capsys.readouterr().out.splitlines() if " = " in line
    )
    for name in ("k1", "k2", "k3"):
        assert float(printed[name]) > 0.0
    assert float(printed["decay_rate"]) > 0.0
    lines = open(out).read().splitlines()
    assert lines[0] == "t,v,x,u,envelope"
    assert len(lines) == 2 + 500


@pytest.mark.slow
def test_run_preset5_shows_dispersion(tmp_path):
    from chemoflock import read_metrics_csv, trend_slope

    out = tmp_path / "t5"
    assert main(["run", "--preset", "5", "--seed", "1", "--out", str(out)]) == 0
    samples = read_metrics_csv(str(out / "metrics.csv"))
    assert trend_slope(samples, "fl_x", 7.5, 15.0) > 0.0
    assert samples[-1].fl_x > samples[0].fl_x


def test_cm_decay_subcommand(tmp_path):
    out = str(tmp_path / "cm.csv")
    code = main(["cm-decay", "--preset", "1", "--v0", "1.0", "--out", out,
                 "--t-end", "20.0", "--dt", "0.02"])
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "t,v_cm"
    vals = np.array([float(line.split(",")[1]) for line in lines[1:]])
    assert vals[0] == 1.0
    assert np.all(np.diff(vals) < 0)
