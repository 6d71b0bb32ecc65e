import numpy as np
import pytest
import yaml

from raceline.cli import main
from raceline.pipeline import save_grid

import runs


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_frame_on_circle(tmp_path):
    assert main(["frame", "circle", "--out", str(tmp_path), "--samples", "64"]) == 0
    header, rows = read_csv(tmp_path / "frame.csv")
    assert rows.shape == (64, len(header))
    # the template is a cubic spline through 16 waypoints, so the curvature
    # ripples by about one percent around the exact circle value
    kappa_n = rows[:, header.index("kappa_n")]
    np.testing.assert_allclose(kappa_n, -0.2, rtol=0.02)
    assert np.mean(kappa_n) == pytest.approx(-0.2, rel=1e-3)
    np.testing.assert_allclose(rows[:, header.index("kappa_y")], 0.0, atol=1e-6)


def test_solve_point_mass_curvilinear_circle(tmp_path, capsys):
    argv = ["solve", "circle", "--model", "point-mass", "--formulation", "curvilinear", "--out", str(tmp_path)]
    assert main(argv) == 0
    for name in ("trajectory.csv", "timing.txt", "transcription.txt", "iterations.log", "grid.npz"):
        assert (tmp_path / name).exists()
    timing = dict(line.split(": ") for line in (tmp_path / "timing.txt").read_text().splitlines())
    assert float(timing["lap"]) == pytest.approx(2.530, rel=0.02)
    assert timing["status"] == "converged"
    assert "lap:" in capsys.readouterr().out


def test_solve_is_byte_identical(tmp_path):
    argv = ["solve", "straight", "--model", "point-mass", "--elements", "4"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_corridor_on_pillar_field(tmp_path, capsys):
    assert main(["corridor", "pillar_field", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "corridor.csv")
    assert header == ["s", "y_c", "n_c", "radius", "clearance"]
    assert np.all(rows[:, 3] > 0)
    report = (tmp_path / "corridor_report.txt").read_text()
    assert "violations: 0" in report
    assert (tmp_path / "rings.csv").exists()
    assert report in capsys.readouterr().out


def test_validate_and_report_reuse_a_grid(tmp_path, capsys):
    solve_dir, check_dir = tmp_path / "solve", tmp_path / "check"
    assert main(["solve", "circle", "--model", "point-mass", "--out", str(solve_dir)]) == 0
    grid = str(solve_dir / "grid.npz")
    assert main(["validate", "circle", "--model", "point-mass", "--grid", grid, "--out", str(check_dir)]) == 0
    text = (check_dir / "validation.txt").read_text()
    fields = dict(line.split(": ", 1) for line in text.splitlines())
    assert float(fields["max_position_divergence"]) <= 0.01
    assert float(fields["max_gate_violation"]) <= 0.01
    assert float(fields["max_regularity_margin"]) <= 0.9 + 1e-6
    assert main(["report", "circle", "--model", "point-mass", "--grid", grid, "--out", str(check_dir)]) == 0
    out = capsys.readouterr().out
    assert "reference_lap_times: none supplied" in out


def test_report_compares_supplied_reference(tmp_path, capsys):
    raw = runs.template("circle").to_dict()
    raw["reference_lap_times"] = {"steady_turn": 2.530, "slow": 3.0}
    path = tmp_path / "circle_ref.yaml"
    path.write_text(yaml.safe_dump(raw))
    run = runs.point_mass_run("circle")
    save_grid(tmp_path / "grid.npz", run)
    argv = ["report", str(path), "--model", "point-mass", "--grid", str(tmp_path / "grid.npz"), "--out", str(tmp_path)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "reference steady_turn: 2.530000 delta -0.52% (within 2% soft target)" in out
    assert "reference slow: 3.000000" in out and "(outside 2% soft target)" in out


def test_scenario_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"centerline": {"waypoints": [[0, 0, 0], [1, 0, 0]]}}))
    assert main(["frame", str(bad), "--out", str(tmp_path)]) == 1
    assert "centerline.waypoints" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit) as err:
        main(["fly", "circle"])
    assert err.value.code == 2
