import numpy as np
import pytest

from stackelberg_control.__main__ import main
from stackelberg_control.main import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER
from stackelberg_control.store import read_csv

SMALL = """
[discretization]
n_x = 12
n_t = 16

[follower]
target1_1 = 0.5

[solver]
n_directions = 4
n_samples = 3
eps_pen = 1e-4
"""


def _config(tmp_path, extra="", name="problem.cfg"):
    path = tmp_path / name
    path.write_text(SMALL + extra, encoding="utf-8")
    return str(path)


def _manifest(directory):
    return dict(read_csv(directory / "manifest.csv")[1:])


def test_simulate_zero_profile_stays_zero(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, "[initial]\nprofile = zero\n")
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "x", "y1", "y2"]
    assert len(rows) == 1 + 17 * 14
    assert all(float(r[2]) == 0.0 and float(r[3]) == 0.0 for r in rows[1:])
    assert _manifest(out)["status"] == "ok"


def test_simulate_physical_coordinate(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", _config(tmp_path), "--out", str(out), "--physical"]) == EXIT_OK
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "x", "x_phys", "y1", "y2"]
    t, x, x_phys = (float(v) for v in rows[-2][:3])
    assert t == 1.0
    assert x_phys == pytest.approx(x * 1.2)


def test_simulate_with_nash_writes_follower_fields(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", _config(tmp_path), "--out", str(out), "--with-nash"]) == EXIT_OK
    assert read_csv(out / "controls.csv")[0] == ["t", "x", "v1", "v2"]
    assert read_csv(out / "adjoint.csv")[0] == ["t", "x", "p1_1", "p1_2", "p2_1", "p2_2"]
    summary = dict(read_csv(out / "summary.csv")[1:])
    assert summary["with_nash"] == "true"


def test_runs_are_byte_identical_apart_from_the_manifest(tmp_path):
    cfg = _config(tmp_path)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["nash", "--config", cfg, "--out", str(first), "--seed", "5"]) == EXIT_OK
    assert main(["nash", "--config", cfg, "--out", str(second), "--seed", "5"]) == EXIT_OK
    names = sorted(p.name for p in first.iterdir() if p.name != "manifest.csv")
    assert names == sorted(p.name for p in second.iterdir() if p.name != "manifest.csv")
    assert "convexity.csv" in names and "nash_summary.csv" in names
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    assert _manifest(first)["seed"] == "5"


def test_check_weights_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["check-weights", "--config", _config(tmp_path), "--out", str(out)]) == EXIT_OK
    for name in ("weights.csv", "constants.csv", "failures.csv", "hypotheses.csv"):
        assert (out / name).exists()
    assert float(_manifest(out)["lambda0"]) >= 1.0


def test_control_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["control", "--config", _config(tmp_path), "--out", str(out)]) == EXIT_OK
    summary = dict(read_csv(out / "control_summary.csv")[1:])
    assert float(summary["terminal_norm"]) < float(summary["initial_norm"])
    assert summary["converged"] == "true"
    assert read_csv(out / "controls.csv")[0] == ["t", "x", "h", "v1", "v2"]
    phi = [float(r[1]) for r in read_csv(out / "phi_history.csv")[1:]]
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(phi, phi[1:]))


def test_observability_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["observability", "--config", _config(tmp_path), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "observability.csv")
    assert rows[0] == ["sample_id", "lhs", "rhs", "ratio", "combined_1_T", "combined_2_T"]
    assert len(rows) == 4
    assert np.isfinite(float(dict(read_csv(out / "observability_summary.csv")[1:])["max_ratio"]))


def test_sweep_over_follower_cost(tmp_path):
    out = tmp_path / "sweep"
    extra = "[sweep]\ncommand = simulate\nparameter = follower.mu1\nvalues = 10, 100, 1000\n"
    assert main(["sweep", "--config", _config(tmp_path, extra), "--out", str(out), "--threads", "2"]) == EXIT_OK
    members = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert members == ["run_000_10", "run_001_100", "run_002_1000"]
    rows = read_csv(out / "aggregate.csv")
    header = rows[0]
    assert header[:4] == ["index", "value", "directory", "status"]
    assert [r[header.index("status")] for r in rows[1:]] == ["ok", "ok", "ok"]
    assert "mu1 = 1000" in (out / "run_002_1000" / "config_echo.txt").read_text()


def test_bad_config_exits_with_config_code(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, "[coefficient]\nalpha = 1.5\n")
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_CONFIG
    manifest = _manifest(out)
    assert manifest["status"] == "failed"
    assert manifest["command"] == "simulate"
    assert "alpha" in manifest["error"]
    assert (out / "error.txt").read_text().startswith("ConfigError")
    assert "alpha = 1.5" in (out / "config_echo.txt").read_text()


def test_unreadable_config_still_leaves_a_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", str(out)]) == EXIT_CONFIG
    assert _manifest(out)["status"] == "failed"
    assert "cannot read config" in (out / "error.txt").read_text()


def test_unconverged_nash_exits_with_solver_code(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, "max_outer = 1\n")
    assert main(["nash", "--config", cfg, "--out", str(out)]) == EXIT_SOLVER
    assert (out / "error.txt").read_text().startswith("SolverError")
    assert (out / "nash_summary.csv").exists()
    manifest = _manifest(out)
    assert manifest["status"] == "failed"
    assert "did not converge" in manifest["error"]
