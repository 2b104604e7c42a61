from pathlib import Path

import numpy as np
import pytest

from evolvefem.config import parse_config
from evolvefem.experiments import (
    THREADS_ENV,
    initial_data,
    read_diagnostics,
    run_benchmark_level,
    run_convergence,
    run_simulation,
    snapshot_steps,
    worker_count,
)
from evolvefem.fespace import build_space
from evolvefem.mesh import mesh_for_level
from evolvefem.model import schnakenberg
from evolvefem.timestepper import StepPlan, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_worker_count(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(THREADS_ENV, "lots")
    assert worker_count() == 1
    assert worker_count(0) == 1


def test_perturbed_initial_data_is_seeded():
    cfg = parse_config(CONFIGS / "table3.ini")
    sp = build_space(mesh_for_level(2), 1)
    kin = schnakenberg(0.1, 0.9, 0.1, 0.01, 1.0)
    a = initial_data(cfg, sp, kin)
    b = initial_data(cfg, sp, kin)
    assert np.array_equal(a, b)
    assert np.abs(a[0] - 1.0).max() <= 0.01 and np.abs(a[1] - 0.9).max() <= 0.01
    cfg.run.seed = 7
    assert not np.array_equal(a, initial_data(cfg, sp, kin))


def test_snapshot_steps():
    plan = StepPlan(0.01, 2000.0)
    s = snapshot_steps([0, 590, 1000, 1750, 2000], plan)
    assert sorted(s) == [0, 59000, 100000, 175000, 200000]
    with pytest.raises(ValueError, match="outside"):
        snapshot_steps([2500], plan)


def test_benchmark_row_contents():
    cfg = parse_config(CONFIGS / "benchmark_nonlinear_p1.ini")
    row = run_benchmark_level(cfg, 2)
    assert row["status"] == "ok"
    assert row["dofs"] == 25 and row["steps"] == 8
    assert row["err_combined"] >= max(row["err_u1"], row["err_u2"])
    assert row["err_combined"] <= np.hypot(row["err_u1"], row["err_u2"]) + 1e-15


def test_parallel_levels_match_serial():
    cfg = parse_config(CONFIGS / "benchmark_linear_p2.ini", ["discretization.levels=1,2"])
    serial = run_convergence(cfg, workers=1)
    parallel = run_convergence(cfg, workers=2)
    for a, b in zip(serial.rows, parallel.rows):
        assert a["err_combined"] == b["err_combined"]


def test_run_simulation_without_outputs(tmp_path):
    cfg = parse_config(CONFIGS / "pattern_desk.ini", [
        "discretization.level=1", "discretization.final_time=0.1", f"output.directory={tmp_path}"])
    res = run(cfg, write_outputs=False)
    assert res.diagnostics_path is None and res.snapshots == []
    assert not any(tmp_path.iterdir())
    assert len(res.trajectory.diagnostics) == 11


def test_diagnostics_roundtrip(tmp_path):
    cfg = parse_config(CONFIGS / "pattern_desk.ini", [
        "discretization.level=1", "discretization.final_time=0.05", f"output.directory={tmp_path}",
        "output.snapshot_times="])
    res = run_simulation(cfg)
    rows = read_diagnostics(res.diagnostics_path)
    assert len(rows) == 6
    d = res.trajectory.diagnostics[-1]
    assert float(rows[-1]["mass_u2"]) == d.masses[1]
    assert int(rows[-1]["cg_iter_u1"]) == d.cg_iterations[0]
