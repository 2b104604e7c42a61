"""Run orchestration: manufactured-solution convergence studies and
long-time simulations driven by a :class:`~evolvefem.config.RunConfig`."""

from __future__ import annotations

import csv
import logging
import math
import os
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import AssemblyContext
from .config import RunConfig
from .fespace import build_space, lagrange_interpolate
from .mapping import make_mapping, require_invertible
from .mesh import mesh_for_level, mesh_size
from .model import ManufacturedProblem, pure_diffusion, schnakenberg, steady_state
from .postproc import ErrorReport, NormEvaluator, export_physical_snapshot, trajectory_error
from .timestepper import SolverOptions, StepPlan, integrate

log = logging.getLogger(__name__)

THREADS_ENV = "EVOLVEFEM_THREADS"


def build_mapping(cfg: RunConfig):
    return make_mapping(cfg.mapping.kind, cfg.mapping.kappa, cfg.mapping.period)


def build_kinetics(cfg: RunConfig):
    k = cfg.kinetics
    if k.model == "none":
        return pure_diffusion((k.d1, k.d2))
    return schnakenberg(k.a, k.b, k.gamma, k.d1, k.d2)


def solver_options(cfg: RunConfig) -> SolverOptions:
    s = cfg.solver
    return SolverOptions(s.tol, s.max_iter, s.preconditioner)


def initial_data(cfg: RunConfig, space, kinetics, problem: ManufacturedProblem | None = None):
    """Nodal initial vectors, shape (m, dof_count)."""
    kind = cfg.initial.kind
    m = kinetics.species_count
    n = space.dof_count
    if kind == "manufactured":
        if problem is None:
            raise ValueError("initial.kind=manufactured needs a manufactured problem")
        return np.stack([lagrange_interpolate(space, lambda x, i=i: problem.exact(i, x, 0.0))
                         for i in range(m)])
    if kind == "constant":
        return np.full((m, n), cfg.initial.value)
    ustar = np.array(steady_state(cfg.kinetics.a, cfg.kinetics.b))
    W = np.repeat(ustar[:, None], n, axis=1)
    if kind == "perturbed_steady":
        rng = np.random.default_rng(cfg.run.seed)
        amp = cfg.initial.amplitude
        W = W + rng.uniform(-amp, amp, size=W.shape)
    return W


# ---------------------------------------------------------------- convergence


def benchmark_plan(h: float, degree: int, final_time: float) -> StepPlan:
    """Uniform step ``tau = h^(degree+1)``, rounded down to divide ``final_time``."""
    return StepPlan.from_mesh_size(h, degree, final_time)


def run_benchmark_level(cfg: RunConfig, level: int) -> dict:
    """Solve the manufactured problem on one refinement level.

    Returns a table row: mesh data, per-species and combined
    L-infinity(L2) errors, the combined L2(H1) error and wall time.
    """
    t0 = _time.perf_counter()
    mesh = mesh_for_level(level)
    h = mesh_size(mesh)
    space = build_space(mesh, cfg.discretization.degree)
    mapping = build_mapping(cfg)
    require_invertible(mapping, cfg.final_time)
    kinetics = build_kinetics(cfg)
    problem = ManufacturedProblem(mapping, kinetics)
    plan = benchmark_plan(h, space.degree, cfg.final_time)
    ctx = AssemblyContext(space, mapping)
    norms = NormEvaluator(space)
    m = kinetics.species_count

    l2, h1 = [], []
    # the exact solution separates, so the spatial part is evaluated once
    prof = problem.profile(norms.rule.points)
    dprof = problem.profile_gradient(norms.rule.points)

    def record(state):
        a = [problem.amplitude(i, state.time) for i in range(m)]
        l2.append([norms.l2_error(state.W[i], a[i] * prof) for i in range(m)])
        h1.append([norms.h1_error(state.W[i], a[i] * dprof) for i in range(m)])

    W0 = np.stack([lagrange_interpolate(space, lambda x, i=i: problem.exact(i, x, 0.0))
                   for i in range(m)])
    integrate(ctx, kinetics, W0, plan, source=problem, solver=solver_options(cfg),
              source_time=cfg.run.source_time, on_step=record)
    err = trajectory_error(l2, h1, [plan.tau] * plan.steps)
    return {
        "level": level,
        "h": h,
        "log2_h": -math.log2(h),
        "dofs": space.dof_count,
        "steps": plan.steps,
        "tau": plan.tau,
        "err_u1": err.linf_l2_species[0],
        "err_u2": err.linf_l2_species[1],
        "err_combined": err.linf_l2,
        "h1_err_combined": err.l2_h1,
        "status": "ok",
        "seconds": _time.perf_counter() - t0,
    }


def _safe_level(args):
    cfg, level = args
    try:
        return run_benchmark_level(cfg, level)
    except Exception as exc:  # reported in the table, remaining levels continue
        log.error("level %d failed: %s", level, exc)
        return {"level": level, "status": f"failed: {exc}"}


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, requested)
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_convergence(cfg: RunConfig, workers: int | None = None) -> ErrorReport:
    """Benchmark every configured level; failed levels are kept as rows with a status."""
    # a degenerate mapping is a configuration error, not a per-level failure
    require_invertible(build_mapping(cfg), cfg.final_time)
    levels = list(cfg.discretization.levels)
    jobs = [(cfg, lv) for lv in levels]
    nw = min(worker_count(workers), len(levels))
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            rows = list(pool.map(_safe_level, jobs))
    else:
        rows = [_safe_level(j) for j in jobs]
    report = ErrorReport(cfg.discretization.degree, cfg.mapping.kind)
    for r in rows:
        report.add(**r)
    return report


# ----------------------------------------------------------------- simulation


def _diag_header(m: int) -> list:
    cols = ["step", "time"]
    for i in range(1, m + 1):
        cols += [f"mass_u{i}", f"min_u{i}", f"max_u{i}", f"cg_iter_u{i}", f"cg_res_u{i}"]
    return cols + ["margin", "bounds_ok"]


def _diag_row(d) -> list:
    row = [d.step, repr(d.time)]
    for i in range(len(d.masses)):
        row += [repr(d.masses[i]), repr(d.mins[i]), repr(d.maxs[i]), d.cg_iterations[i],
                repr(d.cg_residuals[i])]
    return row + [repr(d.margin), int(d.bounds_ok)]


def write_diagnostics(diagnostics: list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = len(diagnostics[0].masses) if diagnostics else 2
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_diag_header(m))
        for d in diagnostics:
            w.writerow(_diag_row(d))
    return path


def read_diagnostics(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class SimulationResult:
    trajectory: object
    space: object
    mapping: object
    snapshots: list = field(default_factory=list)
    diagnostics_path: Path | None = None


def snapshot_steps(times, plan: StepPlan) -> dict:
    """Map each requested time to the nearest step index within the plan."""
    out = {}
    for t in times:
        if t < -1e-12 or t > plan.final_time * (1 + 1e-12):
            raise ValueError(f"snapshot time {t} outside [0, {plan.final_time}]")
        out.setdefault(int(round(t / plan.tau)), t)
    return out


def run_simulation(cfg: RunConfig, write_outputs: bool = True) -> SimulationResult:
    """Integrate the configured system from the configured initial data."""
    level = cfg.discretization.level
    space = build_space(mesh_for_level(level), cfg.discretization.degree)
    mapping = build_mapping(cfg)
    require_invertible(mapping, cfg.final_time)
    kinetics = build_kinetics(cfg)
    plan = StepPlan(cfg.discretization.tau, cfg.final_time)
    ctx = AssemblyContext(space, mapping)
    W0 = initial_data(cfg, space, kinetics)
    out_dir = Path(cfg.output.directory)
    schedule = snapshot_steps(cfg.output.snapshot_times, plan) if write_outputs else {}
    written = []

    def on_step(state):
        if state.step in schedule:
            name = f"{cfg.output.snapshot_prefix}_{state.step:07d}.vtk"
            written.append(export_physical_snapshot(space, mapping, state.time, list(state.W),
                                                    out_dir / name))

    log.info("simulate: level %d, %d dofs, %d steps", level, space.dof_count, plan.steps)
    traj = integrate(
        ctx, kinetics, W0, plan, solver=solver_options(cfg),
        monitor_bounds=(cfg.monitor.lower, cfg.monitor.upper),
        abort_on_bounds=cfg.monitor.abort, on_step=on_step,
    )
    diag_path = write_diagnostics(traj.diagnostics, out_dir / cfg.output.diagnostics) if write_outputs else None
    return SimulationResult(traj, space, mapping, written, diag_path)
