"""IMEX backward Euler on the reference domain.

Each step solves, per species ``i``::

    (M^n / tau + D_i S^n + gamma N_i^n) W_i^n = M^{n-1} W_i^{n-1} / tau + gamma c_i F^n [+ G_i^n]

with ``N_i^n`` built from the previous state (one Picard sweep) and the
previous mass matrix carried in the state so both time levels use exactly
the same matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import (
    AssemblyContext,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_functional,
    state_at_quadrature,
    weighted_mass_values,
)
from .linalg import cg_solve
from .mapping import DomainMapping
from .model import Kinetics, ManufacturedProblem


class StabilityWarning(UserWarning):
    """The geometric part of the timestep restriction is not satisfied."""


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step: int, time: float):
        super().__init__(f"non-finite values in solution at step {step}, t={time:.6g}")
        self.step = step
        self.time = time


class BoundsViolation(RuntimeError):
    pass


class StepError(RuntimeError):
    """Wraps a solver failure with the step index and time."""

    def __init__(self, step: int, time: float, cause: Exception):
        super().__init__(f"step {step} (t={time:.6g}): {cause}")
        self.step = step
        self.time = time
        self.cause = cause


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 20000
    preconditioner: str = "jacobi"


@dataclass
class StepPlan:
    tau: float
    final_time: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        n = self.final_time / self.tau
        if abs(n - round(n)) > 1e-8 * max(1.0, n):
            raise ValueError(f"final time {self.final_time} is not a multiple of tau {self.tau}")

    @property
    def steps(self) -> int:
        return int(round(self.final_time / self.tau))

    def time(self, n: int) -> float:
        return self.final_time * n / self.steps

    @classmethod
    def from_mesh_size(cls, h: float, degree: int, final_time: float) -> "StepPlan":
        """``tau = h^(degree+1)`` rounded down so that T/tau is an integer."""
        n = math.ceil(final_time / h ** (degree + 1) - 1e-9)
        return cls(final_time / n, final_time)


@dataclass
class StepDiagnostics:
    step: int
    time: float
    masses: list
    mins: list
    maxs: list
    cg_iterations: list
    cg_residuals: list
    margin: float
    bounds_ok: bool = True


@dataclass
class SystemState:
    step: int
    time: float
    W: np.ndarray  # (m, ndof)
    mass: object = field(default=None, repr=False)  # weighted mass matrix at ``time``
    diagnostics: Optional[StepDiagnostics] = None


def geometric_margin(mapping: DomainMapping, t_prev: float, t_next: float, points=None) -> float:
    """``1 - sup(J(t_prev)/J(t_next)) / 2`` over sample points of the reference square."""
    if points is None:
        s = np.linspace(0.0, 1.0, 41)
        X, Y = np.meshgrid(s, s)
        points = np.column_stack([X.ravel(), Y.ravel()])
    ratio = mapping.det(points, t_prev) / mapping.det(points, t_next)
    margin = 1.0 - 0.5 * float(np.max(ratio))
    if margin <= 0:
        warnings.warn(
            f"geometric stability margin {margin:.3g} <= 0 on [{t_prev:.6g}, {t_next:.6g}]",
            StabilityWarning,
            stacklevel=2,
        )
    return margin


def picard_matrices(ctx: AssemblyContext, t: float, W: np.ndarray, kinetics: Kinetics) -> list:
    r = ctx.high
    J = ctx.det(r, t)
    F = kinetics.F(state_at_quadrature(ctx, W, r))
    return [weighted_mass_values(ctx, r, -J * F[i]) for i in range(kinetics.species_count)]


class _StiffnessCache:
    def __init__(self):
        self.values = None

    def get(self, ctx: AssemblyContext, t: float):
        if ctx.mapping.b_time_independent and self.values is not None:
            return self.values
        S = assemble_stiffness(ctx, t)
        if ctx.mapping.b_time_independent:
            self.values = S
        return S


def initial_state(ctx: AssemblyContext, W0, t0: float = 0.0) -> SystemState:
    W = np.atleast_2d(np.array(W0, dtype=float))
    if W.shape[1] != ctx.n:
        raise ValueError(f"initial vectors have length {W.shape[1]}, expected {ctx.n}")
    return SystemState(0, t0, W, assemble_mass(ctx, t0))


def step(
    state: SystemState,
    tau: float,
    ctx: AssemblyContext,
    kinetics: Kinetics,
    source: Optional[ManufacturedProblem] = None,
    solver: SolverOptions = SolverOptions(),
    source_time: str = "current",
    monitor_bounds: tuple = (-math.inf, math.inf),
    _stiffness: Optional[_StiffnessCache] = None,
) -> SystemState:
    """Advance one IMEX step from ``state.time`` to ``state.time + tau``."""
    n = state.step + 1
    t = state.time + tau
    t_prev = state.time
    M_prev = state.mass if state.mass is not None else assemble_mass(ctx, t_prev)
    M = assemble_mass(ctx, t)
    S = (_stiffness or _StiffnessCache()).get(ctx, t)
    gamma = kinetics.gamma
    F = assemble_load(ctx, t) if gamma != 0 else None
    N = picard_matrices(ctx, t, state.W, kinetics) if gamma != 0 else None

    m = kinetics.species_count
    G = None
    if source is not None:
        ts = t if source_time == "current" else t_prev
        G = assemble_weighted_functional(ctx, t, lambda X: source.source_all(X, ts))
    W = np.empty_like(state.W)
    iters, resids = [], []
    for i in range(m):
        values = M.data / tau + kinetics.diffusion[i] * S.data
        if N is not None:
            values = values + gamma * N[i]
        A = ctx.pattern.matrix(values)
        rhs = M_prev @ state.W[i] / tau
        if gamma != 0 and kinetics.constants[i] != 0:
            rhs += gamma * kinetics.constants[i] * F
        if G is not None:
            rhs += G[i]
        try:
            res = cg_solve(A, rhs, tol=solver.tol, max_iter=solver.max_iter,
                           precond=solver.preconditioner, x0=state.W[i])
        except (ArithmeticError, RuntimeError) as exc:
            raise StepError(n, t, exc) from exc
        W[i] = res.x
        iters.append(res.iterations)
        resids.append(res.residual)

    if not np.all(np.isfinite(W)):
        raise NonFiniteStateError(n, t)
    mins = W.min(axis=1).tolist()
    maxs = W.max(axis=1).tolist()
    lo, hi = monitor_bounds
    diag = StepDiagnostics(
        step=n,
        time=t,
        masses=(M @ W.T).sum(axis=0).tolist(),
        mins=mins,
        maxs=maxs,
        cg_iterations=iters,
        cg_residuals=resids,
        margin=geometric_margin(ctx.mapping, t_prev, t, ctx.low.points.reshape(-1, 2)),
        bounds_ok=bool(min(mins) >= lo and max(maxs) <= hi),
    )
    return SystemState(n, t, W, M, diag)


def initial_diagnostics(state: SystemState, monitor_bounds=(-math.inf, math.inf)) -> StepDiagnostics:
    W = state.W
    mins, maxs = W.min(axis=1).tolist(), W.max(axis=1).tolist()
    return StepDiagnostics(
        step=0, time=state.time, masses=(state.mass @ W.T).sum(axis=0).tolist(),
        mins=mins, maxs=maxs, cg_iterations=[0] * len(W), cg_residuals=[0.0] * len(W),
        margin=math.nan,
        bounds_ok=bool(min(mins) >= monitor_bounds[0] and max(maxs) <= monitor_bounds[1]),
    )


@dataclass
class Trajectory:
    diagnostics: list
    final: SystemState
    bounds_violations: list = field(default_factory=list)


def integrate(
    ctx: AssemblyContext,
    kinetics: Kinetics,
    W0,
    plan: StepPlan,
    source: Optional[ManufacturedProblem] = None,
    solver: SolverOptions = SolverOptions(),
    source_time: str = "current",
    monitor_bounds: tuple = (-math.inf, math.inf),
    abort_on_bounds: bool = False,
    on_step: Optional[Callable[[SystemState], None]] = None,
) -> Trajectory:
    """Run ``plan.steps`` IMEX steps from ``W0`` at t=0.

    ``on_step`` is called with the initial state and after every step.
    """
    state = initial_state(ctx, W0, 0.0)
    state.diagnostics = initial_diagnostics(state, monitor_bounds)
    diags = [state.diagnostics]
    violations = [] if state.diagnostics.bounds_ok else [0]
    if on_step is not None:
        on_step(state)
    stiff = _StiffnessCache()
    N = plan.steps
    for n in range(1, N + 1):
        tau = plan.time(n) - plan.time(n - 1)
        state = step(state, tau, ctx, kinetics, source, solver, source_time, monitor_bounds, stiff)
        # pin the clock to the plan to avoid drift in accumulated sums
        state.time = plan.time(n)
        state.diagnostics.time = state.time
        diags.append(state.diagnostics)
        if not state.diagnostics.bounds_ok:
            violations.append(n)
            if abort_on_bounds:
                raise BoundsViolation(
                    f"nodal values left [{monitor_bounds[0]}, {monitor_bounds[1]}] at step {n}, "
                    f"t={state.time:.6g}: min {min(state.diagnostics.mins):.4g}, "
                    f"max {max(state.diagnostics.maxs):.4g}"
                )
        if on_step is not None:
            on_step(state)
    return Trajectory(diags, state, violations)


def run(config, write_outputs: bool = True):
    """Run the simulation described by a :class:`~evolvefem.config.RunConfig`."""
    from .experiments import run_simulation

    return run_simulation(config, write_outputs=write_outputs)
