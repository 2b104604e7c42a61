"""Fast invariant checks and independent finite-difference oracles.

The oracles only use ``mapping.position`` and ``problem.exact`` values, so
they share no code with the closed-form geometry and source evaluators they
are compared against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import (
    AssemblyContext,
    assemble_mass,
    assemble_physical,
    assemble_picard,
    assemble_picard_displayed,
    assemble_stiffness,
)
from .fespace import build_space
from .mapping import DomainMapping, NonInvertibleMappingError, domain_area, min_det
from .mesh import mesh_for_level
from .model import ManufacturedProblem, pure_diffusion, schnakenberg, steady_state
from .timestepper import StabilityWarning, StepPlan, integrate

# sixth-order centred first-derivative stencil on offsets -3..3
_OFFSETS = np.array([-3, -2, -1, 1, 2, 3])
_COEFFS = np.array([-1 / 60, 3 / 20, -3 / 4, 3 / 4, -3 / 20, 1 / 60])


def fd_derivative(f, x, h: float):
    """Sixth-order centred difference of ``f`` at ``x`` (any array shape)."""
    return sum(c * f(x + k * h) for k, c in zip(_OFFSETS, _COEFFS)) / h


def fd_jacobian(mapping: DomainMapping, xi, t, h: float = 1e-3) -> np.ndarray:
    """``d A_t / d xi`` from position values, shape (..., 2, 2)."""
    xi = np.asarray(xi, dtype=float)
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        cols.append(fd_derivative(lambda s: mapping.position(xi + s[..., None] * e, t),
                                  np.zeros(xi.shape[:-1]), h))
    return np.stack(cols, axis=-1)


def fd_velocity(mapping: DomainMapping, xi, t, h: float = 1e-4) -> np.ndarray:
    return fd_derivative(lambda s: mapping.position(xi, s), t, h)


def _det(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def fd_dilution(mapping: DomainMapping, xi, t, h: float = 1e-4) -> np.ndarray:
    """``d_t J / J`` with J itself from finite differences of the position."""
    J = _det(fd_jacobian(mapping, xi, t))
    return fd_derivative(lambda s: _det(fd_jacobian(mapping, xi, s)), t, h) / J


def fd_velocity_divergence(mapping: DomainMapping, xi, t, h: float = 1e-3) -> np.ndarray:
    """Physical divergence of the velocity, ``tr(d_xi v K)``."""
    xi = np.asarray(xi, dtype=float)
    dv = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        dv.append(fd_derivative(lambda s: fd_velocity(mapping, xi + s[..., None] * e, t),
                                np.zeros(xi.shape[:-1]), h))
    dv = np.stack(dv, axis=-1)  # (..., 2, 2): d v_i / d xi_j
    K = np.linalg.inv(fd_jacobian(mapping, xi, t))
    return np.einsum("...ij,...ji->...", dv, K)


def fd_source_residual(problem: ManufacturedProblem, i: int, xi, t: float,
                       h: float = 1e-3, ht: float = 1e-4) -> np.ndarray:
    """Strong-form residual of the exact solution, all derivatives by finite differences.

    ``d_t u + u d_tJ/J - (D_i/J) div(B grad u) - f_i(u)`` with
    ``B = J K K^T`` and K from the finite-difference Jacobian.
    """
    xi = np.asarray(xi, dtype=float)
    m = problem.mapping
    u = lambda x, s=t: problem.exact(i, x, s)  # noqa: E731

    def grad(x):
        return np.stack([
            fd_derivative(lambda s: u(x + s[..., None] * np.array([1.0, 0.0])), np.zeros(x.shape[:-1]), h),
            fd_derivative(lambda s: u(x + s[..., None] * np.array([0.0, 1.0])), np.zeros(x.shape[:-1]), h),
        ], axis=-1)

    def flux(x):
        jac = fd_jacobian(m, x, t, h)
        K = np.linalg.inv(jac)
        B = _det(jac)[..., None, None] * np.einsum("...ik,...jk->...ij", K, K)
        return np.einsum("...ij,...j->...i", B, grad(x))

    div = sum(
        fd_derivative(lambda s, j=j: flux(xi + s[..., None] * np.eye(2)[j])[..., j],
                      np.zeros(xi.shape[:-1]), h)
        for j in range(2)
    )
    J = _det(fd_jacobian(m, xi, t, h))
    dtu = fd_derivative(lambda s: u(xi, s), t, ht)
    state = np.stack([problem.exact(k, xi, t) for k in range(problem.kinetics.species_count)])
    return (dtu + u(xi) * fd_dilution(m, xi, t, ht)
            - problem.kinetics.diffusion[i] / J * div - problem.kinetics.f(state)[i])


# ------------------------------------------------------------------- checks


@dataclass
class CheckResult:
    name: str
    status: str  # "pass", "fail" or "info"
    detail: str

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def check_invertible(mapping: DomainMapping, final_time: float, samples: int = 201) -> CheckResult:
    d, t = min_det(mapping, final_time, samples)
    return CheckResult("mapping: det J > 0", "pass" if d > 0 else "fail",
                       f"min det J = {d:.3e} at t = {t:.4g}")


def check_geometry_fd(mapping: DomainMapping, final_time: float, n: int = 50, seed: int = 0,
                      tol: float = 1e-6) -> list:
    """Closed-form Jacobian, velocity and dilution against finite differences."""
    rng = np.random.default_rng(seed)
    xi = rng.uniform(0.0, 1.0, size=(n, 2))
    ts = rng.uniform(0.0, final_time, size=n)
    errs = {"jacobian": 0.0, "velocity": 0.0, "dilution": 0.0, "dtJ = J div(a)": 0.0}
    try:
        for x, t in zip(xi, ts):
            g = mapping.geometry(x[None], t)
            errs["jacobian"] = max(errs["jacobian"], _rel(g.jac, fd_jacobian(mapping, x[None], t)))
            errs["velocity"] = max(errs["velocity"], _rel(g.velocity, fd_velocity(mapping, x[None], t)))
            errs["dilution"] = max(errs["dilution"], _rel(g.dilution, fd_dilution(mapping, x[None], t)))
            lhs = mapping.dt_det(x[None], t)
            rhs = g.det * fd_velocity_divergence(mapping, x[None], t)
            errs["dtJ = J div(a)"] = max(errs["dtJ = J div(a)"], _rel(lhs, rhs))
    except NonInvertibleMappingError as exc:
        return [CheckResult("mapping: finite-difference geometry", "fail", str(exc))]
    return [CheckResult(f"mapping: {k} vs finite differences", "pass" if v <= tol else "fail",
                        f"max rel err {v:.2e} (tol {tol:g})") for k, v in errs.items()]


def check_assembly(ctx: AssemblyContext, t: float) -> list:
    M = assemble_mass(ctx, t)
    S = assemble_stiffness(ctx, t)
    one = np.ones(ctx.n)
    area = domain_area(ctx.mapping, t)
    mass_err = abs(one @ (M @ one) - area) / area
    s_err = float(np.abs(S @ one).max() / max(1.0, abs(S).max()))
    asym = max(float(abs(M - M.T).max()), float(abs(S - S.T).max()))
    return [
        CheckResult("assembly: 1^T M 1 = |Omega_t|", "pass" if mass_err <= 1e-12 else "fail",
                    f"rel err {mass_err:.2e}"),
        CheckResult("assembly: S 1 = 0", "pass" if s_err <= 1e-12 else "fail", f"max |S 1| {s_err:.2e}"),
        CheckResult("assembly: symmetry", "pass" if asym <= 1e-14 else "fail", f"max |A - A^T| {asym:.2e}"),
    ]


def matrix_equivalence_error(space, mapping: DomainMapping, t: float) -> float:
    """Max entrywise gap between weighted reference and pushed-forward matrices."""
    ctx = AssemblyContext(space, mapping)
    M, S = assemble_mass(ctx, t), assemble_stiffness(ctx, t)
    Mp, Sp = assemble_physical(space, mapping, t)
    return max(float(abs(M - Mp).max()), float(abs(S - Sp).max()))


def check_equivalence(space, mapping: DomainMapping, times) -> CheckResult:
    if mapping.kind not in ("identity", "linear_periodic"):
        return CheckResult("assembly: weighted = pushed-forward", "info",
                           f"skipped: {mapping.kind} is not affine in space")
    err = max(matrix_equivalence_error(space, mapping, t) for t in times)
    return CheckResult("assembly: weighted = pushed-forward", "pass" if err <= 1e-12 else "fail",
                       f"max entry gap {err:.2e}")


def mass_drift(space, mapping: DomainMapping, steps: int, tau: float, tol: float = 1e-12,
               seed: int = 0) -> float:
    """Relative drift of ``1^T M^n W^n`` for zero kinetics from random data."""
    ctx = AssemblyContext(space, mapping)
    kin = pure_diffusion((0.01, 1.0))
    W0 = 1.0 + np.random.default_rng(seed).uniform(-0.5, 0.5, size=(2, space.dof_count))
    from .timestepper import SolverOptions

    traj = integrate(ctx, kin, W0, StepPlan(tau, steps * tau), solver=SolverOptions(tol=tol))
    m = np.array([d.masses for d in traj.diagnostics])
    return float(np.max(np.abs(m - m[0]) / np.abs(m[0])))


def check_source_oracle(problem: ManufacturedProblem, final_time: float, n: int = 200,
                        seed: int = 0, tol: float = 1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    xi = rng.uniform(0.0, 1.0, size=(n, 2))
    ts = rng.uniform(0.0, final_time, size=n)
    err = 0.0
    for i in range(2):
        for x, t in zip(xi, ts):
            err = max(err, float(np.abs(problem.source(i, x[None], t) - fd_source_residual(problem, i, x[None], t)).max()))
    return CheckResult(f"model: source vs finite-difference residual ({problem.mapping.kind})",
                       "pass" if err <= tol else "fail", f"max abs err {err:.2e} (tol {tol:g})")


def picard_discrepancy(space, mapping: DomainMapping, state, kinetics, t: float) -> float:
    """Relative gap between the first Picard matrix as typeset (U2^2) and the
    form consistent with the kinetics (``-(U1 U2 - 1)``)."""
    ctx = AssemblyContext(space, mapping)
    N1 = assemble_picard(ctx, t, 0, state, kinetics)
    D1 = assemble_picard_displayed(ctx, t, state)
    return float(abs(N1 - D1).max() / max(abs(N1).max(), 1e-300))


def run_checks(cfg) -> list:
    """The fast invariant suite for one configuration."""
    from .experiments import build_mapping

    mapping = build_mapping(cfg)
    T = cfg.final_time
    results = [check_invertible(mapping, T)]
    if not results[0].passed:
        return results
    results += check_geometry_fd(mapping, T)
    space = build_space(mesh_for_level(2), cfg.discretization.degree)
    ctx = AssemblyContext(space, mapping)
    for t in (0.0, 0.37 * T):
        results += check_assembly(ctx, t)
    results.append(check_equivalence(build_space(mesh_for_level(2), 1), mapping, (0.1 * T, 0.5 * T, 0.9 * T)))
    tau = T / 100
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        drift = mass_drift(build_space(mesh_for_level(2), 1), mapping, 20, tau)
    results.append(CheckResult("timestepper: zero-kinetics mass conservation",
                               "pass" if drift <= 1e-8 else "fail", f"rel drift {drift:.2e} over 20 steps"))
    k = cfg.kinetics
    if k.model == "schnakenberg":
        kin = schnakenberg(k.a, k.b, k.gamma, k.d1, k.d2)
        results.append(check_source_oracle(ManufacturedProblem(mapping, kin), T, n=50))
        if cfg.run.strict_picard:
            rng = np.random.default_rng(cfg.run.seed)
            ustar = np.array(steady_state(k.a, k.b))
            state = ustar[:, None] + 0.1 * rng.uniform(-1, 1, size=(2, space.dof_count))
            gap = picard_discrepancy(space, mapping, state, kin, 0.5 * T)
            results.append(CheckResult(
                "model: typeset N1 (U2^2) vs kinetics-consistent N1", "info",
                f"relative gap {gap:.3e}; the solver uses the kinetics-consistent form"))
    return results


def format_report(results: list) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{r.status.upper():4s}  {r.name:<{width}}  {r.detail}" for r in results]
    nfail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - nfail}/{len(results)} checks passed" if nfail
                 else f"all {len(results)} checks passed")
    return "\n".join(lines)
