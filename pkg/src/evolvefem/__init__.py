"""Finite elements for reaction-diffusion systems on prescribed evolving domains.

Computation happens on the fixed unit square; the physical domain is its
image under a time-dependent map ``A_t``.
"""

from .mesh import ReferenceMesh, build_unit_square_mesh, mesh_for_level, mesh_size, refine_uniform
from .fespace import FESpace, build_space, lagrange_interpolate, quadrature_rule
from .mapping import (
    CustomMapping,
    DomainMapping,
    IdentityMapping,
    LinearPeriodic,
    NonInvertibleMappingError,
    NonlinearPeriodic,
    make_mapping,
    require_invertible,
)
from .linalg import IndefinitenessDetected, NonConvergence, cg_solve
from .assembly import AssemblyContext, assemble_load, assemble_mass, assemble_picard, assemble_stiffness
from .model import Kinetics, ManufacturedProblem, pure_diffusion, schnakenberg, steady_state
from .timestepper import StabilityWarning, StepPlan, SystemState, geometric_margin, integrate, step
from .postproc import eoc, error_H1_ref, error_L2_ref, export_physical_snapshot, trajectory_error
from .experiments import run_convergence, run_simulation
from .timestepper import run
from .config import ConfigError, RunConfig, emit_config, parse_config

__version__ = "0.1.0"
