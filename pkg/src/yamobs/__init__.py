"""Boundary obstacle operator and trace-quotient minimization for the
conformal Laplacian / conformal Robin pair on desk-scale instances."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .bubbles import BubbleParams, bubble_field, sharp_constant, verify_bubble
from .core import (
    BoundaryStructure,
    EnergyForm,
    PositiveField,
    boundary_norm,
    pair,
    pullback_form,
    push_field,
)
from .errors import (
    AssemblyError,
    DomainError,
    IllConditionedError,
    InputError,
    SolverError,
)
from .fem import MetricData, SimplicialMesh, assemble, build_ball_mesh, curvature_residual
from .obstacle import (
    LowerBound,
    ObstacleSolution,
    is_fixed_point,
    make_bound,
    oracle_enumerate,
    solve_obstacle,
)
from .quotients import (
    MinimizeOptions,
    MinimizeTrace,
    QuotientReport,
    composed_equality_gap,
    control_quotient,
    deficit_control,
    deficit_energy,
    energy_quotient,
    grad_check,
    minimize,
    quotient_gradient,
)

__all__ = [
    "AssemblyError",
    "BoundaryStructure",
    "BubbleParams",
    "DomainError",
    "EnergyForm",
    "IllConditionedError",
    "InputError",
    "KERNEL_BACKEND",
    "LowerBound",
    "MetricData",
    "MinimizeOptions",
    "MinimizeTrace",
    "ObstacleSolution",
    "PositiveField",
    "QuotientReport",
    "SimplicialMesh",
    "SolverError",
    "assemble",
    "boundary_norm",
    "bubble_field",
    "build_ball_mesh",
    "composed_equality_gap",
    "control_quotient",
    "curvature_residual",
    "deficit_control",
    "deficit_energy",
    "energy_quotient",
    "grad_check",
    "is_fixed_point",
    "make_bound",
    "minimize",
    "oracle_enumerate",
    "pair",
    "pullback_form",
    "push_field",
    "quotient_gradient",
    "sharp_constant",
    "solve_obstacle",
    "verify_bubble",
]
