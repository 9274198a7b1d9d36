"""Acoustic scattering by obstacles embedded in inhomogeneous media: forward solvers,
low-frequency asymptotics and direct-sampling reconstruction."""
from scatter_workbench.errors import WorkbenchError
from scatter_workbench.ForwardSolver import (
    Discretization,
    FarFieldTensor,
    ForwardProblem,
    MediumSpec,
    ScattererConfig,
    far_field,
    generate_dataset,
    solve,
    solve_hard,
    solve_soft,
    solve_soft_logk,
)
from scatter_workbench.Geometry import discretize_boundary, make_curve, make_grid

__all__ = [
    "Discretization",
    "FarFieldTensor",
    "ForwardProblem",
    "MediumSpec",
    "ScattererConfig",
    "WorkbenchError",
    "discretize_boundary",
    "far_field",
    "generate_dataset",
    "make_curve",
    "make_grid",
    "solve",
    "solve_hard",
    "solve_soft",
    "solve_soft_logk",
]
