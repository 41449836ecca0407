"""Free-boundary equilibrium solver and profile reconstruction."""

from ._gsrecon import (
    MU0,
    Basis,
    Error,
    IoError,
    Mesh,
    StiffnessSystem,
    ValidationError,
    analyze,
    load_mesh,
    rectangle_mesh,
    reconstruct,
    run_cli,
    solve_forward,
    solve_normal_equation,
)

__all__ = [
    "MU0",
    "Basis",
    "Error",
    "IoError",
    "Mesh",
    "StiffnessSystem",
    "ValidationError",
    "analyze",
    "boundary_values",
    "load_mesh",
    "rectangle_mesh",
    "reconstruct",
    "run_cli",
    "solve_forward",
    "solve_normal_equation",
]


def boundary_values(mesh, f):
    """Samples f(r, z) at the boundary nodes, in mesh.boundary order."""
    import numpy as np

    nodes = mesh.nodes[mesh.boundary]
    return np.array([f(r, z) for r, z in nodes], dtype=float)
