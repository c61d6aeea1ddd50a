"""Piecewise-linear Ritz projection on non-obtuse tetrahedral meshes and its max-norm stability."""
from .fem import NodalField, ScalarField, interpolate, ritz_project, solve_aux
from .mesh import DomainSpec, TetMesh, audit_non_obtuse, extend_to_box, generate, preset

__all__ = [
    "DomainSpec", "TetMesh", "NodalField", "ScalarField", "audit_non_obtuse",
    "extend_to_box", "generate", "interpolate", "preset", "ritz_project", "solve_aux",
]
__version__ = "0.1.0"
