"""Locking-free mixed finite elements for Reissner-Mindlin plates."""

from .assembly import PlateModel, assemble, load_vector
from .mesh import (Mesh, load_mesh, neighbor_sets, refine_uniform, save_mesh,
                   unit_square_mesh)
from .solver import solve_condensed, solve_saddle
from .spaces import (build_dof_map, build_modified_multiplier,
                     multiplier_space, rotation_space)

__all__ = [
    "Mesh", "PlateModel", "assemble", "build_dof_map",
    "build_modified_multiplier", "load_mesh", "load_vector",
    "multiplier_space", "neighbor_sets", "refine_uniform", "rotation_space",
    "save_mesh", "solve_condensed", "solve_saddle", "unit_square_mesh",
]

__version__ = "0.1.0"
