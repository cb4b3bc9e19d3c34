"""Fast Neumann Poisson solver on triangular meshes via loop-tree decomposition."""

from .assembly import ProblemSpec
from .decomposition import FieldCoeffs
from .krylov import IterSettings
from .mesh import TriMesh, generate_structured_square, read_triangle
from .pipeline import evaluate_potential, solve_poisson

__all__ = [
    "FieldCoeffs",
    "IterSettings",
    "ProblemSpec",
    "TriMesh",
    "evaluate_potential",
    "generate_structured_square",
    "read_triangle",
    "solve_poisson",
]
__version__ = "0.1.0"
