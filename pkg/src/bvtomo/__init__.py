"""BV-regularized reconstruction of piecewise-constant conductivities from boundary data."""

__version__ = "0.1.0"

from .functional import ReconConfig, eval_Etilde, eval_J, grad_J  # noqa: E402
from .mesh import TriMesh, build_mesh, generate_disc_mesh, load_triangle_format  # noqa: E402
from .recon import bv_reconstruct, extract_uniform_values, physical_reconstruct  # noqa: E402

__all__ = [
    "ReconConfig", "TriMesh", "build_mesh", "bv_reconstruct", "eval_Etilde", "eval_J",
    "extract_uniform_values", "generate_disc_mesh", "grad_J", "load_triangle_format",
    "physical_reconstruct",
]
