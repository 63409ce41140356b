"""Space-time Galerkin boundary elements for the acoustic retarded potential
integral equation: smooth partition-of-unity time bases, piecewise Chebyshev
surrogates for the retarded time kernels, regularized tensor-Gauss panel
quadrature, energy-form error measures, and an a posteriori indicator
driving adaptive time-grid refinement."""

from .estimator import adapt_loop, indicator, mark, refine
from .galerkin import (
    BlockSystem,
    GalerkinSolution,
    QuadOrders,
    assemble_matrix,
    assemble_rhs,
    energy_error,
    project_exact,
    refit_to_fine,
    solve,
)
from .geometry import SpatialBasis, SurfaceMesh, classify_pair, load_mesh, make_sphere, make_torus, save_mesh
from .timebasis import TemporalBasis, TimeGrid, build_basis, partition_of_unity
from .timekernel import ChebSurrogate, eval_surrogate, fit_surrogate, sup_error, time_kernel

__all__ = [
    "BlockSystem",
    "ChebSurrogate",
    "GalerkinSolution",
    "QuadOrders",
    "SpatialBasis",
    "SurfaceMesh",
    "TemporalBasis",
    "TimeGrid",
    "adapt_loop",
    "assemble_matrix",
    "assemble_rhs",
    "build_basis",
    "classify_pair",
    "energy_error",
    "eval_surrogate",
    "fit_surrogate",
    "indicator",
    "load_mesh",
    "make_sphere",
    "make_torus",
    "mark",
    "partition_of_unity",
    "project_exact",
    "refine",
    "refit_to_fine",
    "save_mesh",
    "solve",
    "sup_error",
    "time_kernel",
]

__version__ = "0.1.0"
