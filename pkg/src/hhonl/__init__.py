"""Hybrid high-order (HHO) method for nonlinear elliptic problems on polytopal meshes.

The package provides arbitrary-order cell/face polynomial spaces, local
gradient and potential reconstructions with stabilization, a Newton solver
with static condensation, and a convergence-study harness.
"""

from .basis import (BasisDegenerateError, BasisError, CellBasis, FaceBasis,
                    Polynomial, cell_mass_matrix, cell_stiffness_matrix,
                    face_mass_matrix, graded_lex_exponents, l2_project_cell,
                    l2_project_face, space_dimension)
from .harness import (ConvergenceRecord, StudyConfig, StudyResult,
                      convergence_rate, data_directory, gradient_error,
                      run_study, shipped_mesh_files, write_csv)
from .hho import (HHOSpace, HybridVector, LocalOperators, discrete_norm_1h,
                  discrete_norm_1ph, interpolate)
from .mesh import (CellGeometry, FaceGeometry, MeshError, MeshFormatError,
                   MeshInvalidError, PolytopalMesh, compute_geometry,
                   generate_cartesian, generate_triangular, mesh_regularity,
                   mesh_size, quasi_uniformity, read_mesh, write_mesh)
from .quadrature import (QuadratureRule, UnsupportedDegreeError,
                         cell_quadrature, face_quadrature, triangle_rule)
from .solver import (NewtonDivergedError, NewtonReport, NonlinearProblem,
                     SolverError, get_problem, jacobian, mean_curvature_problem,
                     newton_solve, problem_names, register_problem, residual,
                     solve_linear_hho, static_condense)

__version__ = "0.1.0"

__all__ = [
    "BasisDegenerateError", "BasisError", "CellBasis", "FaceBasis",
    "Polynomial", "cell_mass_matrix", "cell_stiffness_matrix",
    "face_mass_matrix", "graded_lex_exponents", "l2_project_cell",
    "l2_project_face", "space_dimension",
    "ConvergenceRecord", "StudyConfig", "StudyResult", "convergence_rate",
    "data_directory", "gradient_error", "run_study", "shipped_mesh_files",
    "write_csv",
    "HHOSpace", "HybridVector", "LocalOperators", "discrete_norm_1h",
    "discrete_norm_1ph", "interpolate",
    "CellGeometry", "FaceGeometry", "MeshError", "MeshFormatError",
    "MeshInvalidError", "PolytopalMesh", "compute_geometry",
    "generate_cartesian", "generate_triangular", "mesh_regularity",
    "mesh_size", "quasi_uniformity", "read_mesh", "write_mesh",
    "QuadratureRule", "UnsupportedDegreeError", "cell_quadrature",
    "face_quadrature", "triangle_rule",
    "NewtonDivergedError", "NewtonReport", "NonlinearProblem", "SolverError",
    "get_problem", "jacobian", "mean_curvature_problem", "newton_solve",
    "problem_names", "register_problem", "residual", "solve_linear_hho",
    "static_condense",
    "__version__",
]
