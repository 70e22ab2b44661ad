"""Weak Galerkin Poisson solver on polytopal meshes with a P_{k+2}
polynomial lifting post-processor and convergence-rate studies."""

from .mesh import (PolytopalMesh, SimplicialDecomposition, decompose_cell,
                   export_mesh, generate_mixed_polygon_mesh,
                   generate_quad_mesh, generate_wedge_mesh, load_mesh)
from .polybasis import WgFunction, project_cell, project_face, project_Qh
from .quadrature import QuadratureRule, cell_rule, face_rule, simplex_rule
from .weakgrad import LambdaBasis, build_lambda_basis, weak_gradient
from .solver import GlobalSystem, assemble, local_stiffness, solve
from .lifting import (LiftOperator, LiftedField, build_lift_operator,
                      energy_of_lift, lift)
from .study import (ConvergenceReport, StudyConfig, error_h1_broken,
                    error_l2, error_triple_bar, run_study)
from .cli import main, parse_config

__version__ = "0.1.0"
