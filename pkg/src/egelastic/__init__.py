"""Locking-free enriched Galerkin solver for linear elasticity.

The discrete space pairs a continuous piecewise-linear vector field with
one constant per facet that corrects its normal trace; weak gradient and
divergence operators defined through facet data replace the classical
derivatives, and a parameter-free facet penalty ties the two parts
together.  The formulation stays accurate as the material approaches
incompressibility (no volumetric locking) without any tuning parameter.
"""

from .analysis import (ErrorReport, ExactSolution, LShapeParams,
                       commutativity_residual, convergence_rates,
                       discrete_norms, error_norms, linear_solution,
                       lshape_solution, smooth2d_solution, smooth3d_solution,
                       von_mises)
from .assembly import (ConfigurationError, ProblemSpec, SparseSystem,
                       apply_dirichlet, assemble_load, assemble_matrix,
                       assemble_system, lame_from_young_poisson)
from .mesh import (DIRICHLET, INTERIOR, NEUMANN, Mesh, build_cook_mesh,
                   build_lshape_mesh, build_unit_cube_mesh,
                   build_unit_square_mesh, dump_mesh, refine_red)
from .solver import SolveReport, SolverError, min_ritz_value, solve_spd
from .space import (DofMap, EGFunction, build_dof_map, interpolate_exact,
                    lift_cg, zero_function)
from .weakops import (ElementKernels, element_kernels, local_system,
                      weak_divergence, weak_gradient, weak_strain, weak_stress)

__version__ = "0.1.0"
