"""Ultra-weak DPG solver for the scaled circular-arch model."""

from .assembly import (
    DiscretizationConfig,
    ElementSystem,
    EnrichmentError,
    GlobalSystem,
    UncoveredBcWarning,
    assemble_global,
    condense,
    element_b_matrix,
    element_load,
    element_system,
    gram_graph,
    gram_standard,
)
from .core import (
    ArchConfig,
    ArchParameters,
    BcPair,
    BoundaryKind,
    KernelField,
    Mesh,
    StabilityReport,
    eigen_bounds,
    extremal_kernel_direction,
    kernel_evaluate,
    kernel_l2_norms,
    mirror_problem,
    stability_constants,
    trace_norm_gamma,
    trace_norm_minimal_extension,
)
from .fem import FemSolution, FemSolveError, fem_energy, fem_l2_errors, fem_solve
from .loads import Expr, LoadSpec, PointLoad, TrigTerm
from .oracle import ManufacturedCase, ReferenceSolution, make_manufactured, solve_reference
from .basis import Basis, QuadratureRule, basis, project_l2, quad_rule
from .solver import (
    ConvergenceReport,
    ErrorTable,
    FieldSolution,
    Solution,
    SolveError,
    convergence_study,
    l2_errors,
    solve,
)

__version__ = "0.1.0"
