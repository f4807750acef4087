"""Enriched hybrid high-order discretisation of the Stokes equations on
curved cut-cell meshes, with closed-form cylinder-flow enrichment."""

from .analytic import CylinderFlow, ManufacturedSolution, stream_zeta1
from .assembly import (
    DiscreteSolution,
    StokesProblem,
    assemble,
    condense_and_solve,
    solve_full,
    uniform_dirichlet,
)
from .experiments import (
    FOUR_CYLINDERS,
    ErrorReport,
    ExperimentConfig,
    emit_table,
    run_test_a,
    run_test_b,
)
from .geometry import Arc, Circle, Segment
from .local_ops import LocalOperators, build_local_operators, elliptic_project, interpolate
from .mesh import Element, Face, Mesh, build_cartesian_cut_mesh, dump_mesh, validate_mesh
from .quadrature import QuadratureRule, adaptive_integrate, element_rule, face_rule
from .spaces import (
    EnrichmentConfig,
    FunctionSpace,
    SpaceFactory,
    curved_face_basis,
    element_poly_basis,
    enrichment_sets,
    prune_dependent,
)

__version__ = "0.1.0"
