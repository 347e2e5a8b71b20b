"""Grading design on triangular meshes: closed-form projections onto slope,
alignment and drainage constraints, curvature prox operators, and a
Douglas-Rachford product-space solver."""

from .errors import (CollinearTriangle, DanglingIndex, DegeneratePositions, GradeOptError,
                     IterationLimit, NoCandidateFound, NoPositiveRoot, ParseError, ValidationError)
from .mesh import Mesh, PlanarVertex, TriangleFrame, build_mesh, triangle_frame
from .scenario import Scenario, load_scenario, parse_scenario, render_scenario, scenario_terms
from .solver import ProxTerm, SolverConfig, SolverState, cyclic_solve, dr_solve, parallel_solve

__version__ = "0.1.0"
