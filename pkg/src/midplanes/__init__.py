"""Envelopes of mid-hyperplanes of hypersurface pairs.

For two patch points with transversal tangent spaces, the mid-hyperplane
passes through their mid-point and contains the intersection of the tangent
spaces.  This package solves for the envelope of that family, verifies each
envelope point as the center of a conic with contact of order >= 3 at both
points, and tests envelope smoothness via the determinant of the
second-parameter-derivative block of the defining function.
"""

from .affine import AffineMap
from .conics import (
    Conic,
    NormalForm,
    contact_conic,
    normal_form,
    normal_form_surfaces,
    planar_section_jet,
)
from .envelope import (
    EnvelopeSolution,
    MidPlane,
    PairConfiguration,
    build_pair,
    envelope_point,
    envelope_point_linear_oracle,
    mid_plane,
    midplane_value,
    solvability_residual,
)
from .jets import (
    EvaluationDomainError,
    Expression,
    ExpressionSyntaxError,
    Jet,
    UnknownVariableError,
    eval_jet,
    expression,
    parse_expression,
    real_cbrt,
)
from .regularity import (
    RegularityReport,
    SpecialCaseReport,
    delta,
    jg1_closed_form,
    jg1_closed_form_general,
    jg1_numeric,
    regularity_report,
    special_case_report,
)
from .scenarios import Scenario, get_scenario, run_scenario, scenario_library
from .solver import SeedRecord, SolutionSet, SolverConfig, refine_pair, sweep
from .surfaces import (
    AffineSubspace,
    Surface,
    SurfaceJet,
    TransversalFrame,
    TransversalityError,
    blaschke_rescale,
    h_orthogonal_direction,
    surface_jet,
    tangent_intersection,
    transversal_frame,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
