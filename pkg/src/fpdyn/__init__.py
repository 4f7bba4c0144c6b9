"""Exact event-driven simulator and bifurcation toolkit for continuous-time
fictitious play in a one-parameter family of 3x3 bimatrix games."""

from .errors import (
    AmbiguousFlowError,
    ClassificationError,
    DomainError,
    ExistenceError,
    FpdynError,
    InvariantFailure,
    ModelFitError,
    ParameterError,
    SearchError,
    StructuralError,
)
from .game import (
    GOLDEN_MEAN,
    TIE_TOL,
    BestResponseSet,
    BimatrixGame,
    SimplexPoint,
    StateP,
    StateV,
    best_response_set,
    check_transversality,
    game_from_json,
    interior_equilibrium,
    make_shapley,
    utilities,
    zero_sum_certificate,
)
from .geometry import (
    Codim2Case,
    IndifferenceLocus,
    J_LEGS,
    JLeg,
    RegionLabel,
    RestrictedGame2x2,
    T_LEGS,
    TieReport,
    classify_codim2,
    classify_codim2_by_simulation,
    indifference_anchors,
    j_leg_of,
    region_of,
    restricted_game,
)
from .flow import (
    Event,
    Segment,
    SimConfig,
    Trajectory,
    advance,
    itinerary_json,
    j_flow_step,
    p_from_v,
    rho_to_s,
    s_to_rho,
    simulate,
    time_to_next_event,
    trajectory_csv_lines,
    v_from_p,
)
from .orbits import (
    CubicSpec,
    PeriodicOrbitSpec,
    StabilityReport,
    anticlockwise_cubic,
    anticlockwise_orbit,
    clockwise_cubic,
    clockwise_orbit,
    find_tau,
    j_diameter_ratios,
    j_fixed_point,
    j_map_F,
    j_map_derivative_at_zero,
    j_orbit,
    scan_rows,
    stability_matrix,
)
from .returnmap import (
    AttractionReport,
    CYCLE_SECTIONS,
    FirstReturn,
    ProjectiveMap,
    SectionId,
    attraction_check,
    compose,
    first_return,
    projective_from_samples,
    random_state,
)
from .transitions import (
    ANTI_SHAPLEY_PATTERN,
    NAMED_PATTERNS,
    SHAPLEY_PATTERN,
    TransitionDiagram,
    diagram_for,
    pattern_match,
    validate_itinerary,
)

__version__ = "0.1.0"
