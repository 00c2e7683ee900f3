"""Total variation flow on finite weighted graphs."""

from .errors import (
    AntisymmetryViolated,
    DataNotOrdered,
    DimensionTooLarge,
    DisconnectedGraph,
    GridMismatch,
    InadmissibleTestFunction,
    IntervalOutOfRange,
    InvalidOrder,
    InvalidParameter,
    MaxIterationsExceeded,
    NonpositiveParameter,
    ParseError,
    RingViolation,
    SupportViolation,
    TvflowError,
    UnknownVertex,
    ValidationError,
)
from .relax import (
    AdmissibleFunction,
    RelaxConfig,
    SolverReport,
    check_admissible,
    datum_extension,
    evaluate_energy,
    interval_weights,
    minimality_residual,
    minimize_energy,
    random_admissible,
)
from .reference import (
    Trajectory,
    brute_force_min,
    minimizing_movements,
    rof_step,
    two_point_analytic,
)
from .space import (
    Ball,
    Domain,
    MetricMeasureSpace,
    ball,
    build_space,
    doubling_constant,
    poincare_ratio,
)
from .timefn import (
    MollifiedFunction,
    SpaceTimeFunction,
    TimeGrid,
    k_norm,
    mollify,
    mollify_ode_residual,
    time_derivative,
)
from .tv import (
    Derivation,
    TVValue,
    VertexFunction,
    divergence,
    dual_total_variation,
    pairing,
    sign_field,
    total_variation,
)

__version__ = "0.1.0"
