"""Projection-free online convex optimisation with Online Frank-Wolfe."""

from ._accel import NUMBA_ENABLED
from .baselines import OgdConfig, OnlineGradientDescent, ogd_round, ogd_run
from .cfbench import (
    BenchConfig,
    RatingRecord,
    load_ratings,
    planted_records,
    run_cf_compare,
    save_ratings,
)
from .core import (
    SETTINGS,
    BoundaryAtom,
    CostMetadata,
    RegretTrace,
    Schedule,
    SparseIterate,
    TraceRecord,
    iterate_densify,
    iterate_entry,
    iterate_mix,
    schedule_from_setting,
)
from .costs import (
    Absolute,
    ExpectedCost,
    Linear,
    MatrixEntry,
    Quadratic,
    SmoothingConfig,
    Surrogate,
    cost_metadata,
    make_adversarial_surrogate,
    mc_smoothed_gradient,
    smoothed_value,
)
from .errors import (
    ConfigurationError,
    ContractViolation,
    ConvergenceWarning,
    InfeasibleDomainError,
    InputError,
    NumericError,
    OnlineFWError,
    ParameterError,
    ParseError,
    ShapeError,
    UnsupportedDomainError,
)
from .harness import (
    StreamSpec,
    best_in_hindsight,
    gen_stream,
    loglog_slope,
    read_trace_csv,
    regret_of,
    write_trace_csv,
)
from .ofw import (
    OnlineFrankWolfe,
    RunConfig,
    aggregate_gradient,
    make_aggregate,
    ofw_round,
    run_ofw,
    sample_play,
)
from .oracles import (
    Ball,
    FlowPolytope,
    Simplex,
    TraceNormBall,
    UniformMatroid,
    lmo_ball,
    lmo_flow_dag,
    lmo_simplex,
    lmo_trace_ball,
    lmo_uniform_matroid,
    parse_flow_graph,
    power_iteration_top_pair,
    project_ball,
    project_simplex,
    project_trace_ball,
)

__version__ = "0.1.0"
