//! Numerical checks of the covering, approximation and concentration
//! inequalities behind the error bounds.

mod bounds;
mod covering;
mod inequalities;

pub use bounds::{
    check_approximation_bound, check_composition_covering, check_instance_approximation,
    check_instance_approximation_with, check_instance_covering, check_instance_covering_with,
    default_delta_grid, generate_instance, AnalyticHead, ApproximationCheck, CoveringCheck,
    VerifyInstance, HOLDER_CHECK_PAIRS, HOLDER_RTOL, INSTANCE_CLASS_CAP,
};
pub use covering::{
    covering_number, covering_size, function_class_metric, halton_probes, CoverMode, CoverResult,
    MetricPointSet, BALL_RTOL, EXHAUSTIVE_CAP, TRIANGLE_TOL,
};
pub use inequalities::{
    bound_consistency_report, check_quadratic_implication, maximal_inequality_bound,
    mc_maximal_inequality, quadratic_conclusion, quadratic_search, ConsistencyInput,
    ConsistencyReport, MaximalInequality, QuadraticSearch, GAMMA_GRID_POINTS,
};
