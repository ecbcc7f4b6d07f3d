//! Lagrangian irrigation plans: multiplicity, ε-good paths, path splitting,
//! approximate weights and costs.

pub mod approx;
pub mod comparison;
pub mod good;
pub mod multiplicity;
pub mod psa;

pub use approx::{
    approx_cost, approx_weights, cost_sides, default_schedule, limit_cost, plan_to_network,
    ApproxOptions, ApproxWeights, CostSides, LimitOutcome, LimitStep, COST_IDENTITY_TOL,
};
pub use comparison::{active_sum, multi_path_comparison, ComparisonReport};
pub use good::{good_paths, MaximalGoodPath};
pub use multiplicity::{check_a2, multiplicity, stopping_time, PlanStructure};
pub use psa::{psa, ElementaryDecomposition, ElementaryPath};
