//! Heterogeneity statistics at the optimum and evaluable convergence bounds.

mod bounds;
mod stats;

pub use bounds::{
    bound_cvx, bound_cvx_curve, bound_cvx_parts, bound_ncvx, bound_ncvx_curve, bound_ncvx_parts, bound_sc,
    bound_small_alpha, check_stepsizes, recommended_stepsizes, BoundCurve, RegimeCheck, StepsizeSuggestion, Theorem,
    MAX_SUGGESTED_ALPHA,
};
pub use stats::{
    heterogeneity_stats, heterogeneity_stats_with, participation_factor, sigma_rad_upper_bound, Dissimilarity,
    HeterogeneityStats, StatsOptions,
};
