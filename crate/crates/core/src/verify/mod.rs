//! Executable checks of the analytic results.
//!
//! Every check returns a [`VerificationReport`] with named measured values,
//! named bounds (each tagged with the statement it comes from) and a margin;
//! `passed` means `margin >= -tolerance`. Bounds are evaluated from their
//! closed forms at runtime in [`constants`]. [`Suite`] runs the checks with
//! pinned grids and seeds, caching the shared trajectories.

pub mod constants;
mod flow;
mod identities;
mod jko_checks;
mod report;
mod suite;

pub use flow::{
    check_entropy_decay, check_epsilon_contraction, check_jm_quadrature, check_l1_convergence,
    check_momentum_bound, check_momentum_positivity, check_pure_diffusion_equality, check_stability,
    check_stationarity, dissipation_mismatch,
};
pub use identities::{
    check_ckp, check_lambda_convexity, check_momentum_continuity, check_relation_one, check_sphere_identities,
};
pub use jko_checks::{check_jko_consistency, check_optimal_map};
pub use report::{Bound, Status, VerificationReport};
pub use suite::{reports_to_json, run_all, Criterion, Suite, SuiteConfig, CRITERIA};
