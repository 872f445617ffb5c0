//! Multi-species BGK relaxation with velocity-dependent collision frequencies.
//!
//! Target distributions are exponentials `exp(m (l0 + l1 . v + l2 |v|^2))`
//! chosen to minimize a frequency-weighted entropy under the conservation
//! constraints of each collision type. They are computed by Newton's method on
//! a strictly convex dual, then used to relax a space-homogeneous mixture.

pub mod diagnostics;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod kinetics;

pub use dual::{
    dual_eval, mixed_dual_eval, solve_mixed_target, solve_single_target, weighted_entropy,
    DualEvaluation, NewtonConfig, SolveReport,
};
pub use error::{BgkError, Result};
pub use grid::{auto_bounds, Vec3, VelocityGrid};
pub use kinetics::{
    eval_exp_lambda, eval_frequency, lambda_from_macros, macros_from_lambda, macroscopic_moments,
    maxwellian, mixed_moment_vector, weighted_moments, Distribution, FrequencyField,
    FrequencyModel, Macros, MaxwellianParams, MixedMomentVector6, MixedMultipliers,
    MomentVector5, Multipliers, Species,
};
