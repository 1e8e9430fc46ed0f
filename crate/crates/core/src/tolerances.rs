//! Numerical thresholds shared across the crate. Every threshold that can
//! influence a verdict is listed here and echoed into reports.

use serde::Serialize;

/// Metrics whose 1-norm condition number exceeds this are treated as degenerate.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative tolerance of the causal classifier, scaled by the squared Euclidean norm.
pub const CAUSAL_REL: f64 = 1e-10;
/// Transport convergence threshold on the max-norm change under step halving.
pub const TRANSPORT_TOL: f64 = 1e-8;
/// Smallest admissible integration step for transports.
pub const TRANSPORT_STEP_FLOOR: f64 = 1e-6;
/// Fixed-subspace cut, relative to `max(sigma_max, 1)`.
pub const FIXED_REL: f64 = 1e-6;
/// Sign threshold for the metric restricted to the fixed subspace.
pub const GRAM_SIGN: f64 = 1e-8;
/// Path-independence residual certifying a numerically parallel field.
pub const PARALLEL_RESIDUAL: f64 = 1e-5;
/// Speed above which a geodesic with vanishing step is declared to blow up.
pub const BLOWUP_SPEED: f64 = 1e9;
/// Step below which a fast geodesic is declared to blow up.
pub const BLOWUP_STEP: f64 = 1e-12;
/// Rank cut for the holonomy algebra, relative to the largest singular value.
pub const ALGEBRA_REL: f64 = 1e-6;
/// Absolute noise floor for the holonomy algebra rank (ten transport tolerances).
pub const ALGEBRA_ABS: f64 = 1e-7;
/// Generators farther than this from the identity (max-norm) get no logarithm.
pub const LOG_RADIUS: f64 = 0.5;
/// Pointwise null-curvature spread threshold, relative to `1 + |mean|`.
pub const POINTWISE_REL: f64 = 1e-6;
/// Unit-timelike check of a flip field.
pub const UNIT_TIMELIKE: f64 = 1e-8;
/// Finite-difference step for the flip-metric connection.
pub const FLIP_FD_STEP: f64 = 1e-4;
/// Compact-support decision threshold.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Totally-geodesic slice check on the normal Christoffel components.
pub const TOTALLY_GEODESIC: f64 = 1e-8;
/// Identification isometry check.
pub const ISOMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct ToleranceTable {
    pub max_condition: f64,
    pub causal_rel: f64,
    pub transport_tol: f64,
    pub transport_step_floor: f64,
    pub fixed_rel: f64,
    pub gram_sign: f64,
    pub parallel_residual: f64,
    pub blowup_speed: f64,
    pub blowup_step: f64,
    pub algebra_rel: f64,
    pub algebra_abs: f64,
    pub log_radius: f64,
    pub pointwise_rel: f64,
    pub unit_timelike: f64,
    pub flip_fd_step: f64,
    pub support_tol: f64,
    pub totally_geodesic: f64,
    pub isometry_tol: f64,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        ToleranceTable {
            max_condition: MAX_CONDITION,
            causal_rel: CAUSAL_REL,
            transport_tol: TRANSPORT_TOL,
            transport_step_floor: TRANSPORT_STEP_FLOOR,
            fixed_rel: FIXED_REL,
            gram_sign: GRAM_SIGN,
            parallel_residual: PARALLEL_RESIDUAL,
            blowup_speed: BLOWUP_SPEED,
            blowup_step: BLOWUP_STEP,
            algebra_rel: ALGEBRA_REL,
            algebra_abs: ALGEBRA_ABS,
            log_radius: LOG_RADIUS,
            pointwise_rel: POINTWISE_REL,
            unit_timelike: UNIT_TIMELIKE,
            flip_fd_step: FLIP_FD_STEP,
            support_tol: SUPPORT_TOL,
            totally_geodesic: TOTALLY_GEODESIC,
            isometry_tol: ISOMETRY_TOL,
        }
    }
}
