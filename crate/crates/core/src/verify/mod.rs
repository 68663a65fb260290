//! Monte Carlo verification of the optimality and martingale conditions.
//!
//! The checks here are exact equalities in expectation, so every estimator
//! comes with a standard error and is judged against a 3-standard-error band
//! by default. Common random numbers are used throughout: one seed produces
//! one driver bundle, shared by every wealth integration inside a check, so
//! repeated runs are bitwise identical.

mod audit;
mod gateaux;
mod martingale;
mod qmeasure;

pub use audit::{hypothesis_audit, stability_from_values, AuditEntry, AuditReport, StabilityEstimate};
pub use gateaux::{epsilon_scan, gateaux_derivative, utility_gap, EpsilonScanPoint, GateauxEstimate, UtilityGapEstimate};
pub use martingale::{
    doleans_exponential_values, exponential_jump_identity_check, martingale_diagnostic,
    uprime_wealth_plus_y_values, JumpIdentityReport, MartingaleReport,
};
pub use qmeasure::{q_measure_drift_check, QDriftEstimate};

/// Fraction of paths allowed to be excluded for numeric overflow before an
/// estimate is rejected.
pub(crate) const EXCLUSION_BUDGET: f64 = 1e-4;
