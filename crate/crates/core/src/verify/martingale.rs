//! Martingale diagnostics: constant-mean checks along checkpoints, the
//! stochastic exponential of the compensated jump martingale, and the exact
//! event-driven multiplicative identity of the exponential pure-investment
//! solution.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bsde::canonical_rate;
use crate::error::Error;
use crate::market::{path_rng, MarketCoefficients, PathBundle, WealthPath};
use crate::stats::mean_and_se;
use crate::utility::UtilityFunction;
use crate::Result;

/// Constant-mean diagnostic over a set of checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub checkpoint_times: Vec<f64>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `max_t |mean_t - mean_0| / SE_t`.
    pub max_standardized_deviation: f64,
}

/// Per-checkpoint sample means of `values[path][checkpoint]` and the largest
/// standardized deviation from the first checkpoint's mean.
pub fn martingale_diagnostic(
    values: &[Vec<f64>],
    checkpoint_times: &[f64],
) -> Result<MartingaleReport> {
    if checkpoint_times.is_empty() {
        return Err(Error::config("martingale diagnostic needs a non-empty checkpoint set"));
    }
    if values.is_empty() || values.iter().any(|row| row.len() != checkpoint_times.len()) {
        return Err(Error::config(
            "martingale diagnostic needs one value per path and checkpoint",
        ));
    }
    if values.iter().any(|row| row.iter().any(|v| !v.is_finite())) {
        return Err(Error::Diagnostic(
            "martingale diagnostic received non-finite values".to_string(),
        ));
    }
    let n_checks = checkpoint_times.len();
    let mut means = Vec::with_capacity(n_checks);
    let mut ses = Vec::with_capacity(n_checks);
    for k in 0..n_checks {
        let col: Vec<f64> = values.iter().map(|row| row[k]).collect();
        let (m, se) = mean_and_se(&col);
        means.push(m);
        ses.push(se);
    }
    let mut max_dev: f64 = 0.0;
    for k in 0..n_checks {
        let diff = (means[k] - means[0]).abs();
        let dev = if ses[k] > 0.0 {
            diff / ses[k]
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_dev = max_dev.max(dev);
    }
    Ok(MartingaleReport {
        checkpoint_times: checkpoint_times.to_vec(),
        means,
        std_errors: ses,
        max_standardized_deviation: max_dev,
    })
}

/// Path values of the stochastic exponential of `-(mu/(eta nu)) . n` at the
/// requested grid checkpoints.
///
/// The exponential is accumulated in log space between jumps with exact
/// multiplicative jump factors: per step,
/// `ln E += m nu dt + dN ln(1 - m)` with `m = mu/(eta nu)` frozen at the
/// step's left endpoint. Its expectation is exactly one at every grid point.
pub fn doleans_exponential_values(
    bundle: &PathBundle,
    coeffs: &MarketCoefficients,
    checkpoints: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let steps = bundle.grid.steps;
    if checkpoints.iter().any(|&c| c > steps) {
        return Err(Error::config("checkpoint outside the grid"));
    }
    for i in 0..steps {
        let t = bundle.grid.t(i);
        let m = coeffs.compensator_ratio_at(t);
        if !(m < 1.0) || !m.is_finite() {
            return Err(Error::domain(format!(
                "stochastic exponential requires mu/(eta nu) < 1, got {m} at t = {t}"
            )));
        }
    }
    let dt = bundle.dt();
    let rows: Vec<Vec<f64>> = (0..bundle.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut row = Vec::with_capacity(checkpoints.len());
            let mut log_e = 0.0f64;
            let mut next = 0usize;
            for i in 0..=steps {
                while next < checkpoints.len() && checkpoints[next] == i {
                    row.push(log_e.exp());
                    next += 1;
                }
                if i < steps {
                    let m = coeffs.compensator_ratio_at(bundle.grid.t(i));
                    log_e += m * coeffs.nu * dt
                        + bundle.dn_count(p, i) as f64 * (1.0 - m).ln();
                }
            }
            row
        })
        .collect();
    Ok(rows)
}

/// Values of `u'(X_t + y_t)` along wealth paths, with a deterministic
/// backward curve `y` on the grid, at the requested checkpoints.
pub fn uprime_wealth_plus_y_values(
    wealth: &WealthPath,
    y_curve: &[f64],
    utility: &UtilityFunction,
    checkpoints: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if y_curve.len() != wealth.grid_points() {
        return Err(Error::config(format!(
            "y curve has {} points but wealth paths have {}",
            y_curve.len(),
            wealth.grid_points()
        )));
    }
    if checkpoints.iter().any(|&c| c >= wealth.grid_points()) {
        return Err(Error::config("checkpoint outside the grid"));
    }
    (0..wealth.n_paths)
        .map(|p| {
            checkpoints
                .iter()
                .map(|&i| utility.du(wealth.at(p, i) + y_curve[i]))
                .collect()
        })
        .collect()
}

/// Result of the event-driven multiplicative identity check for the
/// exponential pure-investment solution.
#[derive(Debug, Clone, Serialize)]
pub struct JumpIdentityReport {
    /// Largest deviation of the per-jump ratio `dV/V_-` from `-m`.
    pub max_jump_ratio_error: f64,
    /// Largest deviation of the inter-event log drift of `V` from
    /// `(mu/eta) dt`.
    pub max_interjump_drift_error: f64,
    pub n_jumps: usize,
    pub n_paths: usize,
}

/// Simulates exact jump times and verifies, event by event, that
/// `V = u'(X) e^A` with the canonical rate jumps by the factor `1 - m` at
/// every jump and grows deterministically at log rate `mu/eta` in between.
/// Both identities are algebraic, so they hold to rounding accuracy.
pub fn exponential_jump_identity_check(
    mu: f64,
    eta: f64,
    nu: f64,
    delta: f64,
    x0: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<JumpIdentityReport> {
    let m = mu / (eta * nu);
    if !(m < 1.0) {
        return Err(Error::domain(format!("requires mu/(eta nu) < 1, got {m}")));
    }
    let rate = canonical_rate(mu, eta, nu)?;
    let pi_star = -((1.0 - m).ln()) / (delta * eta);
    let slope = pi_star * (mu - eta * nu);
    let expected_jump_ratio = -m;
    let expected_drift_rate = mu / eta;

    // log V(t) = ln delta - delta X(t) - rate (T - t)
    let log_v = |x: f64, t: f64| delta.ln() - delta * x - rate * (horizon - t);

    let per_path: Vec<(f64, f64, usize)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut t = 0.0;
            let mut x = x0;
            let mut jump_err: f64 = 0.0;
            let mut drift_err: f64 = 0.0;
            let mut jumps = 0usize;
            loop {
                let u: f64 = rng.random::<f64>();
                let wait = -(1.0 - u).ln() / nu;
                let segment_end = (t + wait).min(horizon);
                // deterministic motion over (t, segment_end]
                let x_next = x + slope * (segment_end - t);
                let observed = log_v(x_next, segment_end) - log_v(x, t);
                let expected = expected_drift_rate * (segment_end - t);
                drift_err = drift_err.max((observed - expected).abs());
                t = segment_end;
                x = x_next;
                if t >= horizon {
                    break;
                }
                // jump at t
                let v_minus = log_v(x, t);
                x += pi_star * eta;
                let ratio = (log_v(x, t) - v_minus).exp() - 1.0;
                jump_err = jump_err.max((ratio - expected_jump_ratio).abs());
                jumps += 1;
            }
            (jump_err, drift_err, jumps)
        })
        .collect();

    let mut report = JumpIdentityReport {
        max_jump_ratio_error: 0.0,
        max_interjump_drift_error: 0.0,
        n_jumps: 0,
        n_paths,
    };
    for (jump_err, drift_err, jumps) in per_path {
        report.max_jump_ratio_error = report.max_jump_ratio_error.max(jump_err);
        report.max_interjump_drift_error = report.max_interjump_drift_error.max(drift_err);
        report.n_jumps += jumps;
    }
    Ok(report)
}
