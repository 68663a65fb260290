//! Change-of-measure drift check.
//!
//! Under the measure with density proportional to `u'(X_T^{pi*} + H)`, the
//! cumulative return integrated against any admissible strategy difference
//! is driftless. The check reweights path-wise terminal-wealth differences
//! (which equal the strategy-difference integral exactly) and also reports
//! the unweighted mean, which serves as the negative control when the drift
//! is non-zero.

use serde::Serialize;

use crate::error::Error;
use crate::liability::TerminalLiability;
use crate::market::{integrate_wealth, simulate_paths, MarketCoefficients, Strategy, TimeGrid};
use crate::stats::mean_and_se;
use crate::utility::UtilityFunction;
use crate::Result;

/// Weighted and unweighted drift estimates for one test strategy.
#[derive(Debug, Clone, Serialize)]
pub struct QDriftEstimate {
    pub strategy: String,
    /// Mean of `w_p D_p` with weights normalized to unit mean.
    pub weighted_mean: f64,
    pub weighted_se: f64,
    /// Plain mean of `D_p` (the physical-measure negative control).
    pub unweighted_mean: f64,
    pub unweighted_se: f64,
    /// Effective sample size `n mean(w)^2 / mean(w^2)`.
    pub effective_sample_size: f64,
}

/// Runs the weighted drift check of the optimal strategy `pi_star` against
/// each test strategy, under common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn q_measure_drift_check(
    pi_star: &dyn Strategy,
    utility: &UtilityFunction,
    liability: &TerminalLiability,
    coeffs: &MarketCoefficients,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    x0: f64,
    test_strategies: &[&dyn Strategy],
) -> Result<Vec<QDriftEstimate>> {
    let bundle = simulate_paths(coeffs, grid, n_paths, seed)?;
    let star = integrate_wealth(&bundle, coeffs, pi_star, x0)?;
    let weights_raw: Result<Vec<f64>> = (0..n_paths)
        .map(|p| {
            let h = liability.value(bundle.terminal_jump_count(p), bundle.terminal_brownian(p));
            utility.du(star.terminal(p) + h)
        })
        .collect();
    let weights_raw = weights_raw?;
    let mean_weight = crate::stats::mean(&weights_raw);
    let weights: Vec<f64> = weights_raw.iter().map(|w| w / mean_weight).collect();

    let mean_w2 = crate::stats::mean(&weights.iter().map(|w| w * w).collect::<Vec<_>>());
    let ess = n_paths as f64 / mean_w2;
    if ess < 0.01 * n_paths as f64 {
        return Err(Error::Diagnostic(format!(
            "weight degeneracy: effective sample size {ess:.1} below 1% of {n_paths}"
        )));
    }

    let mut out = Vec::with_capacity(test_strategies.len());
    for strategy in test_strategies {
        let test = integrate_wealth(&bundle, coeffs, *strategy, x0)?;
        // X_T^pi - X_T^{pi*} equals the integral of (pi - pi*) against the
        // return increments, path by path.
        let diffs: Vec<f64> = (0..n_paths).map(|p| test.terminal(p) - star.terminal(p)).collect();
        let weighted: Vec<f64> = diffs.iter().zip(&weights).map(|(d, w)| d * w).collect();
        let (weighted_mean, weighted_se) = mean_and_se(&weighted);
        let (unweighted_mean, unweighted_se) = mean_and_se(&diffs);
        out.push(QDriftEstimate {
            strategy: strategy.label(),
            weighted_mean,
            weighted_se,
            unweighted_mean,
            unweighted_se,
            effective_sample_size: ess,
        });
    }
    Ok(out)
}
