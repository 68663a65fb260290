//! Explicit forward-backward solution for the pure investment problem
//! (zero terminal liability) in the pure-jump model.
//!
//! Given a square-integrable auxiliary rate `a`, the forward wealth follows
//! the explicit allocation
//! `pi_t = (a_t - mu_t/eta_t) / (ARA(X_-) (mu_t - eta_t nu))`
//! and the backward component is reconstructed as
//! `Y_t = (u')^{-1}(u'(X_t) e^{A_t}) - X_t` with `A_t = -integral_t^T a_s ds`.
//! For the exponential family with the canonical rate the solution collapses:
//! the allocation is deterministic, `Y_t = (1/delta) integral_t^T a_s ds`,
//! and `Psi = 0`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Error;
use crate::market::{
    integrate_wealth_recorded, MarketCoefficients, MarketMode, PathBundle, PureInvestmentStrategy,
    TimeGrid, WealthPath,
};
use crate::stats::cumulative_integral_from_right;
use crate::utility::UtilityFunction;
use crate::Result;

/// A deterministic auxiliary rate `t -> a_t`.
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The canonical rate `a = (m + (1-m) ln(1-m)) nu` as a time function of the
/// market coefficients. This is the unique choice that makes
/// `u'(X) e^A` a martingale for the exponential family.
pub fn canonical_rate_fn(coeffs: &MarketCoefficients) -> RateFn {
    let coeffs = coeffs.clone();
    Arc::new(move |t| {
        super::driver::canonical_rate(coeffs.mu_at(t), coeffs.eta_at(t), coeffs.nu)
            .unwrap_or(f64::NAN)
    })
}

/// The explicit pure-investment solution along a path bundle.
#[derive(Debug, Clone)]
pub struct PureInvestmentSolution {
    pub grid: TimeGrid,
    /// Rate values `a(t_i)` at the grid points.
    pub rate: Vec<f64>,
    /// `A_i = -integral_{t_i}^T a_s ds`; `A` at the horizon is exactly zero
    /// and `A_0` is deterministic.
    pub a_integral: Vec<f64>,
    /// Forward wealth paths.
    pub x: WealthPath,
    /// `y[i][path]` at every grid point; the terminal row is zero up to the
    /// inversion tolerance.
    pub y: Vec<Vec<f64>>,
    /// `psi[i][path]` per step, evaluated at left limits.
    pub psi: Vec<Vec<f64>>,
    /// Allocations `pi[i][path]` per step.
    pub pi: Vec<Vec<f64>>,
}

/// Builds the explicit pure-investment solution for rate `a` along `paths`.
pub fn construct_pure_investment(
    coeffs: &MarketCoefficients,
    utility: &UtilityFunction,
    rate: RateFn,
    rate_name: &str,
    paths: &PathBundle,
    x0: f64,
) -> Result<PureInvestmentSolution> {
    if coeffs.mode != MarketMode::PureJump {
        return Err(Error::config(
            "construct_pure_investment requires a pure-jump market configuration",
        ));
    }
    let grid = paths.grid;
    let steps = grid.steps;

    // Degeneracy scan: the allocation divides by mu - eta nu, and the jump
    // reconstruction needs mu/(eta nu) < 1. Both fail together.
    for i in 0..=steps {
        let t = grid.t(i);
        let (mu, eta) = (coeffs.mu_at(t), coeffs.eta_at(t));
        if mu - eta * coeffs.nu == 0.0 {
            return Err(Error::degenerate(format!(
                "pure investment: mu - eta*nu = 0 at t = {t}"
            )));
        }
        if mu / (eta * coeffs.nu) >= 1.0 {
            return Err(Error::domain(format!(
                "pure investment: mu/(eta nu) >= 1 at t = {t}"
            )));
        }
        let a = rate(t);
        if !a.is_finite() {
            return Err(Error::config(format!("auxiliary rate is non-finite at t = {t}")));
        }
    }

    let strategy = PureInvestmentStrategy {
        coeffs: coeffs.clone(),
        utility: utility.clone(),
        rate: rate.clone(),
        rate_name: rate_name.to_string(),
    };
    let (x, pi_by_path) = integrate_wealth_recorded(paths, coeffs, &strategy, x0)?;

    let rate_values: Vec<f64> = (0..=steps).map(|i| rate(grid.t(i))).collect();
    let a_integral: Vec<f64> =
        cumulative_integral_from_right(|t| rate(t), grid.horizon, steps)
            .into_iter()
            .map(|v| -v)
            .collect();

    // y[i][path] and psi[i][path] from the closed-form reconstruction.
    let columns: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..paths.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut y_col = Vec::with_capacity(steps + 1);
            let mut psi_col = Vec::with_capacity(steps);
            for i in 0..=steps {
                let weight = a_integral[i].exp();
                let wealth = x.at(p, i);
                let du = utility.du(wealth)?;
                let x_plus_y = utility.invert_marginal(du * weight)?;
                y_col.push(x_plus_y - wealth);
                if i < steps {
                    let t = grid.t(i);
                    let m = coeffs.compensator_ratio_at(t);
                    let jumped = utility.invert_marginal(du * weight * (1.0 - m))?;
                    let pi = pi_by_path[p][i];
                    psi_col.push(-pi * coeffs.eta_at(t) + jumped - x_plus_y);
                }
            }
            Ok((y_col, psi_col))
        })
        .collect();
    let columns = columns?;

    let mut y = vec![vec![0.0; paths.n_paths]; steps + 1];
    let mut psi = vec![vec![0.0; paths.n_paths]; steps];
    let mut pi = vec![vec![0.0; paths.n_paths]; steps];
    for (p, (y_col, psi_col)) in columns.into_iter().enumerate() {
        for i in 0..=steps {
            y[i][p] = y_col[i];
        }
        for i in 0..steps {
            psi[i][p] = psi_col[i];
            pi[i][p] = pi_by_path[p][i];
        }
    }

    Ok(PureInvestmentSolution { grid, rate: rate_values, a_integral, x, y, psi, pi })
}
