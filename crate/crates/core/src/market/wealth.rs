//! Self-financing wealth integration along simulated driver paths.

use rayon::prelude::*;

use super::{MarketCoefficients, PathBundle, StepState, Strategy};
use crate::error::Error;
use crate::Result;

/// Wealth paths produced by integrating a strategy against a driver bundle.
///
/// `X_0 = x0` on every path and
/// `X_{i+1} = X_i + pi_i (mu_i dt + sigma_i dW_i + eta_i dn_i)` exactly.
#[derive(Debug, Clone)]
pub struct WealthPath {
    pub x0: f64,
    pub strategy_label: String,
    pub n_paths: usize,
    /// `grid.steps + 1` wealth values per path.
    values: Vec<f64>,
    points: usize,
}

impl WealthPath {
    #[inline]
    pub fn at(&self, path: usize, grid_point: usize) -> f64 {
        self.values[path * self.points + grid_point]
    }

    pub fn terminal(&self, path: usize) -> f64 {
        self.at(path, self.points - 1)
    }

    pub fn grid_points(&self) -> usize {
        self.points
    }
}

fn integrate_path(
    bundle: &PathBundle,
    coeffs: &MarketCoefficients,
    strategy: &dyn Strategy,
    x0: f64,
    path: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = bundle.grid.steps;
    let dt = bundle.dt();
    let mut x = Vec::with_capacity(steps + 1);
    let mut pi = Vec::with_capacity(steps);
    let mut wealth = x0;
    let mut jumps: u64 = 0;
    let mut brownian = 0.0;
    x.push(wealth);
    for i in 0..steps {
        let state =
            StepState { step: i, t: bundle.grid.t(i), wealth, jump_count: jumps, brownian };
        let allocation = strategy.value(&state).map_err(|e| Error::StrategyEval {
            path,
            step: i,
            source: Box::new(e),
        })?;
        if !allocation.is_finite() {
            return Err(Error::StrategyEval {
                path,
                step: i,
                source: Box::new(Error::range(format!(
                    "strategy `{}` produced a non-finite allocation",
                    strategy.label()
                ))),
            });
        }
        let t = state.t;
        let ret = coeffs.mu_at(t) * dt
            + coeffs.sigma_at(t) * bundle.dw(path, i)
            + coeffs.eta_at(t) * bundle.dn_compensated(path, i);
        wealth += allocation * ret;
        jumps += bundle.dn_count(path, i) as u64;
        brownian += bundle.dw(path, i);
        x.push(wealth);
        pi.push(allocation);
    }
    Ok((x, pi))
}

/// Integrates the self-financing wealth equation for `strategy` starting at
/// `x0`, returning full paths. Also records the per-step allocations.
pub fn integrate_wealth_recorded(
    bundle: &PathBundle,
    coeffs: &MarketCoefficients,
    strategy: &dyn Strategy,
    x0: f64,
) -> Result<(WealthPath, Vec<Vec<f64>>)> {
    let points = bundle.grid.steps + 1;
    let per_path: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..bundle.n_paths)
        .into_par_iter()
        .map(|p| integrate_path(bundle, coeffs, strategy, x0, p))
        .collect();
    let per_path = per_path?;
    let mut values = Vec::with_capacity(bundle.n_paths * points);
    let mut allocations = Vec::with_capacity(bundle.n_paths);
    for (x, pi) in per_path {
        values.extend_from_slice(&x);
        allocations.push(pi);
    }
    Ok((
        WealthPath {
            x0,
            strategy_label: strategy.label(),
            n_paths: bundle.n_paths,
            values,
            points,
        },
        allocations,
    ))
}

/// Integrates the self-financing wealth equation for `strategy` starting at
/// `x0`.
pub fn integrate_wealth(
    bundle: &PathBundle,
    coeffs: &MarketCoefficients,
    strategy: &dyn Strategy,
    x0: f64,
) -> Result<WealthPath> {
    Ok(integrate_wealth_recorded(bundle, coeffs, strategy, x0)?.0)
}

/// The perturbation wealth `X^{0,h}`: integration of a bounded direction `h`
/// from zero initial capital. The direction must declare a bound, which is
/// checked at evaluation.
pub fn perturbation_wealth(
    bundle: &PathBundle,
    coeffs: &MarketCoefficients,
    direction: &dyn Strategy,
) -> Result<WealthPath> {
    let bound = direction.declared_bound().ok_or_else(|| {
        Error::config(format!(
            "perturbation direction `{}` must declare a uniform bound",
            direction.label()
        ))
    })?;
    let checked = BoundChecked { inner: direction, bound };
    integrate_wealth(bundle, coeffs, &checked, 0.0)
}

struct BoundChecked<'a> {
    inner: &'a dyn Strategy,
    bound: f64,
}

impl Strategy for BoundChecked<'_> {
    fn value(&self, state: &StepState) -> Result<f64> {
        let v = self.inner.value(state)?;
        if v.abs() > self.bound + 1e-12 {
            return Err(Error::range(format!(
                "perturbation direction `{}` exceeded its declared bound {} (value {v})",
                self.inner.label(),
                self.bound
            )));
        }
        Ok(v)
    }

    fn label(&self) -> String {
        self.inner.label()
    }

    fn declared_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}
