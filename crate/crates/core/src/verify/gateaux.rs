//! First-order-condition and utility-dominance estimators.

use serde::Serialize;

use super::EXCLUSION_BUDGET;
use crate::error::Error;
use crate::liability::TerminalLiability;
use crate::market::{
    integrate_wealth, perturbation_wealth, simulate_paths, MarketCoefficients, PathBundle,
    ShiftedStrategy, Strategy, TimeGrid,
};
use crate::stats::mean_and_se;
use crate::utility::UtilityFunction;
use crate::Result;

/// Monte Carlo estimate of the directional derivative
/// `E[u'(X_T + H) X_T^{0,h}]`.
#[derive(Debug, Clone, Serialize)]
pub struct GateauxEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths entering the estimate after overflow exclusion.
    pub n_paths: usize,
    pub excluded: usize,
    pub strategy: String,
    pub direction: String,
}

/// CRN estimate of `E[U(X_T^a + H)] - E[U(X_T^b + H)]`.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityGapEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub excluded: usize,
    pub strategy_a: String,
    pub strategy_b: String,
}

/// One point of a common-random-number epsilon scan.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonScanPoint {
    pub epsilon: f64,
    pub mean_utility: f64,
    pub std_error: f64,
}

fn terminal_liabilities(bundle: &PathBundle, liability: &TerminalLiability) -> Vec<f64> {
    (0..bundle.n_paths)
        .map(|p| liability.value(bundle.terminal_jump_count(p), bundle.terminal_brownian(p)))
        .collect()
}

fn check_exclusions(excluded: usize, total: usize) -> Result<()> {
    if (excluded as f64) > EXCLUSION_BUDGET * total as f64 {
        return Err(Error::Diagnostic(format!(
            "{excluded} of {total} paths overflowed the utility evaluation \
             (budget {:.4}%)",
            100.0 * EXCLUSION_BUDGET
        )));
    }
    Ok(())
}

/// Estimates the directional derivative of the expected utility at
/// `strategy` in direction `h`, using the same driver bundle for both wealth
/// integrations.
///
/// Paths on which the marginal utility overflows are excluded and counted;
/// exceeding the 0.01% budget fails the run.
#[allow(clippy::too_many_arguments)]
pub fn gateaux_derivative(
    strategy: &dyn Strategy,
    direction: &dyn Strategy,
    utility: &UtilityFunction,
    liability: &TerminalLiability,
    coeffs: &MarketCoefficients,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    x0: f64,
) -> Result<GateauxEstimate> {
    let bundle = simulate_paths(coeffs, grid, n_paths, seed)?;
    let wealth = integrate_wealth(&bundle, coeffs, strategy, x0)?;
    let perturbation = perturbation_wealth(&bundle, coeffs, direction)?;
    let h_values = terminal_liabilities(&bundle, liability);

    let mut values = Vec::with_capacity(n_paths);
    let mut excluded = 0usize;
    for p in 0..n_paths {
        match utility.du(wealth.terminal(p) + h_values[p]) {
            Ok(du) => values.push(du * perturbation.terminal(p)),
            Err(Error::NumericalRange(_)) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    check_exclusions(excluded, n_paths)?;
    let (mean, std_error) = mean_and_se(&values);
    Ok(GateauxEstimate {
        mean,
        std_error,
        n_paths: values.len(),
        excluded,
        strategy: strategy.label(),
        direction: direction.label(),
    })
}

/// CRN estimate of the expected-utility gap between two strategies, with
/// per-path differencing for variance reduction.
#[allow(clippy::too_many_arguments)]
pub fn utility_gap(
    strategy_a: &dyn Strategy,
    strategy_b: &dyn Strategy,
    utility: &UtilityFunction,
    liability: &TerminalLiability,
    coeffs: &MarketCoefficients,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    x0: f64,
) -> Result<UtilityGapEstimate> {
    let bundle = simulate_paths(coeffs, grid, n_paths, seed)?;
    let wealth_a = integrate_wealth(&bundle, coeffs, strategy_a, x0)?;
    let wealth_b = integrate_wealth(&bundle, coeffs, strategy_b, x0)?;
    let h_values = terminal_liabilities(&bundle, liability);

    let mut diffs = Vec::with_capacity(n_paths);
    let mut excluded = 0usize;
    for p in 0..n_paths {
        let a = utility.evaluate(wealth_a.terminal(p) + h_values[p]);
        let b = utility.evaluate(wealth_b.terminal(p) + h_values[p]);
        match (a, b) {
            (Ok(a), Ok(b)) => diffs.push(a.u - b.u),
            (Err(Error::NumericalRange(_)), _) | (_, Err(Error::NumericalRange(_))) => {
                excluded += 1
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    check_exclusions(excluded, n_paths)?;
    let (mean, std_error) = mean_and_se(&diffs);
    Ok(UtilityGapEstimate {
        mean,
        std_error,
        n_paths: diffs.len(),
        excluded,
        strategy_a: strategy_a.label(),
        strategy_b: strategy_b.label(),
    })
}

/// Evaluates `E[U(X_T^{base + eps h} + H)]` over a grid of `eps` under
/// common random numbers. Paths excluded for overflow at any scan point are
/// dropped from every point, so the scan stays comparable.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_scan(
    base: std::sync::Arc<dyn Strategy>,
    direction: std::sync::Arc<dyn Strategy>,
    epsilons: &[f64],
    utility: &UtilityFunction,
    liability: &TerminalLiability,
    coeffs: &MarketCoefficients,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    x0: f64,
) -> Result<Vec<EpsilonScanPoint>> {
    let bundle = simulate_paths(coeffs, grid, n_paths, seed)?;
    let h_values = terminal_liabilities(&bundle, liability);

    let mut per_eps: Vec<Vec<Option<f64>>> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let shifted = ShiftedStrategy {
            base: base.clone(),
            direction: direction.clone(),
            epsilon: eps,
        };
        let wealth = integrate_wealth(&bundle, coeffs, &shifted, x0)?;
        let mut col = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            match utility.evaluate(wealth.terminal(p) + h_values[p]) {
                Ok(v) => col.push(Some(v.u)),
                Err(Error::NumericalRange(_)) => col.push(None),
                Err(e) => return Err(e),
            }
        }
        per_eps.push(col);
    }
    let included: Vec<usize> = (0..n_paths)
        .filter(|&p| per_eps.iter().all(|col| col[p].is_some()))
        .collect();
    check_exclusions(n_paths - included.len(), n_paths)?;

    let mut out = Vec::with_capacity(epsilons.len());
    for (k, &eps) in epsilons.iter().enumerate() {
        let values: Vec<f64> = included.iter().map(|&p| per_eps[k][p].unwrap()).collect();
        let (mean_utility, std_error) = mean_and_se(&values);
        out.push(EpsilonScanPoint { epsilon: eps, mean_utility, std_error });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::market::{ConstantStrategy, ZeroStrategy};
    use crate::optimality::exponential_pure_jump_strategy;

    fn reference() -> (MarketCoefficients, TimeGrid, UtilityFunction) {
        (
            MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0),
            TimeGrid::new(1.0, 50).unwrap(),
            UtilityFunction::exponential(1.0).unwrap(),
        )
    }

    #[test]
    fn zero_direction_is_exactly_zero() {
        let (coeffs, grid, utility) = reference();
        let est = gateaux_derivative(
            &ConstantStrategy(0.3),
            &ZeroStrategy,
            &utility,
            &TerminalLiability::Zero,
            &coeffs,
            &grid,
            500,
            3,
            1.0,
        )
        .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn zero_strategy_gateaux_matches_analytic_value() {
        // pi = 0, H = 0, h = 1, eta = 0: u'(x0) is constant so the estimate
        // targets delta e^{-delta x0} mu T exactly.
        let coeffs = MarketCoefficients::constant_diffusive(0.05, 0.2, 0.0, 0.0, 1.0);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let utility = UtilityFunction::exponential(1.0).unwrap();
        let est = gateaux_derivative(
            &ZeroStrategy,
            &ConstantStrategy(1.0),
            &utility,
            &TerminalLiability::Zero,
            &coeffs,
            &grid,
            20_000,
            7,
            1.0,
        )
        .unwrap();
        let exact = (-1.0f64).exp() * 0.05;
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.std_error,
            "mean {} vs exact {exact} (se {})",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn derivative_vanishes_at_the_optimum() {
        let (coeffs, grid, utility) = reference();
        let pi_star = exponential_pure_jump_strategy(0.0, 0.1, 0.5, 1.0, 1.0).unwrap();
        let est = gateaux_derivative(
            &ConstantStrategy(pi_star),
            &ConstantStrategy(1.0),
            &utility,
            &TerminalLiability::Zero,
            &coeffs,
            &grid,
            20_000,
            7,
            1.0,
        )
        .unwrap();
        assert!(est.mean.abs() <= 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn identical_strategies_have_zero_gap() {
        let (coeffs, grid, utility) = reference();
        let gap = utility_gap(
            &ConstantStrategy(0.4),
            &ConstantStrategy(0.4),
            &utility,
            &TerminalLiability::Zero,
            &coeffs,
            &grid,
            1_000,
            5,
            1.0,
        )
        .unwrap();
        assert_eq!(gap.mean, 0.0);
        assert_eq!(gap.std_error, 0.0);
    }

    #[test]
    fn crn_runs_are_bitwise_identical() {
        let (coeffs, grid, utility) = reference();
        let run = || {
            gateaux_derivative(
                &ConstantStrategy(0.3),
                &ConstantStrategy(1.0),
                &utility,
                &TerminalLiability::Zero,
                &coeffs,
                &grid,
                5_000,
                21,
                1.0,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn scan_is_maximal_at_zero_for_the_optimum() {
        let (coeffs, grid, utility) = reference();
        let pi_star = exponential_pure_jump_strategy(0.0, 0.1, 0.5, 1.0, 1.0).unwrap();
        let eps: Vec<f64> = (-4..=4).map(|k| 0.05 * k as f64).collect();
        let scan = epsilon_scan(
            Arc::new(ConstantStrategy(pi_star)),
            Arc::new(ConstantStrategy(1.0)),
            &eps,
            &utility,
            &TerminalLiability::Zero,
            &coeffs,
            &grid,
            30_000,
            7,
            1.0,
        )
        .unwrap();
        let best = scan
            .iter()
            .max_by(|a, b| a.mean_utility.total_cmp(&b.mean_utility))
            .unwrap();
        assert_eq!(best.epsilon, 0.0, "scan {scan:?}");
    }
}
