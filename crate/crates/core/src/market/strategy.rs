//! Predictable investment strategies.
//!
//! A strategy's value at step `i` may depend on the step time, the current
//! wealth, the jump count so far, and nothing else: the evaluation context
//! deliberately excludes the step's own increments, which enforces
//! predictability structurally.

use std::sync::Arc;

use super::MarketCoefficients;
use crate::error::Error;
use crate::utility::UtilityFunction;
use crate::Result;

/// Information available to a strategy at the left endpoint of a step.
#[derive(Debug, Clone, Copy)]
pub struct StepState {
    /// Step index `i` (the step covers `[t_i, t_{i+1})`).
    pub step: usize,
    /// Left endpoint `t_i`.
    pub t: f64,
    /// Wealth `X_{t_i}`.
    pub wealth: f64,
    /// Jump count `N_{t_i}`.
    pub jump_count: u64,
    /// Brownian value `W_{t_i}`.
    pub brownian: f64,
}

/// A predictable dollar-allocation strategy.
pub trait Strategy: Send + Sync {
    /// Dollar amount invested over the step starting at `state`.
    fn value(&self, state: &StepState) -> Result<f64>;

    /// Short label used in reports.
    fn label(&self) -> String;

    /// A declared uniform bound on `|value|`, when one exists. Perturbation
    /// directions must declare one.
    fn declared_bound(&self) -> Option<f64> {
        None
    }
}

/// No investment.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroStrategy;

impl Strategy for ZeroStrategy {
    fn value(&self, _state: &StepState) -> Result<f64> {
        Ok(0.0)
    }

    fn label(&self) -> String {
        "zero".to_string()
    }

    fn declared_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// A constant dollar amount.
#[derive(Debug, Clone, Copy)]
pub struct ConstantStrategy(pub f64);

impl Strategy for ConstantStrategy {
    fn value(&self, _state: &StepState) -> Result<f64> {
        Ok(self.0)
    }

    fn label(&self) -> String {
        format!("const({})", self.0)
    }

    fn declared_bound(&self) -> Option<f64> {
        Some(self.0.abs())
    }
}

/// A deterministic function of time.
pub struct TimeFnStrategy {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub name: String,
    pub bound: Option<f64>,
}

impl Strategy for TimeFnStrategy {
    fn value(&self, state: &StepState) -> Result<f64> {
        Ok((self.f)(state.t))
    }

    fn label(&self) -> String {
        self.name.clone()
    }

    fn declared_bound(&self) -> Option<f64> {
        self.bound
    }
}

/// `value` until `cutoff_t` (inclusive left endpoints), zero afterwards.
/// The standard step-function perturbation direction.
#[derive(Debug, Clone, Copy)]
pub struct StepIndicatorStrategy {
    pub value: f64,
    pub cutoff_t: f64,
}

impl Strategy for StepIndicatorStrategy {
    fn value(&self, state: &StepState) -> Result<f64> {
        Ok(if state.t < self.cutoff_t { self.value } else { 0.0 })
    }

    fn label(&self) -> String {
        format!("step({} until t={})", self.value, self.cutoff_t)
    }

    fn declared_bound(&self) -> Option<f64> {
        Some(self.value.abs())
    }
}

/// `base + epsilon * direction`; the perturbed strategies of the
/// first-order-condition checks.
#[derive(Clone)]
pub struct ShiftedStrategy {
    pub base: Arc<dyn Strategy>,
    pub direction: Arc<dyn Strategy>,
    pub epsilon: f64,
}

impl Strategy for ShiftedStrategy {
    fn value(&self, state: &StepState) -> Result<f64> {
        Ok(self.base.value(state)? + self.epsilon * self.direction.value(state)?)
    }

    fn label(&self) -> String {
        format!("{} + {} * {}", self.base.label(), self.epsilon, self.direction.label())
    }

    fn declared_bound(&self) -> Option<f64> {
        match (self.base.declared_bound(), self.direction.declared_bound()) {
            (Some(b), Some(d)) => Some(b + self.epsilon.abs() * d),
            _ => None,
        }
    }
}

/// `scale * base`; used by linearity checks.
#[derive(Clone)]
pub struct ScaledStrategy {
    pub base: Arc<dyn Strategy>,
    pub scale: f64,
}

impl Strategy for ScaledStrategy {
    fn value(&self, state: &StepState) -> Result<f64> {
        Ok(self.scale * self.base.value(state)?)
    }

    fn label(&self) -> String {
        format!("{} * {}", self.scale, self.base.label())
    }

    fn declared_bound(&self) -> Option<f64> {
        self.base.declared_bound().map(|b| b * self.scale.abs())
    }
}

/// An arbitrary state-dependent rule, mainly for tests.
pub struct ClosureStrategy {
    pub f: Arc<dyn Fn(&StepState) -> f64 + Send + Sync>,
    pub name: String,
}

impl Strategy for ClosureStrategy {
    fn value(&self, state: &StepState) -> Result<f64> {
        Ok((self.f)(state))
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// The explicit pure-investment strategy
/// `pi_t = (a_t - mu_t/eta_t) / (ARA(X_-) (mu_t - eta_t nu))`
/// driven by an auxiliary rate `a`.
pub struct PureInvestmentStrategy {
    pub coeffs: MarketCoefficients,
    pub utility: UtilityFunction,
    pub rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub rate_name: String,
}

impl Strategy for PureInvestmentStrategy {
    fn value(&self, state: &StepState) -> Result<f64> {
        let t = state.t;
        let mu = self.coeffs.mu_at(t);
        let eta = self.coeffs.eta_at(t);
        let denom = mu - eta * self.coeffs.nu;
        if denom == 0.0 {
            return Err(Error::degenerate(format!(
                "pure-investment strategy: mu - eta*nu = 0 at t = {t}"
            )));
        }
        let ara = self.utility.evaluate(state.wealth)?.ara;
        Ok(((self.rate)(t) - mu / eta) / (ara * denom))
    }

    fn label(&self) -> String {
        format!("pure-investment({})", self.rate_name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(t: f64, wealth: f64) -> StepState {
        StepState { step: 0, t, wealth, jump_count: 0, brownian: 0.0 }
    }

    #[test]
    fn shifted_combines_base_and_direction() {
        let s = ShiftedStrategy {
            base: Arc::new(ConstantStrategy(0.5)),
            direction: Arc::new(StepIndicatorStrategy { value: 1.0, cutoff_t: 0.5 }),
            epsilon: 0.2,
        };
        assert_eq!(s.value(&state(0.1, 0.0)).unwrap(), 0.7);
        assert_eq!(s.value(&state(0.9, 0.0)).unwrap(), 0.5);
        assert_eq!(s.declared_bound(), Some(0.7));
    }

    #[test]
    fn pure_investment_vanishes_when_rate_matches_drift_ratio() {
        // a = mu/eta makes the numerator zero for any utility and wealth.
        let coeffs = MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0);
        let s = PureInvestmentStrategy {
            coeffs,
            utility: UtilityFunction::exponential(1.0).unwrap(),
            rate: Arc::new(|_| 0.2),
            rate_name: "mu/eta".to_string(),
        };
        assert_eq!(s.value(&state(0.3, 2.0)).unwrap(), 0.0);
    }
}
