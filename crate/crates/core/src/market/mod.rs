//! Market model: deterministic time-dependent coefficients, driver path
//! simulation, and self-financing wealth integration.
//!
//! The risky asset's return increments are
//! `dS/S_- = mu dt + sigma dW + eta dn`, where `n_t = N_t - nu t` is the
//! compensated Poisson martingale. The price itself is never materialized:
//! wealth depends only on the return increments, which avoids spurious
//! discrete-time positivity violations of the price.

mod paths;
mod rng;
mod strategy;
mod wealth;

pub use paths::{simulate_paths, PathBundle};
pub use rng::path_rng;
pub use strategy::{
    ClosureStrategy, ConstantStrategy, PureInvestmentStrategy, ScaledStrategy, ShiftedStrategy,
    StepIndicatorStrategy, StepState, Strategy, TimeFnStrategy, ZeroStrategy,
};
pub use wealth::{integrate_wealth, integrate_wealth_recorded, perturbation_wealth, WealthPath};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Oversampling factor for the dense bound-check grid: coefficient bounds are
/// verified on `DENSE_CHECK_FACTOR * M + 1` equally spaced sample points.
/// This is a sampling-based check, not a proof.
const DENSE_CHECK_FACTOR: usize = 10;

/// Jump sizes must stay above `-1` by at least this margin.
pub const ETA_FLOOR_MARGIN: f64 = 1e-6;

/// A deterministic coefficient as a function of time.
///
/// Coefficients are deterministic time functions (piecewise-constant or
/// closed-form); a path-dependent extension would add a variant here, which
/// is why the enum is non-exhaustive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[non_exhaustive]
pub enum TimeFn {
    Constant { value: f64 },
    /// Right-open intervals `[times[k], times[k+1])` with value `values[k]`;
    /// `times[0]` must be 0 and times must be strictly increasing.
    PiecewiseConstant { times: Vec<f64>, values: Vec<f64> },
    /// `base + amplitude * sin(2 pi frequency t + phase)`.
    Sinusoid { base: f64, amplitude: f64, frequency: f64, phase: f64 },
}

impl TimeFn {
    pub fn constant(value: f64) -> Self {
        TimeFn::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant { value } => *value,
            TimeFn::PiecewiseConstant { times, values } => {
                let mut idx = 0;
                for (k, start) in times.iter().enumerate() {
                    if t >= *start {
                        idx = k;
                    } else {
                        break;
                    }
                }
                values[idx]
            }
            TimeFn::Sinusoid { base, amplitude, frequency, phase } => {
                base + amplitude * (2.0 * std::f64::consts::PI * frequency * t + phase).sin()
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            TimeFn::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config(format!("{name}: value must be finite")));
                }
            }
            TimeFn::PiecewiseConstant { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::config(format!(
                        "{name}: piecewise spec needs equal, non-zero numbers of times and values"
                    )));
                }
                if times[0] != 0.0 {
                    return Err(Error::config(format!("{name}: first breakpoint must be t = 0")));
                }
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config(format!(
                        "{name}: breakpoints must be strictly increasing"
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("{name}: values must be finite")));
                }
            }
            TimeFn::Sinusoid { base, amplitude, frequency, phase } => {
                for (field, v) in [
                    ("base", base),
                    ("amplitude", amplitude),
                    ("frequency", frequency),
                    ("phase", phase),
                ] {
                    if !v.is_finite() {
                        return Err(Error::config(format!("{name}.{field}: must be finite")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Whether the diffusion part is active or the model is pure jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketMode {
    /// `sigma(t)^2 >= sigma_min^2 > 0` on the horizon.
    Diffusive,
    /// `sigma = 0`, `|eta(t)| >= eta_min > 0`, and `c1 <= mu/eta <= c2 < nu`.
    PureJump,
}

/// Declared bounds for the coefficient functions, checked on a dense sample
/// grid at validation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientBounds {
    /// `|mu(t)| <= mu_abs`.
    pub mu_abs: f64,
    /// `sigma(t) <= sigma_max`.
    pub sigma_max: f64,
    /// `|eta(t)| <= eta_abs`.
    pub eta_abs: f64,
    /// Diffusive mode: `sigma(t)^2 >= sigma_min^2 > 0`.
    #[serde(default)]
    pub sigma_min: Option<f64>,
    /// Pure-jump mode: `|eta(t)| >= eta_min > 0`.
    #[serde(default)]
    pub eta_min: Option<f64>,
    /// Pure-jump mode: `c1 <= mu(t)/eta(t)`.
    #[serde(default)]
    pub c1: Option<f64>,
    /// Pure-jump mode: `mu(t)/eta(t) <= c2 < nu`.
    #[serde(default)]
    pub c2: Option<f64>,
}

/// Market coefficients of the price dynamics
/// `dS/S_- = mu dt + sigma dW + eta dn` with Poisson intensity `nu`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketCoefficients {
    pub mu: TimeFn,
    pub sigma: TimeFn,
    pub eta: TimeFn,
    /// Poisson jump intensity (jumps per unit time). Zero is tolerated only
    /// as a degenerate testing configuration in diffusive mode.
    pub nu: f64,
    /// Initial price (kept for reporting; wealth never needs it).
    pub s0: f64,
    pub mode: MarketMode,
    pub bounds: CoefficientBounds,
}

impl MarketCoefficients {
    /// Constant-coefficient pure-jump market with bounds inferred from the
    /// values. `c1`/`c2` are pinned at `mu/eta`.
    pub fn constant_pure_jump(mu: f64, eta: f64, nu: f64, s0: f64) -> Self {
        let ratio = mu / eta;
        MarketCoefficients {
            mu: TimeFn::constant(mu),
            sigma: TimeFn::constant(0.0),
            eta: TimeFn::constant(eta),
            nu,
            s0,
            mode: MarketMode::PureJump,
            bounds: CoefficientBounds {
                mu_abs: mu.abs().max(1e-12),
                sigma_max: 0.0,
                eta_abs: eta.abs(),
                sigma_min: None,
                eta_min: Some(eta.abs()),
                c1: Some(ratio.min(0.0)),
                c2: Some(ratio.max(0.0)),
            },
        }
    }

    /// Constant-coefficient diffusive market with bounds inferred from the
    /// values.
    pub fn constant_diffusive(mu: f64, sigma: f64, eta: f64, nu: f64, s0: f64) -> Self {
        MarketCoefficients {
            mu: TimeFn::constant(mu),
            sigma: TimeFn::constant(sigma),
            eta: TimeFn::constant(eta),
            nu,
            s0,
            mode: MarketMode::Diffusive,
            bounds: CoefficientBounds {
                mu_abs: mu.abs().max(1e-12),
                sigma_max: sigma,
                eta_abs: eta.abs().max(1e-12),
                sigma_min: Some(sigma),
                eta_min: None,
                c1: None,
                c2: None,
            },
        }
    }

    pub fn mu_at(&self, t: f64) -> f64 {
        self.mu.value(t)
    }

    pub fn sigma_at(&self, t: f64) -> f64 {
        self.sigma.value(t)
    }

    pub fn eta_at(&self, t: f64) -> f64 {
        self.eta.value(t)
    }

    /// `mu(t) / (eta(t) * nu)`, the jump compensator ratio of the pure-jump
    /// formulas.
    pub fn compensator_ratio_at(&self, t: f64) -> f64 {
        self.mu_at(t) / (self.eta_at(t) * self.nu)
    }

    /// Validates the declared invariants by sampling the coefficient
    /// functions on a dense grid (10 points per step). Error messages name
    /// the violated bound.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        self.mu.validate("market.mu")?;
        self.sigma.validate("market.sigma")?;
        self.eta.validate("market.eta")?;
        if !self.nu.is_finite() || self.nu < 0.0 {
            return Err(Error::config(format!(
                "market.nu: intensity must be finite and non-negative, got {}",
                self.nu
            )));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::config(format!(
                "market.s0: initial price must be positive, got {}",
                self.s0
            )));
        }
        match self.mode {
            MarketMode::Diffusive => {
                let sigma_min = self.bounds.sigma_min.ok_or_else(|| {
                    Error::config("market.bounds.sigma_min: required in diffusive mode")
                })?;
                if !(sigma_min > 0.0) {
                    return Err(Error::config(format!(
                        "market.bounds.sigma_min: must be positive, got {sigma_min}"
                    )));
                }
            }
            MarketMode::PureJump => {
                if !(self.nu > 0.0) {
                    return Err(Error::config(
                        "market.nu: pure-jump mode requires a positive intensity",
                    ));
                }
                let eta_min = self.bounds.eta_min.ok_or_else(|| {
                    Error::config("market.bounds.eta_min: required in pure_jump mode")
                })?;
                if !(eta_min > 0.0) {
                    return Err(Error::config(format!(
                        "market.bounds.eta_min: must be positive, got {eta_min}"
                    )));
                }
                let c1 = self.bounds.c1.ok_or_else(|| {
                    Error::config("market.bounds.c1: required in pure_jump mode")
                })?;
                let c2 = self.bounds.c2.ok_or_else(|| {
                    Error::config("market.bounds.c2: required in pure_jump mode")
                })?;
                if c1 > c2 {
                    return Err(Error::config(format!(
                        "market.bounds: violated invariant c1 <= c2 ({c1} > {c2})"
                    )));
                }
                if !(c2 < self.nu) {
                    return Err(Error::config(format!(
                        "market.bounds.c2: violated invariant c2 < nu ({c2} >= {})",
                        self.nu
                    )));
                }
            }
        }
        let samples = DENSE_CHECK_FACTOR * grid.steps;
        for k in 0..=samples {
            let t = grid.horizon * k as f64 / samples as f64;
            let mu = self.mu_at(t);
            let sigma = self.sigma_at(t);
            let eta = self.eta_at(t);
            if mu.abs() > self.bounds.mu_abs {
                return Err(Error::config(format!(
                    "market.mu: violated bound |mu| <= {} at t = {t} (mu = {mu})",
                    self.bounds.mu_abs
                )));
            }
            if sigma < 0.0 || sigma > self.bounds.sigma_max {
                return Err(Error::config(format!(
                    "market.sigma: violated bound 0 <= sigma <= {} at t = {t} (sigma = {sigma})",
                    self.bounds.sigma_max
                )));
            }
            if eta.abs() > self.bounds.eta_abs {
                return Err(Error::config(format!(
                    "market.eta: violated bound |eta| <= {} at t = {t} (eta = {eta})",
                    self.bounds.eta_abs
                )));
            }
            if eta <= -1.0 + ETA_FLOOR_MARGIN {
                return Err(Error::config(format!(
                    "market.eta: violated bound eta > -1 + {ETA_FLOOR_MARGIN} at t = {t} (eta = {eta})"
                )));
            }
            match self.mode {
                MarketMode::Diffusive => {
                    let sigma_min = self.bounds.sigma_min.unwrap();
                    if sigma * sigma < sigma_min * sigma_min {
                        return Err(Error::config(format!(
                            "market.sigma: violated bound sigma^2 >= sigma_min^2 at t = {t} \
                             (sigma = {sigma}, sigma_min = {sigma_min})"
                        )));
                    }
                }
                MarketMode::PureJump => {
                    if sigma != 0.0 {
                        return Err(Error::config(format!(
                            "market.sigma: pure_jump mode requires sigma = 0, got {sigma} at t = {t}"
                        )));
                    }
                    let eta_min = self.bounds.eta_min.unwrap();
                    if eta.abs() < eta_min {
                        return Err(Error::config(format!(
                            "market.eta: violated bound |eta| >= eta_min at t = {t} \
                             (eta = {eta}, eta_min = {eta_min})"
                        )));
                    }
                    let ratio = mu / eta;
                    let (c1, c2) = (self.bounds.c1.unwrap(), self.bounds.c2.unwrap());
                    if ratio < c1 - 1e-12 || ratio > c2 + 1e-12 {
                        return Err(Error::config(format!(
                            "market: violated bound c1 <= mu/eta <= c2 at t = {t} \
                             (mu/eta = {ratio}, c1 = {c1}, c2 = {c2})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Uniform time grid on `[0, T]` with `M` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config(format!(
                "grid.horizon: must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::config("grid.steps: must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid point `t_i = i * dt`; `t(M)` returns the horizon exactly.
    pub fn t(&self, i: usize) -> f64 {
        if i >= self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_lookup() {
        let f = TimeFn::PiecewiseConstant {
            times: vec![0.0, 0.5, 0.8],
            values: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(f.value(0.0), 1.0);
        assert_eq!(f.value(0.49), 1.0);
        assert_eq!(f.value(0.5), 2.0);
        assert_eq!(f.value(0.99), 3.0);
    }

    #[test]
    fn validate_accepts_reference_market() {
        let c = MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        c.validate(&grid).unwrap();
    }

    #[test]
    fn validate_names_c2_bound() {
        let mut c = MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0);
        c.bounds.c2 = Some(1.5);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let err = c.validate(&grid).unwrap_err();
        assert!(err.to_string().contains("c2 < nu"), "{err}");
    }

    #[test]
    fn validate_rejects_eta_near_minus_one() {
        let mut c = MarketCoefficients::constant_pure_jump(0.1, -0.9999999, 1.0, 1.0);
        c.bounds.c1 = Some(-2.0);
        c.bounds.c2 = Some(0.5);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let err = c.validate(&grid).unwrap_err();
        assert!(err.to_string().contains("eta > -1"), "{err}");
    }

    #[test]
    fn validate_rejects_sigma_in_pure_jump() {
        let mut c = MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0);
        c.sigma = TimeFn::constant(0.1);
        c.bounds.sigma_max = 0.1;
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let err = c.validate(&grid).unwrap_err();
        assert!(err.to_string().contains("sigma = 0"), "{err}");
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        assert_eq!(grid.t(0), 0.0);
        assert_eq!(grid.t(3), 1.0);
    }
}
