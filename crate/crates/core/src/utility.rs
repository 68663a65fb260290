//! Utility function families on the whole real line with derivatives up to
//! third order, marginal-utility inversion, and absolute risk aversion.
//!
//! Two families are provided: the exponential utility `u(x) = -exp(-delta x)`
//! and finite mixtures `u(x) = -sum_j w_j exp(-delta_j x)` with positive
//! weights and rates. Both are strictly increasing, strictly concave, smooth,
//! and have absolute risk aversion bounded below by a positive constant
//! (`delta` for the exponential family, `min_j delta_j` for a mixture), which
//! is the standing assumption every solver in this crate relies on.
//!
//! Power and log utilities are deliberately absent: wealth may become
//! negative, so only utilities defined on all of `R` qualify.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Largest exponent fed to `exp` before reporting a range error.
const EXP_ARG_LIMIT: f64 = 700.0;

/// Relative tolerance for the numerical marginal-utility inversion.
const INVERT_REL_TOL: f64 = 1e-12;

/// A utility function family, selected at configuration time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilityFunction {
    /// `u(x) = -exp(-delta x)` with constant absolute risk aversion `delta`.
    Exponential { delta: f64 },
    /// `u(x) = -sum_j w_j exp(-delta_j x)`, `w_j > 0`, `delta_j > 0`.
    ///
    /// This is the "general utility" test family: it forces the numerical
    /// inversion path that the plain exponential never exercises.
    ExponentialMixture { weights: Vec<f64>, rates: Vec<f64> },
}

/// Value of a utility function and its derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityValues {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    pub d3u: f64,
    /// Absolute risk aversion `-d2u/du`.
    pub ara: f64,
}

impl UtilityFunction {
    pub fn exponential(delta: f64) -> Result<Self> {
        let u = UtilityFunction::Exponential { delta };
        u.validate()?;
        Ok(u)
    }

    pub fn mixture(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let u = UtilityFunction::ExponentialMixture { weights, rates };
        u.validate()?;
        Ok(u)
    }

    /// Checks the family parameters. Called by the constructors and by
    /// configuration loading.
    pub fn validate(&self) -> Result<()> {
        match self {
            UtilityFunction::Exponential { delta } => {
                if !delta.is_finite() || *delta <= 0.0 {
                    return Err(Error::config(format!(
                        "utility.delta: risk aversion must be positive and finite, got {delta}"
                    )));
                }
            }
            UtilityFunction::ExponentialMixture { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::config(format!(
                        "utility mixture: weights ({}) and rates ({}) must be non-empty and of equal length",
                        weights.len(),
                        rates.len()
                    )));
                }
                for (j, (w, d)) in weights.iter().zip(rates).enumerate() {
                    if !w.is_finite() || *w <= 0.0 {
                        return Err(Error::config(format!(
                            "utility mixture: weights[{j}] must be positive, got {w}"
                        )));
                    }
                    if !d.is_finite() || *d <= 0.0 {
                        return Err(Error::config(format!(
                            "utility mixture: rates[{j}] must be positive, got {d}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Lower bound `k` on the absolute risk aversion over the whole line.
    pub fn ara_lower_bound(&self) -> f64 {
        match self {
            UtilityFunction::Exponential { delta } => *delta,
            UtilityFunction::ExponentialMixture { rates, .. } => {
                rates.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Evaluates `(u, u', u'', u''', ARA)` at `x`.
    ///
    /// Extreme arguments that would overflow `exp` (or underflow the marginal
    /// utility to zero) return a numerical-range error naming the offending
    /// point.
    pub fn evaluate(&self, x: f64) -> Result<UtilityValues> {
        if !x.is_finite() {
            return Err(Error::range(format!("utility evaluated at non-finite x = {x}")));
        }
        let vals = match self {
            UtilityFunction::Exponential { delta } => {
                let e = checked_exp(-delta * x, x)?;
                UtilityValues {
                    u: -e,
                    du: delta * e,
                    d2u: -delta * delta * e,
                    d3u: delta * delta * delta * e,
                    ara: *delta,
                }
            }
            UtilityFunction::ExponentialMixture { weights, rates } => {
                let (mut u, mut du, mut d2u, mut d3u) = (0.0, 0.0, 0.0, 0.0);
                for (w, d) in weights.iter().zip(rates) {
                    let e = w * checked_exp(-d * x, x)?;
                    u -= e;
                    du += d * e;
                    d2u -= d * d * e;
                    d3u += d * d * d * e;
                }
                UtilityValues { u, du, d2u, d3u, ara: -d2u / du }
            }
        };
        if vals.du <= 0.0 || !vals.du.is_finite() {
            return Err(Error::range(format!(
                "marginal utility underflowed or overflowed at x = {x}"
            )));
        }
        Ok(vals)
    }

    /// Marginal utility `u'(x)`.
    pub fn du(&self, x: f64) -> Result<f64> {
        Ok(self.evaluate(x)?.du)
    }

    /// Inverse of the marginal utility: the unique `x` with `u'(x) = m`.
    ///
    /// Closed form for the exponential family; for mixtures the strictly
    /// decreasing `u'` is bracketed and bisected to `1e-12` relative
    /// tolerance on the residual.
    pub fn invert_marginal(&self, m: f64) -> Result<f64> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::domain(format!(
                "invert_marginal requires a positive finite marginal utility, got {m}"
            )));
        }
        match self {
            UtilityFunction::Exponential { delta } => Ok(-(m / delta).ln() / delta),
            UtilityFunction::ExponentialMixture { weights, rates } => {
                self.invert_marginal_mixture(m, weights, rates)
            }
        }
    }

    fn invert_marginal_mixture(&self, m: f64, weights: &[f64], rates: &[f64]) -> Result<f64> {
        let delta_max = rates.iter().copied().fold(0.0, f64::max);
        let total_wd: f64 = weights.iter().zip(rates).map(|(w, d)| w * d).sum();
        // Seed from the dominant-rate approximation, then expand a bracket
        // around it. u' is strictly decreasing, so any sign change brackets
        // the unique root.
        let seed = -(m / total_wd).ln() / delta_max;
        let mut lo = seed - 1.0;
        let mut hi = seed + 1.0;
        let mut width = 1.0;
        for _ in 0..200 {
            if self.du(lo)? >= m {
                break;
            }
            width *= 2.0;
            lo -= width;
        }
        let mut width = 1.0;
        for _ in 0..200 {
            if self.du(hi)? <= m {
                break;
            }
            width *= 2.0;
            hi += width;
        }
        if self.du(lo)? < m || self.du(hi)? > m {
            return Err(Error::range(format!(
                "invert_marginal could not bracket m = {m} (bracket [{lo}, {hi}])"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let val = self.du(mid)?;
            if ((val - m) / m).abs() <= INVERT_REL_TOL {
                return Ok(mid);
            }
            if val > m {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= f64::EPSILON * (1.0 + mid.abs()) {
                return Ok(mid);
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn checked_exp(arg: f64, x: f64) -> Result<f64> {
    if arg > EXP_ARG_LIMIT {
        return Err(Error::range(format!(
            "exponential utility overflow: exp({arg:.3}) at x = {x}"
        )));
    }
    Ok(arg.exp())
}
