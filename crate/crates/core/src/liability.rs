//! Terminal liability `H` due at the horizon.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// A bounded terminal liability, evaluated from the terminal driver state
/// `(N_T, W_T)`. Wealth-dependent liabilities are out of scope.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalLiability {
    /// `H = 0` (the pure investment problem).
    Zero,
    /// A constant liability.
    Constant { value: f64 },
    /// A table `n -> H(n)` indexed by the terminal jump count; counts beyond
    /// the table clamp to the last entry.
    JumpCountTable { values: Vec<f64> },
    /// A bounded function of `(N_T, W_T)` supplied in code (not expressible
    /// in configuration files).
    #[serde(skip)]
    TerminalStateFn(Arc<dyn Fn(u64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for TerminalLiability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalLiability::Zero => write!(f, "Zero"),
            TerminalLiability::Constant { value } => write!(f, "Constant({value})"),
            TerminalLiability::JumpCountTable { values } => {
                write!(f, "JumpCountTable(len={})", values.len())
            }
            TerminalLiability::TerminalStateFn(_) => write!(f, "TerminalStateFn(..)"),
        }
    }
}

impl TerminalLiability {
    pub fn validate(&self) -> Result<()> {
        match self {
            TerminalLiability::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config(format!(
                        "liability.value must be finite, got {value}"
                    )));
                }
            }
            TerminalLiability::JumpCountTable { values } => {
                if values.is_empty() {
                    return Err(Error::config("liability.values: table must be non-empty"));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::config(format!(
                        "liability.values: table entries must be finite, got {v}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Value of `H` given the terminal jump count and terminal Brownian value.
    pub fn value(&self, n_terminal: u64, w_terminal: f64) -> f64 {
        match self {
            TerminalLiability::Zero => 0.0,
            TerminalLiability::Constant { value } => *value,
            TerminalLiability::JumpCountTable { values } => {
                let idx = (n_terminal as usize).min(values.len() - 1);
                values[idx]
            }
            TerminalLiability::TerminalStateFn(f) => f(n_terminal, w_terminal),
        }
    }

    /// Whether the liability depends on the terminal Brownian value. Drives
    /// the choice of regression state in the coupled solver.
    pub fn depends_on_brownian(&self) -> bool {
        matches!(self, TerminalLiability::TerminalStateFn(_))
    }

    /// The constant value when the liability is state-independent.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            TerminalLiability::Zero => Some(0.0),
            TerminalLiability::Constant { value } => Some(*value),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_clamps_to_last_entry() {
        let h = TerminalLiability::JumpCountTable { values: vec![0.0, 1.0, 2.0] };
        assert_eq!(h.value(0, 0.0), 0.0);
        assert_eq!(h.value(2, 0.0), 2.0);
        assert_eq!(h.value(7, 0.0), 2.0);
    }

    #[test]
    fn constants_ignore_state() {
        assert_eq!(TerminalLiability::Zero.value(3, -1.0), 0.0);
        let h = TerminalLiability::Constant { value: 0.5 };
        assert_eq!(h.value(9, 2.0), 0.5);
        assert_eq!(h.as_constant(), Some(0.5));
    }
}
