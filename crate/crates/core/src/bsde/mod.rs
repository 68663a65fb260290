//! Backward and forward-backward solvers.
//!
//! Three tiers with increasing generality and decreasing certainty:
//!
//! * a deterministic reduction of the exponential-utility backward equation
//!   in the pure-jump model (an ODE in time, integrated by Simpson);
//! * exact backward induction on the Poisson jump-count lattice, for
//!   liabilities that depend on the terminal jump count;
//! * a Monte Carlo Picard iteration with least-squares regression for the
//!   genuinely coupled forward-backward system.
//!
//! The first two tiers serve as oracles for the third. Sign convention used
//! throughout: drivers are stored in generator form `g` with
//! `dY = -g dt + Z dW + Psi dn`.

mod driver;
mod lattice;
mod picard;
mod pure_investment;
mod regression;

pub use driver::{
    canonical_rate, check_driver_bounds, deterministic_y, exponential_driver, jump_penalty,
    DriverBoundReport,
};
pub use lattice::{lattice_backward_induction, LatticeSolution};
pub use picard::{solve_coupled_picard, AdjointProcess, PicardDiagnostics, PicardIterationStats, PicardOptions, PicardResult, PolicyTable};
pub use pure_investment::{
    canonical_rate_fn, construct_pure_investment, PureInvestmentSolution, RateFn,
};

use serde::Serialize;

use crate::market::TimeGrid;

/// How the per-grid-point values of a solution are indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionIndex {
    /// Values indexed by the jump-count state `n = 0..=n_max`.
    LatticeStates,
    /// Values indexed by the simulated path.
    Paths,
}

/// A backward-equation solution on the grid: `Y` at every grid point and the
/// integrands `Z`, `Psi` per step, together with the attached terminal
/// condition. Values are indexed by lattice state or by path depending on
/// the producing solver.
#[derive(Debug, Clone)]
pub struct BsdeSolution {
    pub grid: TimeGrid,
    pub index: SolutionIndex,
    /// `y[i][k]`: value at grid point `i` for state/path `k`
    /// (`i = 0..=steps`). The last row equals the terminal condition exactly.
    pub y: Vec<Vec<f64>>,
    /// `z[i][k]` per step (`i = 0..steps`).
    pub z: Vec<Vec<f64>>,
    /// `psi[i][k]` per step (`i = 0..steps`).
    pub psi: Vec<Vec<f64>>,
    /// Terminal condition per state/path, exactly as attached to `y`.
    pub terminal: Vec<f64>,
}

impl BsdeSolution {
    /// Width of the state/path axis.
    pub fn width(&self) -> usize {
        self.terminal.len()
    }
}
