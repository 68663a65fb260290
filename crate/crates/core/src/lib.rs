//! Numerical library for utility-optimal investment in a one-asset
//! jump-diffusion market.
//!
//! The library simulates Brownian/Poisson driver paths, integrates
//! self-financing wealth, evaluates the pointwise first-order condition for
//! the optimal dollar allocation, solves the associated backward equations
//! (deterministic reduction, Poisson-lattice induction, and a Monte Carlo
//! Picard iteration for the coupled forward-backward system), and verifies
//! the optimality and martingale properties by seeded Monte Carlo checks.
//!
//! All Monte Carlo routines draw from counter-based per-path random streams,
//! so results are bit-reproducible for a fixed seed regardless of the number
//! of worker threads.

pub mod bsde;
pub mod error;
pub mod liability;
pub mod market;
pub mod optimality;
pub mod stats;
pub mod utility;
pub mod verify;

pub use error::Error;

/// Library-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
