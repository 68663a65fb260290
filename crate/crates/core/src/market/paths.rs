//! Driver path simulation: Brownian and Poisson increments on a time grid.

use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use super::rng::path_rng;
use super::{MarketCoefficients, TimeGrid};
use crate::error::Error;
use crate::Result;

/// Simulated driver increments for a batch of paths.
///
/// Per path and step `i` the bundle stores the Brownian increment
/// `dW_i ~ N(0, dt)` and the Poisson count `dN_i ~ Poisson(nu dt)`; the
/// compensated increment `dn_i = dN_i - nu dt` is derived on demand.
/// Regenerating with the same seed reproduces the bundle bit-exactly, and
/// path `p` never depends on how many other paths were drawn.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub nu: f64,
    dw: Vec<f64>,
    dn: Vec<u32>,
}

impl PathBundle {
    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    #[inline]
    fn offset(&self, path: usize, step: usize) -> usize {
        path * self.grid.steps + step
    }

    /// Brownian increment of `path` over step `i`.
    #[inline]
    pub fn dw(&self, path: usize, step: usize) -> f64 {
        self.dw[self.offset(path, step)]
    }

    /// Poisson count of `path` over step `i`.
    #[inline]
    pub fn dn_count(&self, path: usize, step: usize) -> u32 {
        self.dn[self.offset(path, step)]
    }

    /// Compensated jump increment `dN_i - nu dt`.
    #[inline]
    pub fn dn_compensated(&self, path: usize, step: usize) -> f64 {
        self.dn_count(path, step) as f64 - self.nu * self.dt()
    }

    /// Terminal jump count `N_T` of a path.
    pub fn terminal_jump_count(&self, path: usize) -> u64 {
        (0..self.grid.steps).map(|i| self.dn_count(path, i) as u64).sum()
    }

    /// Terminal Brownian value `W_T` of a path.
    pub fn terminal_brownian(&self, path: usize) -> f64 {
        (0..self.grid.steps).map(|i| self.dw(path, i)).sum()
    }

    /// Replaces one increment pair; used by predictability tests.
    #[cfg(test)]
    pub(crate) fn mutate_increment(&mut self, path: usize, step: usize, dw: f64, dn: u32) {
        let k = self.offset(path, step);
        self.dw[k] = dw;
        self.dn[k] = dn;
    }
}

/// Draws `n_paths` independent driver paths on `grid`.
///
/// Every path uses its own counter-based stream derived from
/// `(seed, path index)`; per step the Gaussian increment is drawn before the
/// Poisson count. Coefficients are validated first and violations are
/// reported as configuration errors naming the bound.
pub fn simulate_paths(
    coeffs: &MarketCoefficients,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    coeffs.validate(grid)?;
    if n_paths == 0 {
        return Err(Error::config("mc.n_paths: must be at least 1"));
    }
    let steps = grid.steps;
    let dt = grid.dt();
    let normal = Normal::new(0.0, dt.sqrt())
        .map_err(|e| Error::config(format!("invalid Gaussian step distribution: {e}")))?;
    let poisson = if coeffs.nu > 0.0 {
        Some(Poisson::new(coeffs.nu * dt).map_err(|e| {
            Error::config(format!("invalid Poisson step distribution (nu = {}): {e}", coeffs.nu))
        })?)
    } else {
        None
    };

    let per_path: Vec<(Vec<f64>, Vec<u32>)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut dw = Vec::with_capacity(steps);
            let mut dn = Vec::with_capacity(steps);
            for _ in 0..steps {
                dw.push(normal.sample(&mut rng));
                let count = match &poisson {
                    Some(dist) => dist.sample(&mut rng) as u32,
                    None => 0,
                };
                dn.push(count);
            }
            (dw, dn)
        })
        .collect();

    let mut dw = Vec::with_capacity(n_paths * steps);
    let mut dn = Vec::with_capacity(n_paths * steps);
    for (w, n) in per_path {
        dw.extend_from_slice(&w);
        dn.extend_from_slice(&n);
    }
    Ok(PathBundle { grid: *grid, n_paths, seed, nu: coeffs.nu, dw, dn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketCoefficients;
    use crate::stats::mean_and_se;

    fn reference_market() -> MarketCoefficients {
        MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0)
    }

    #[test]
    fn zero_intensity_produces_no_jumps() {
        let coeffs = MarketCoefficients::constant_diffusive(0.05, 0.2, 0.0, 0.0, 1.0);
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let bundle = simulate_paths(&coeffs, &grid, 16, 1).unwrap();
        for p in 0..16 {
            for i in 0..20 {
                assert_eq!(bundle.dn_count(p, i), 0);
                assert_eq!(bundle.dn_compensated(p, i), 0.0);
            }
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let coeffs = reference_market();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let a = simulate_paths(&coeffs, &grid, 32, 42).unwrap();
        let b = simulate_paths(&coeffs, &grid, 32, 42).unwrap();
        assert_eq!(a.dw, b.dw);
        assert_eq!(a.dn, b.dn);
    }

    #[test]
    fn paths_do_not_depend_on_batch_size() {
        let coeffs = reference_market();
        let grid = TimeGrid::new(1.0, 25).unwrap();
        let small = simulate_paths(&coeffs, &grid, 4, 7).unwrap();
        let large = simulate_paths(&coeffs, &grid, 64, 7).unwrap();
        for p in 0..4 {
            for i in 0..25 {
                assert_eq!(small.dw(p, i), large.dw(p, i));
                assert_eq!(small.dn_count(p, i), large.dn_count(p, i));
            }
        }
    }

    #[test]
    fn poisson_sample_mean_matches_intensity() {
        // E[N_T] = nu T = 1; the sample mean over 1e5 paths must land within
        // 3 sqrt(nu T / n) of it.
        let coeffs = reference_market();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let n_paths = 100_000;
        let bundle = simulate_paths(&coeffs, &grid, n_paths, 11).unwrap();
        let counts: Vec<f64> =
            (0..n_paths).map(|p| bundle.terminal_jump_count(p) as f64).collect();
        let (m, _) = mean_and_se(&counts);
        let band = 3.0 * (1.0 / n_paths as f64).sqrt();
        assert!((m - 1.0).abs() <= band, "mean {m}, band {band}");
    }

    #[test]
    fn compensated_increments_average_to_zero() {
        let coeffs = reference_market();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let n_paths = 50_000;
        let bundle = simulate_paths(&coeffs, &grid, n_paths, 5).unwrap();
        let sums: Vec<f64> = (0..n_paths)
            .map(|p| (0..100).map(|i| bundle.dn_compensated(p, i)).sum())
            .collect();
        let (m, se) = mean_and_se(&sums);
        assert!(m.abs() <= 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let coeffs = reference_market();
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let mut outputs = Vec::new();
        for threads in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let bundle = pool.install(|| simulate_paths(&coeffs, &grid, 128, 9).unwrap());
            outputs.push((bundle.dw, bundle.dn));
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }
}
