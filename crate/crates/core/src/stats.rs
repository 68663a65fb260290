//! Small numerical helpers: fixed-order sample statistics, composite Simpson
//! quadrature, and Poisson tail utilities.
//!
//! Every reduction here runs serially in index order so that results do not
//! depend on the number of worker threads.

/// Sample mean reduced in index order.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample mean and standard error (`sample std / sqrt(n)`), reduced in index
/// order. Uses the unbiased (n-1) variance; a single sample reports SE 0.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(values);
    if n == 1 {
        return (m, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let var = ss / (n as f64 - 1.0);
    (m, (var / n as f64).sqrt())
}

/// Composite Simpson integral of `f` over one uniform grid cell
/// `[a, a + h]`, using the midpoint evaluation.
fn simpson_cell<F: Fn(f64) -> f64>(f: &F, a: f64, h: f64) -> f64 {
    (h / 6.0) * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h))
}

/// Cumulative integral from the right on a uniform grid: returns `I` with
/// `I[i] = integral of f over [t_i, T]`, `I[m] = 0`. Each cell uses Simpson's
/// rule with a midpoint evaluation, so the composite scheme is fourth order
/// for smooth integrands on any number of cells.
pub fn cumulative_integral_from_right<F: Fn(f64) -> f64>(
    f: F,
    horizon: f64,
    steps: usize,
) -> Vec<f64> {
    let dt = horizon / steps as f64;
    let mut out = vec![0.0; steps + 1];
    for i in (0..steps).rev() {
        let a = i as f64 * dt;
        out[i] = out[i + 1] + simpson_cell(&f, a, dt);
    }
    out
}

/// Poisson probability mass function values `P(K = 0..=n_max)` for rate
/// `lambda`, computed by the stable upward recurrence.
pub fn poisson_pmf(lambda: f64, n_max: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(n_max + 1);
    let mut p = (-lambda).exp();
    pmf.push(p);
    for k in 1..=n_max {
        p *= lambda / k as f64;
        pmf.push(p);
    }
    pmf
}

/// Smallest `n` such that `P(Poisson(lambda) > n) <= tail_eps`.
pub fn poisson_tail_cutoff(lambda: f64, tail_eps: f64) -> usize {
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0usize;
    while 1.0 - cdf > tail_eps && k < 10_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}
