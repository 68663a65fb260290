//! Least-squares regression on a polynomial state basis.
//!
//! The basis is monomials in standardized time and wealth tensored with
//! low-order monomials in the jump count, optionally extended with additive
//! Brownian terms when the terminal liability depends on `W_T`. Fits go
//! through the normal equations with an SVD pseudo-inverse, so collinear
//! columns (a degenerate step-0 state, wealth that is an affine function of
//! the jump count, ...) are dropped instead of blowing up.
//!
//! Evaluation clamps each raw coordinate to the range observed in the
//! fitting sample: a polynomial fitted on the state cloud is not trusted to
//! extrapolate beyond it, and data-driven ranges keep legitimate sparse
//! states (small jump counts early on) inside the trust region.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Relative singular-value threshold for the normal-equation pseudo-inverse.
const SV_THRESHOLD: f64 = 1e-12;

/// Shape of the regression basis: tensor monomials in `(t, x, n)` plus
/// additive monomials in `w`. A degree of zero drops the factor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BasisSpec {
    pub t_degree: usize,
    pub x_degree: usize,
    pub n_degree: usize,
    pub w_degree: usize,
}

impl BasisSpec {
    pub fn column_count(&self) -> usize {
        (self.t_degree + 1) * (self.x_degree + 1) * (self.n_degree + 1) + self.w_degree
    }
}

#[derive(Debug, Clone, Copy)]
struct Standardizer {
    mean: f64,
    scale: f64,
    lo: f64,
    hi: f64,
}

impl Standardizer {
    fn from_samples(values: impl Iterator<Item = f64> + Clone) -> Standardizer {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.clone() {
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
            n += 1;
        }
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        let mut ss = 0.0;
        for v in values {
            ss += (v - mean) * (v - mean);
        }
        let std = if n > 1 { (ss / (n as f64 - 1.0)).sqrt() } else { 0.0 };
        if !lo.is_finite() {
            lo = 0.0;
            hi = 0.0;
        }
        Standardizer { mean, scale: if std > 1e-12 { std } else { 1.0 }, lo, hi }
    }

    /// Raw coordinate pulled into the observed range.
    fn clamp_raw(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }
}

/// One regression sample: the state at a step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StateSample {
    pub t: f64,
    pub x: f64,
    pub n: f64,
    pub w: f64,
}

/// A fitted polynomial function of the state.
#[derive(Debug, Clone)]
pub(crate) struct FittedFunction {
    spec: BasisSpec,
    t_std: Standardizer,
    x_std: Standardizer,
    n_std: Standardizer,
    w_std: Standardizer,
    coeffs: Vec<f64>,
    /// Numerical rank of the normal equations; smaller than the column count
    /// when collinear columns were dropped.
    pub rank: usize,
}

impl FittedFunction {
    /// Pulls a state into the observed trust region, coordinate by
    /// coordinate, in raw units.
    pub fn project(&self, s: &StateSample) -> StateSample {
        StateSample {
            t: self.t_std.clamp_raw(s.t),
            x: self.x_std.clamp_raw(s.x),
            n: self.n_std.clamp_raw(s.n),
            w: self.w_std.clamp_raw(s.w),
        }
    }

    fn features_unclamped(&self, s: &StateSample, out: &mut [f64]) {
        feature_row(
            &self.spec,
            self.t_std.standardize(s.t),
            self.x_std.standardize(s.x),
            self.n_std.standardize(s.n),
            self.w_std.standardize(s.w),
            out,
        );
    }

    fn eval_unclamped(&self, s: &StateSample) -> f64 {
        let mut row = vec![0.0; self.spec.column_count()];
        self.features_unclamped(s, &mut row);
        row.iter().zip(&self.coeffs).map(|(f, c)| f * c).sum()
    }

    /// Value at the projected state.
    pub fn eval(&self, s: &StateSample) -> f64 {
        self.eval_unclamped(&self.project(s))
    }

    /// Value of the fit at the projected base point and at the base point
    /// displaced by `(dx, dn)` in raw units: the building block of the jump
    /// integrand extraction. The displaced point is evaluated without
    /// re-projection, so a one-jump displacement from the trust boundary is
    /// a bounded extrapolation.
    pub fn eval_with_displacement(&self, s: &StateSample, dx: f64, dn: f64) -> (f64, f64) {
        let base = self.project(s);
        let displaced = StateSample { x: base.x + dx, n: base.n + dn, ..base };
        (self.eval_unclamped(&base), self.eval_unclamped(&displaced))
    }

    /// Partial derivative with respect to raw wealth at the projected point.
    pub fn eval_dx(&self, s: &StateSample) -> f64 {
        let base = self.project(s);
        let t = self.t_std.standardize(base.t);
        let x = self.x_std.standardize(base.x);
        let n = self.n_std.standardize(base.n);
        let mut acc = 0.0;
        let mut col = 0usize;
        for dt in 0..=self.spec.t_degree {
            for dx in 0..=self.spec.x_degree {
                for dn in 0..=self.spec.n_degree {
                    if dx > 0 {
                        acc += self.coeffs[col]
                            * t.powi(dt as i32)
                            * dx as f64
                            * x.powi(dx as i32 - 1)
                            * n.powi(dn as i32);
                    }
                    col += 1;
                }
            }
        }
        acc / self.x_std.scale
    }

    /// Partial derivative with respect to the raw Brownian coordinate at the
    /// projected point; zero when the basis carries no Brownian terms.
    pub fn eval_dw(&self, s: &StateSample) -> f64 {
        if self.spec.w_degree == 0 {
            return 0.0;
        }
        let base = self.project(s);
        let w = self.w_std.standardize(base.w);
        let col0 = (self.spec.t_degree + 1) * (self.spec.x_degree + 1) * (self.spec.n_degree + 1);
        let mut acc = 0.0;
        for c in 1..=self.spec.w_degree {
            acc += self.coeffs[col0 + c - 1] * c as f64 * w.powi(c as i32 - 1);
        }
        acc / self.w_std.scale
    }
}

fn feature_row(spec: &BasisSpec, t: f64, x: f64, n: f64, w: f64, out: &mut [f64]) {
    let mut col = 0usize;
    let mut t_pow = 1.0;
    for _ in 0..=spec.t_degree {
        let mut x_pow = 1.0;
        for _ in 0..=spec.x_degree {
            let mut n_pow = 1.0;
            for _ in 0..=spec.n_degree {
                out[col] = t_pow * x_pow * n_pow;
                n_pow *= n;
                col += 1;
            }
            x_pow *= x;
        }
        t_pow *= t;
    }
    let mut w_pow = 1.0;
    for _ in 1..=spec.w_degree {
        w_pow *= w;
        out[col] = w_pow;
        col += 1;
    }
}

/// Least-squares fit of `targets(k)` against the basis evaluated at
/// `states(k)`, `k = 0..n_samples`. Sample access goes through closures so
/// large sample sets never need materializing.
pub(crate) fn fit_with<FS, FT>(
    spec: BasisSpec,
    n_samples: usize,
    states: FS,
    targets: FT,
) -> Result<FittedFunction>
where
    FS: Fn(usize) -> StateSample,
    FT: Fn(usize) -> f64,
{
    if n_samples == 0 {
        return Err(Error::Diagnostic("regression needs at least one sample".to_string()));
    }
    let t_std = Standardizer::from_samples((0..n_samples).map(|k| states(k).t));
    let x_std = Standardizer::from_samples((0..n_samples).map(|k| states(k).x));
    let n_std = Standardizer::from_samples((0..n_samples).map(|k| states(k).n));
    let w_std = Standardizer::from_samples((0..n_samples).map(|k| states(k).w));

    let p = spec.column_count();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    // Serial accumulation in sample order keeps the fit bit-reproducible.
    for k in 0..n_samples {
        let s = states(k);
        feature_row(
            &spec,
            t_std.standardize(t_std.clamp_raw(s.t)),
            x_std.standardize(x_std.clamp_raw(s.x)),
            n_std.standardize(n_std.clamp_raw(s.n)),
            w_std.standardize(w_std.clamp_raw(s.w)),
            &mut row,
        );
        let target = targets(k);
        for i in 0..p {
            rhs[i] += row[i] * target;
            for j in i..p {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }

    let svd = gram.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = SV_THRESHOLD * max_sv.max(f64::MIN_POSITIVE);
    let rank = svd.rank(eps);
    let solution = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::Diagnostic(format!("regression solve failed: {e}")))?;

    Ok(FittedFunction {
        spec,
        t_std,
        x_std,
        n_std,
        w_std,
        coeffs: solution.iter().copied().collect(),
        rank,
    })
}

/// Least-squares fit over materialized samples.
pub(crate) fn fit(
    spec: BasisSpec,
    states: &[StateSample],
    targets: &[f64],
) -> Result<FittedFunction> {
    if states.len() != targets.len() {
        return Err(Error::Diagnostic(format!(
            "regression needs matching samples, got {} states and {} targets",
            states.len(),
            targets.len()
        )));
    }
    fit_with(spec, states.len(), |k| states[k], |k| targets[k])
}
