//! The pointwise optimality equation for the dollar allocation.
//!
//! In the diffusive model the optimal allocation solves `F(w, pi) = 0` with
//!
//! ```text
//! F(w, pi) = u'(x+y) mu + u''(x+y) (z sigma + pi sigma^2)
//!          + (u'(psi + pi eta + x + y) - u'(x+y)) eta nu,
//! ```
//!
//! which is strictly decreasing in `pi` with slope below
//! `u''(x+y) sigma^2 / 2 < 0`. That slope bound yields a guaranteed root
//! bracket `[-|F(w,0)|/g, |F(w,0)|/g]` with `g = |u''(x+y)| sigma^2 / 2`, so
//! the solver is bracket-certified and failure-free on the domain
//! `sigma^2 > 0`. In the pure-jump model (`sigma = 0`) the equation is solved
//! in closed form instead.

use crate::error::Error;
use crate::utility::UtilityFunction;
use crate::Result;

/// Pure-jump formulas divide by `eta`; smaller magnitudes are treated as the
/// `eta = 0` branch.
pub const ETA_MIN: f64 = 1e-8;

/// Default absolute tolerance on the optimality residual.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-12;

/// Arguments of the optimality equation at one `(omega, t)` point: the
/// forward and backward components (left limits), the two backward
/// integrands, and the coefficient triple.
#[derive(Debug, Clone, Copy)]
pub struct StateTuple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub eta: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl StateTuple {
    fn check_domain(&self) -> Result<()> {
        let vals = [self.x, self.y, self.z, self.psi, self.eta, self.mu, self.sigma];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("state tuple has non-finite fields: {self:?}")));
        }
        if self.sigma * self.sigma <= 0.0 {
            return Err(Error::domain(
                "optimality residual requires sigma^2 > 0; use pure_jump_strategy for sigma = 0",
            ));
        }
        Ok(())
    }
}

/// The first-order-condition residual `F(w, pi)`.
pub fn residual(w: &StateTuple, pi: f64, nu: f64, utility: &UtilityFunction) -> Result<f64> {
    w.check_domain()?;
    let base = utility.evaluate(w.x + w.y)?;
    let shifted_du = utility.du(w.psi + pi * w.eta + w.x + w.y)?;
    Ok(base.du * w.mu
        + base.d2u * (w.z * w.sigma + pi * w.sigma * w.sigma)
        + (shifted_du - base.du) * w.eta * nu)
}

/// Solves `F(w, pi) = 0` for the unique root.
///
/// Starts from the certified bracket, bisects, and polishes with secant
/// steps until `|F| <= tol`. Utility overflow inside the bracket is reported
/// as a numerical-range error naming the bracket.
pub fn solve_strategy(
    w: &StateTuple,
    nu: f64,
    utility: &UtilityFunction,
    tol: f64,
) -> Result<f64> {
    w.check_domain()?;
    if !(tol > 0.0) {
        return Err(Error::config(format!("residual tolerance must be positive, got {tol}")));
    }
    let f0 = residual(w, 0.0, nu, utility)?;
    if f0.abs() <= tol {
        return Ok(0.0);
    }
    let g = 0.5 * utility.evaluate(w.x + w.y)?.d2u.abs() * w.sigma * w.sigma;
    let half_width = f0.abs() / g;
    let (mut lo, mut hi) = (-half_width, half_width);

    let eval = |pi: f64| -> Result<f64> {
        residual(w, pi, nu, utility).map_err(|e| match e {
            Error::NumericalRange(msg) => Error::range(format!(
                "{msg} while solving in bracket [{:.6e}, {:.6e}]",
                -half_width, half_width
            )),
            other => other,
        })
    };

    // F is strictly decreasing, so F(lo) > 0 > F(hi) by the bracket bound.
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    debug_assert!(f_lo > 0.0 && f_hi < 0.0, "bracket lost its sign change");

    for iter in 0..200 {
        let bisect = 0.5 * (lo + hi);
        let candidate = if iter % 2 == 0 {
            bisect
        } else {
            let denom = f_lo - f_hi;
            let secant = if denom != 0.0 { lo + (hi - lo) * f_lo / denom } else { bisect };
            if secant > lo && secant < hi {
                secant
            } else {
                bisect
            }
        };
        let f_c = eval(candidate)?;
        if f_c.abs() <= tol {
            return Ok(candidate);
        }
        if f_c > 0.0 {
            lo = candidate;
            f_lo = f_c;
        } else {
            hi = candidate;
            f_hi = f_c;
        }
        if (hi - lo).abs() <= f64::EPSILON * (1.0 + candidate.abs()) {
            break;
        }
    }
    let best = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    if best.1.abs() <= tol {
        Ok(best.0)
    } else {
        Err(Error::range(format!(
            "root refinement stalled at residual {:.3e} (> tol {tol:.3e}) near pi = {:.6e}",
            best.1, best.0
        )))
    }
}

fn check_pure_jump_inputs(eta: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!(
            "pure-jump strategy requires a positive intensity, got nu = {nu}"
        )));
    }
    if eta.abs() < ETA_MIN {
        return Err(Error::degenerate(format!(
            "pure-jump strategy requires |eta| >= {ETA_MIN}, got eta = {eta}"
        )));
    }
    Ok(eta)
}

/// Explicit optimal allocation in the pure-jump model:
/// `pi = ((u')^{-1}(u'(x+y)(1 - m)) - (psi + x + y)) / eta` with
/// `m = mu / (eta nu)`.
pub fn pure_jump_strategy(
    x: f64,
    y: f64,
    psi: f64,
    mu: f64,
    eta: f64,
    nu: f64,
    utility: &UtilityFunction,
) -> Result<f64> {
    check_pure_jump_inputs(eta, nu)?;
    let m = mu / (eta * nu);
    if m >= 1.0 {
        return Err(Error::domain(format!(
            "pure-jump strategy: mu/(eta nu) = {m} >= 1 makes the marginal-utility argument nonpositive"
        )));
    }
    let w = x + y;
    let du_w = utility.du(w)?;
    let target = utility.invert_marginal(du_w * (1.0 - m))?;
    Ok((target - (psi + w)) / eta)
}

/// The pure-jump allocation for the exponential family:
/// `pi = -(ln(1 - m)/delta + psi) / eta`.
pub fn exponential_pure_jump_strategy(
    psi: f64,
    mu: f64,
    eta: f64,
    nu: f64,
    delta: f64,
) -> Result<f64> {
    check_pure_jump_inputs(eta, nu)?;
    if !(delta > 0.0) {
        return Err(Error::domain(format!("risk aversion must be positive, got {delta}")));
    }
    let m = mu / (eta * nu);
    if m >= 1.0 {
        return Err(Error::domain(format!(
            "pure-jump strategy: mu/(eta nu) = {m} >= 1 makes the marginal-utility argument nonpositive"
        )));
    }
    Ok(-((1.0 - m).ln() / delta + psi) / eta)
}

#[cfg(test)]
mod tests {
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    use super::*;

    fn exp_utility(delta: f64) -> UtilityFunction {
        UtilityFunction::exponential(delta).unwrap()
    }

    fn mixture() -> UtilityFunction {
        UtilityFunction::mixture(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn residual_vanishes_without_drift_or_integrands() {
        let w = StateTuple { x: 0.3, y: -0.1, z: 0.0, psi: 0.0, eta: 0.4, mu: 0.0, sigma: 0.2 };
        let f = residual(&w, 0.0, 1.0, &exp_utility(1.0)).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn residual_scalar_arithmetic_no_jumps() {
        // delta = 1, x+y = 0, eta = 0, sigma = 0.2, mu = 0.05, z = 0,
        // pi = 1.25: F = 0.05 - 1.25 * 0.04 = 0.
        let w = StateTuple { x: 0.0, y: 0.0, z: 0.0, psi: 0.0, eta: 0.0, mu: 0.05, sigma: 0.2 };
        let f = residual(&w, 1.25, 1.0, &exp_utility(1.0)).unwrap();
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn residual_scalar_arithmetic_with_jumps() {
        // At pi = 0 the jump term cancels and F = mu.
        let w = StateTuple { x: 0.0, y: 0.0, z: 0.0, psi: 0.0, eta: 0.5, mu: 0.1, sigma: 0.2 };
        let f = residual(&w, 0.0, 1.0, &exp_utility(1.0)).unwrap();
        assert_relative_eq!(f, 0.1, max_relative = 1e-14);
    }

    #[test]
    fn residual_rejects_sigma_zero() {
        let w = StateTuple { x: 0.0, y: 0.0, z: 0.0, psi: 0.0, eta: 0.5, mu: 0.1, sigma: 0.0 };
        let err = residual(&w, 0.0, 1.0, &exp_utility(1.0)).unwrap_err();
        assert!(err.to_string().contains("pure_jump_strategy"), "{err}");
    }

    #[test]
    fn solver_recovers_merton_allocation() {
        // eta = 0, z = 0: pi = mu / (delta sigma^2) = 0.625.
        let w = StateTuple { x: 0.0, y: 0.0, z: 0.0, psi: 0.0, eta: 0.0, mu: 0.05, sigma: 0.2 };
        let u = exp_utility(2.0);
        let pi = solve_strategy(&w, 1.0, &u, 1e-12).unwrap();
        assert_abs_diff_eq!(pi, 0.625, epsilon = 1e-10);
        assert!(residual(&w, pi, 1.0, &u).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn solver_returns_zero_when_residual_already_vanishes() {
        let w = StateTuple { x: 0.1, y: 0.2, z: 0.0, psi: 0.0, eta: 0.3, mu: 0.0, sigma: 0.5 };
        assert_eq!(solve_strategy(&w, 1.0, &exp_utility(1.0), 1e-12).unwrap(), 0.0);
    }

    /// Antiderivative of `F` in `pi`; its argmax is the root of `F`.
    fn one_step_objective(w: &StateTuple, pi: f64, nu: f64, u: &UtilityFunction) -> f64 {
        let base = u.evaluate(w.x + w.y).unwrap();
        let bumped = u.evaluate(w.psi + pi * w.eta + w.x + w.y).unwrap();
        base.du * w.mu * pi
            + base.d2u * (w.z * w.sigma * pi + 0.5 * w.sigma * w.sigma * pi * pi)
            + nu * bumped.u
            - base.du * w.eta * nu * pi
    }

    #[test]
    fn solver_matches_brute_force_argmax() {
        let w = StateTuple { x: 0.0, y: 0.0, z: 0.0, psi: 0.0, eta: 0.5, mu: 0.1, sigma: 0.2 };
        let u = exp_utility(1.0);
        let pi = solve_strategy(&w, 1.0, &u, 1e-12).unwrap();

        let step = 1e-4;
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut grid_pi = -10.0;
        while grid_pi <= 10.0 {
            let val = one_step_objective(&w, grid_pi, 1.0, &u);
            if val > best.0 {
                best = (val, grid_pi);
            }
            grid_pi += step;
        }
        assert!(
            (pi - best.1).abs() <= step,
            "root {pi} vs grid argmax {} (step {step})",
            best.1
        );
    }

    #[test]
    fn eta_to_zero_limit_matches_closed_form() {
        // With eta = 1e-8 the solver must agree with the explicit eta = 0
        // allocation (1/sigma)(-(u'/u'')(mu/sigma) - z) to 1e-6 relative.
        let u = exp_utility(1.5);
        let w = StateTuple { x: 0.2, y: 0.1, z: 0.05, psi: 0.02, eta: 1e-8, mu: 0.08, sigma: 0.25 };
        let pi = solve_strategy(&w, 1.0, &u, 1e-14).unwrap();
        let base = u.evaluate(w.x + w.y).unwrap();
        let closed = (-(base.du / base.d2u) * (w.mu / w.sigma) - w.z) / w.sigma;
        assert_relative_eq!(pi, closed, max_relative = 1e-6);
    }

    #[test]
    fn pure_jump_reference_value() {
        // m = 0.2, delta = 1, eta = 0.5: pi = -2 ln(0.8) = 0.44628710...
        let pi = exponential_pure_jump_strategy(0.0, 0.1, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(pi, 0.446_287_102_628_419_5, max_relative = 1e-12);
        let via_general =
            pure_jump_strategy(0.7, -0.2, 0.0, 0.1, 0.5, 1.0, &exp_utility(1.0)).unwrap();
        assert_relative_eq!(pi, via_general, max_relative = 1e-12);
    }

    #[test]
    fn pure_jump_zero_drift_gives_zero() {
        let pi = pure_jump_strategy(0.4, 0.1, 0.0, 0.0, 0.5, 1.0, &mixture()).unwrap();
        assert_abs_diff_eq!(pi, 0.0, epsilon = 1e-11);
        assert_eq!(exponential_pure_jump_strategy(0.0, 0.0, 0.5, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn pure_jump_psi_cancellation() {
        // psi = -ln(1-m)/delta makes the allocation vanish.
        let psi = -(1.0f64 - 0.2).ln();
        let pi = exponential_pure_jump_strategy(psi, 0.1, 0.5, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(pi, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_jump_rejects_m_at_least_one() {
        let err = pure_jump_strategy(0.0, 0.0, 0.0, 0.6, 0.5, 1.0, &exp_utility(1.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
        let err = exponential_pure_jump_strategy(0.0, 0.6, 0.5, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn pure_jump_rejects_tiny_eta() {
        let err = pure_jump_strategy(0.0, 0.0, 0.0, 0.1, 1e-9, 1.0, &exp_utility(1.0)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn pure_jump_satisfies_first_order_condition() {
        // u'(x+y) mu + gamma eta nu = 0 with
        // gamma = u'(psi + pi eta + x + y) - u'(x+y), for both families.
        for u in [exp_utility(1.0), mixture()] {
            for (x, y, psi, mu, eta, nu) in [
                (0.0, 0.0, 0.0, 0.1, 0.5, 1.0),
                (0.8, -0.3, 0.2, -0.15, 0.5, 1.3),
                (1.5, 0.4, -0.1, 0.1, -0.4, 2.0),
            ] {
                let pi = pure_jump_strategy(x, y, psi, mu, eta, nu, &u).unwrap();
                let w = x + y;
                let gamma = u.du(psi + pi * eta + w).unwrap() - u.du(w).unwrap();
                let foc = u.du(w).unwrap() * mu + gamma * eta * nu;
                assert!(foc.abs() <= 1e-10, "foc residual {foc} for {u:?}");
            }
        }
    }

    #[test]
    fn mixture_strategy_agrees_with_direct_root_find() {
        // Independent route: bisection on the first-order condition in pi.
        let u = mixture();
        let (x, y, psi, mu, eta, nu) = (0.0, 0.0, 0.0, 0.1, 0.5, 1.0);
        let pi = pure_jump_strategy(x, y, psi, mu, eta, nu, &u).unwrap();

        let foc = |p: f64| {
            let w = x + y;
            let gamma = u.du(psi + p * eta + w).unwrap() - u.du(w).unwrap();
            u.du(w).unwrap() * mu + gamma * eta * nu
        };
        let (mut lo, mut hi) = (-10.0, 10.0);
        assert!(foc(lo) > 0.0 && foc(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if foc(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(pi, 0.5 * (lo + hi), epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn residual_is_strictly_decreasing_with_bounded_slope(
            x in -2.0f64..2.0,
            y in -1.0f64..1.0,
            z in -0.5f64..0.5,
            psi in -0.5f64..0.5,
            eta in -0.4f64..0.9,
            mu in -0.3f64..0.3,
            sigma in 0.05f64..0.8,
            pi1 in -3.0f64..3.0,
            gap in 0.01f64..2.0,
        ) {
            let u = exp_utility(1.0);
            let w = StateTuple { x, y, z, psi, eta, mu, sigma };
            let pi2 = pi1 + gap;
            let f1 = residual(&w, pi1, 1.0, &u).unwrap();
            let f2 = residual(&w, pi2, 1.0, &u).unwrap();
            prop_assert!(f1 > f2);
            let slope = (f2 - f1) / gap;
            let bound = 0.5 * u.evaluate(x + y).unwrap().d2u * sigma * sigma;
            prop_assert!(slope <= bound + 1e-9, "slope {slope} vs bound {bound}");
        }

        #[test]
        fn solver_certificate_holds(
            x in -2.0f64..2.0,
            y in -1.0f64..1.0,
            z in -0.5f64..0.5,
            psi in -0.5f64..0.5,
            eta in -0.4f64..0.9,
            mu in -0.3f64..0.3,
            sigma in 0.05f64..0.8,
        ) {
            let u = exp_utility(1.0);
            let w = StateTuple { x, y, z, psi, eta, mu, sigma };
            // The certified bracket must show a sign change.
            let f0 = residual(&w, 0.0, 1.0, &u).unwrap();
            if f0.abs() > 1e-12 {
                let g = 0.5 * u.evaluate(x + y).unwrap().d2u.abs() * sigma * sigma;
                let b = f0.abs() / g;
                let f_lo = residual(&w, -b, 1.0, &u).unwrap();
                let f_hi = residual(&w, b, 1.0, &u).unwrap();
                prop_assert!(f_lo > 0.0 && f_hi < 0.0, "bracket [{}, {}] -> ({f_lo}, {f_hi})", -b, b);
            }
            let pi = solve_strategy(&w, 1.0, &u, 1e-12).unwrap();
            let res = residual(&w, pi, 1.0, &u).unwrap();
            prop_assert!(res.abs() <= 1e-12, "residual {res}");
        }
    }
}
