//! Principal branch of the Lambert W function.
//!
//! `W` is the inverse of `w ↦ w·e^w` on `(-1, ∞)`, so it maps `(-1/e, ∞)`
//! onto `(-1, ∞)`. The solver picks a starting point from one of three
//! regimes (branch-point series, Taylor series around zero, logarithmic
//! asymptote) and refines it with Halley's method. Large arguments are
//! iterated on `w + ln w = ln x` so that `e^w` never overflows.

use std::f64::consts::E;

use crate::error::{IndiffError, Result};

/// `-1/e` rounded to the nearest double.
pub const BRANCH_POINT: f64 = -0.36787944117144233;

// e split into a double and its rounding error, used to form `e·x + 1`
// without cancellation next to the branch point.
const E_HI: f64 = E;
const E_LO: f64 = 1.445_646_891_729_250_2e-16;

const MAX_ITERATIONS: u32 = 50;
const STEP_TOLERANCE: f64 = 1e-15;
const RESIDUAL_LIMIT: f64 = 1e-12;

/// A single evaluation of `W` with convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertEval {
    pub x: f64,
    pub w: f64,
    pub iterations: u32,
    /// `|w·e^w − x| / max(1, |x|)`.
    pub residual: f64,
}

/// Evaluates `W(x)` and reports iteration count and residual.
pub fn lambert_w_eval(x: f64) -> Result<LambertEval> {
    if !x.is_finite() {
        return Err(IndiffError::NonFinite {
            name: "lambert_w argument",
            value: x,
        });
    }
    if x <= BRANCH_POINT {
        return Err(IndiffError::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(LambertEval {
            x,
            w: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }

    let (w, iterations) = if x > E {
        solve_log_form(x.ln())
    } else {
        solve_direct(x)
    };

    let residual = relative_residual(x, w);
    if !w.is_finite() || residual > RESIDUAL_LIMIT {
        return Err(IndiffError::LambertNonConvergence { x, residual });
    }
    Ok(LambertEval {
        x,
        w,
        iterations,
        residual,
    })
}

/// Principal branch `W(x)` for `x > -1/e`.
pub fn lambert_w(x: f64) -> Result<f64> {
    lambert_w_eval(x).map(|e| e.w)
}

/// `W(e^{log_x})`, usable when `e^{log_x}` itself overflows.
pub fn lambert_w_of_exp(log_x: f64) -> Result<f64> {
    if log_x.is_nan() || log_x == f64::INFINITY {
        return Err(IndiffError::NonFinite {
            name: "lambert_w log-argument",
            value: log_x,
        });
    }
    if log_x <= 1.0 {
        return lambert_w(log_x.exp());
    }
    let (w, _) = solve_log_form(log_x);
    let residual = (w + w.ln() - log_x).abs() / log_x;
    if !w.is_finite() || residual > RESIDUAL_LIMIT {
        return Err(IndiffError::LambertNonConvergence {
            x: f64::INFINITY,
            residual,
        });
    }
    Ok(w)
}

/// `W'(x) = 1 / (e^{W(x)} + x)`, finite on the open domain.
pub fn lambert_w_prime(x: f64) -> Result<f64> {
    let w = lambert_w(x)?;
    Ok(1.0 / (w.exp() + x))
}

fn relative_residual(x: f64, w: f64) -> f64 {
    if x > 1e300 {
        // w·e^w may overflow; compare in log space, which is the same
        // relative error to first order.
        return (w + w.ln() - x.ln()).abs();
    }
    (w * w.exp() - x).abs() / x.abs().max(1.0)
}

fn initial_guess(x: f64) -> f64 {
    if x <= -0.2 {
        // Series in p = sqrt(2(e·x + 1)) around the branch point.
        let q = E_HI.mul_add(x, 1.0) + E_LO * x;
        let p = (2.0 * q.max(0.0)).sqrt();
        -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
    } else if x.abs() < 0.3 {
        x * (1.0 + x * (-1.0 + 1.5 * x))
    } else {
        x.ln_1p()
    }
}

/// Halley on `f(w) = w·e^w − x`.
fn solve_direct(x: f64) -> (f64, u32) {
    let mut w = initial_guess(x);
    for it in 1..=MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 <= 0.0 {
            // Landed on or past the branch point; pull back inside.
            w = -1.0 + 1e-8;
            continue;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= STEP_TOLERANCE * (1.0 + w.abs()) {
            return (w, it);
        }
    }
    (w, MAX_ITERATIONS)
}

/// Halley on `g(w) = w + ln w − ln x` given `ln x > 1`, where `w > 1`.
fn solve_log_form(lx: f64) -> (f64, u32) {
    let llx = lx.ln();
    let mut w = lx - llx + llx / lx;
    for it in 1..=MAX_ITERATIONS {
        let g = w + w.ln() - lx;
        let g1 = 1.0 + 1.0 / w;
        let g2 = -1.0 / (w * w);
        let step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
        w -= step;
        if step.abs() <= STEP_TOLERANCE * (1.0 + w.abs()) {
            return (w, it);
        }
    }
    (w, MAX_ITERATIONS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(x: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(E).unwrap() - 1.0).abs() < 1e-15);
        let w1 = lambert_w(1.0).unwrap();
        assert!((w1 - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!((w1 - bisect(1.0, 0.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn large_argument_against_bisection() {
        let x = 1e6;
        let w = lambert_w(x).unwrap();
        assert!((w - bisect(x, 1.0, 20.0)).abs() < 1e-9);
        assert!((w / x.ln() - 1.0).abs() < 0.3);
        // The ratio W(x)/ln(x) keeps approaching 1.
        let far = lambert_w(1e300).unwrap() / 1e300f64.ln();
        assert!(far > w / x.ln() && far < 1.0);
    }

    #[test]
    fn derivative_values() {
        assert!((lambert_w_prime(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w_prime(E).unwrap() - 1.0 / (2.0 * E)).abs() < 1e-15);
        let h = 1e-6;
        let fd = (lambert_w(2.5 + h).unwrap() - lambert_w(2.5 - h).unwrap()) / (2.0 * h);
        let exact = lambert_w_prime(2.5).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-8);
        // Alternate closed form W/(x(1+W)).
        for &x in &[-0.3, -0.01, 0.5, 7.0, 1e5] {
            let w = lambert_w(x).unwrap();
            let alt = w / (x * (1.0 + w));
            assert!(((lambert_w_prime(x).unwrap() - alt) / alt).abs() < 1e-13);
        }
    }

    #[test]
    fn log_argument_form() {
        for lx in [-3.0, 0.5, 1.5, 40.0, 700.0] {
            let direct = lambert_w(f64::exp(lx)).unwrap();
            assert!((lambert_w_of_exp(lx).unwrap() / direct - 1.0).abs() < 1e-14);
        }
        let w = lambert_w_of_exp(2700.0).unwrap();
        assert!((w + w.ln() - 2700.0).abs() < 1e-12 * 2700.0);
        assert!(lambert_w_of_exp(f64::INFINITY).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            lambert_w(-1.0),
            Err(IndiffError::LambertDomain(_))
        ));
        assert!(matches!(
            lambert_w(BRANCH_POINT),
            Err(IndiffError::LambertDomain(_))
        ));
        assert!(matches!(
            lambert_w(f64::NAN),
            Err(IndiffError::NonFinite { .. })
        ));
        assert!(matches!(
            lambert_w(f64::INFINITY),
            Err(IndiffError::NonFinite { .. })
        ));
        assert!(lambert_w_prime(BRANCH_POINT).is_err());
    }

    #[test]
    fn near_branch_point() {
        let x = BRANCH_POINT + 1e-12;
        let eval = lambert_w_eval(x).unwrap();
        assert!(eval.w > -1.0 && eval.w < -0.99);
        assert!(eval.residual < 1e-13);
    }

    #[test]
    fn sign_matches_argument() {
        for &x in &[-0.36, -1e-200, 1e-300, 3.0, 1e200] {
            let w = lambert_w(x).unwrap();
            assert_eq!(w > 0.0, x > 0.0, "x = {x}");
            assert_eq!(w < 0.0, x < 0.0, "x = {x}");
        }
    }

    #[test]
    fn second_order_taylor_near_zero() {
        for i in 1..=200 {
            let x = (i as f64 - 100.5) * 1e-5;
            let w = lambert_w(x).unwrap();
            let err = (w - (x - x * x)).abs();
            assert!(err <= 2.0 * x.abs().powi(3), "x = {x}, err = {err}");
        }
    }
}
