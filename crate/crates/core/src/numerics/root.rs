use crate::{Error, Result};

const MAX_ITERS: usize = 200;

/// Safeguarded root finding on a sign-changing bracket: secant steps when
/// they stay inside and shrink the bracket, bisection otherwise. Stops when
/// |f| <= tol or the bracket width drops below tol.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("bracketed_root: tol = {tol} <= 0")));
    }
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    for _ in 0..MAX_ITERS {
        // Secant candidate, clamped away from the endpoints.
        let mut x = b - fb * (b - a) / (fb - fa);
        let width = b - a;
        if !x.is_finite() || x <= a + 0.01 * width || x >= b - 0.01 * width {
            x = a + 0.5 * width;
        }
        let fx = f(x);
        if fx == 0.0 || fx.abs() <= tol || width.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if (b - a).abs() <= tol {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}
