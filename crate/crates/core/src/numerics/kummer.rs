use crate::{Error, Result};

/// Largest argument accepted by the direct power series. Beyond this the
/// unscaled value overflows or loses accuracy; callers needing large
/// arguments must work with exponentially scaled combinations (see the
/// mean-field load function, which never forms the raw value).
const MAX_DIRECT_Z: f64 = 300.0;
const MAX_SERIES_TERMS: usize = 20_000;

/// Kummer's confluent hypergeometric function 1F1(a; b; z) for a, b > 0 and
/// z >= 0, by the power series
///
///   1F1(a; b; z) = sum_k ((a)_k / (b)_k) z^k / k!
///
/// (DLMF 13.2.2). All terms are positive here, so the series has no
/// cancellation and converges once k exceeds z.
pub fn kummer_1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!("kummer_1f1: need a > 0, b > 0 (got a={a}, b={b})")));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter(format!("kummer_1f1: need z >= 0 (got {z})")));
    }
    if z > MAX_DIRECT_Z {
        return Err(Error::SeriesOverflow { z });
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * z / (kf + 1.0);
        sum += term;
        if term < 0.5 * f64::EPSILON * sum && kf > z {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence(format!("kummer_1f1({a}, {b}, {z}): series did not settle")))
}

/// d/dz 1F1(a; b; z) = (a/b) 1F1(a+1; b+1; z) (DLMF 13.3.15).
pub fn kummer_derivative(a: f64, b: f64, z: f64) -> Result<f64> {
    Ok(a / b * kummer_1f1(a + 1.0, b + 1.0, z)?)
}
