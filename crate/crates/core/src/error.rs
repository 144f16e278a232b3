use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge over [{a}, {b}]: error estimate {estimate:e} > requested {requested:e}")]
    QuadratureNoConvergence {
        a: f64,
        b: f64,
        estimate: f64,
        requested: f64,
    },

    #[error("series argument z = {z} beyond the direct-evaluation range; use the scaled form")]
    SeriesOverflow { z: f64 },

    #[error("invalid bracket: f({lo}) = {f_lo}, f({hi}) = {f_hi} do not straddle zero")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("fixed-point scan exhausted the grid at nbar = {nbar_max}; no sign change found")]
    GridExhausted { nbar_max: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),
}
