//! Traffic dynamics of a single-cell uplink network modeled as a spatial
//! birth-death process on a disk.
//!
//! Users arrive as a Poisson rain over the cell, upload a random file at an
//! SINR-dependent rate, and leave. The crate provides:
//!
//! - the physical model (path loss, fractional power control, rate functions,
//!   the critical arrival rate and regime classification) in [`model`],
//! - shared numerics (Kummer's function, adaptive quadrature, root finding)
//!   in [`numerics`],
//! - the first-order (Poisson) mean-field fixed point in [`first_order`],
//! - the second-moment closure on a radial grid in [`second_order`],
//! - a discrete-event / discretized-time simulator in [`sim`],
//! - analytic first-passage-time tables for the full-inversion chain in
//!   [`passage`],
//! - experiment configuration and run manifests in [`config`].

pub mod config;
pub mod error;
pub mod first_order;
pub mod model;
pub mod numerics;
pub mod passage;
pub mod second_order;
pub mod sim;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
