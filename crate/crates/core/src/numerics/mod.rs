//! Shared numerics: adaptive Gauss-Kronrod quadrature, Kummer's confluent
//! hypergeometric function, the disk/semi-infinite integrals behind the
//! mean-field fixed points, and safeguarded root finding.

mod kummer;
mod laplace;
mod quad;
mod root;

pub use kummer::{kummer_1f1, kummer_derivative};
pub use laplace::{
    g_inner, laplace_exponent_integral, outer_t_integral, outer_t_integral_with_profile,
    DiskProfile,
};
pub use quad::{disk_integral, integrate, QuadResult, QuadratureSpec};
pub use root::bracketed_root;
