//! Exact computer algebra for correlators over a graded Fock module,
//! their epsilon-sewing products, and the coboundary complex built on them.
//!
//! Everything is computed with exact rationals; complex doubles only appear
//! when a series or rational form is evaluated at a numeric point.

pub mod complex;
pub mod correlators;
pub mod error;
pub mod fields;
pub mod graded;
pub mod perm;
pub mod rational;
pub mod series;
pub mod sewing;

pub use error::{Error, Result};

/// Exact scalar used throughout.
pub type Q = num_rational::BigRational;

/// Numeric scalar for convergence runs.
pub type C64 = num_complex::Complex64;

pub fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

pub(crate) fn q_to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}
