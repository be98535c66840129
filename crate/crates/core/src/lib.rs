//! Exact dyadic decomposition machinery for granular sets and functions
//! (length, thickness, critical thickness, generalized-box splitting,
//! Calderón–Zygmund and Whitney decompositions), together with a numerical
//! harness for lacunary spherical maximal functions.
//!
//! Set-valued quantities are always exact. Function values are generic over
//! [`Scalar`]; the aliases below fix the two common instantiations.

// `!(x > 0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxes;
pub mod cz;
pub mod dyadic;
pub mod error;
pub mod gen;
pub mod metrics;
pub mod scalar;
pub mod spherical;
pub mod verify;

pub use dyadic::{DyadicCube, GranularSet, RootRegion};
pub use error::{Error, Result};
pub use scalar::{Dyadic, Rational, Scalar};

/// Granular function with double-precision amplitudes.
pub type Function = cz::GranularFunction<f64>;
/// Granular function with exact rational amplitudes.
pub type ExactFunction = cz::GranularFunction<Rational>;
/// Polynomial basis evaluated in floating point.
pub type Basis = cz::PolynomialBasis<f64>;
/// Polynomial basis with exact rational coefficients.
pub type ExactBasis = cz::PolynomialBasis<Rational>;
/// Calderón–Zygmund decomposition of a double-precision function.
pub type Decomposition = cz::CzDecomposition<f64>;
/// Sampled grid function in double precision.
pub type Grid = spherical::GridFunction<f64>;
/// Sampled grid function in single precision.
pub type Grid32 = spherical::GridFunction<f32>;
